//! The 28-element kidney descriptor: 8 shape scalars, a curvature histogram and an
//! attenuation histogram.

mod histogram;
mod hull;
mod shape;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use histogram::{
    attenuation_histogram, attenuation_histogram_in, bin_index, curvature_histogram,
    curvature_histogram_in, histogram, ATTENUATION_RANGE, BINS, CURVATURE_RANGE,
};
pub use hull::LatticeHull;
pub use shape::{mask_descriptors, shape_descriptors, ShapeDescriptors};

use crate::mesher::{kidney_graph, CurvatureField, KidneyGraph, SurfaceParams, TriMesh};
use crate::volio::{KidneyComponent, Side, VolumeGrid};
use crate::{Error, Result};

/// Feature vector length.
pub const FEATURE_LEN: usize = 28;
/// Number of leading shape scalars.
pub const SHAPE_LEN: usize = 8;
/// Index of the side flag.
pub const SIDE_INDEX: usize = 7;

/// Column names in feature order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "volume",
        "max_diameter",
        "min_diameter",
        "convexity",
        "inertia_1",
        "inertia_2",
        "inertia_3",
        "side",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((0..BINS).map(|k| format!("curv_{k}")));
    names.extend((0..BINS).map(|k| format!("atten_{k}")));
    names
}

/// `[shape(8) | curvature histogram(10) | attenuation histogram(10)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector28([f64; FEATURE_LEN]);

impl FeatureVector28 {
    /// Concatenates the parts; rejects non-finite values.
    pub fn assemble(
        shape: &ShapeDescriptors,
        curvature: &[f64; BINS],
        attenuation: &[f64; BINS],
    ) -> Result<Self> {
        let mut v = [0.0; FEATURE_LEN];
        v[..SHAPE_LEN].copy_from_slice(&shape.to_array());
        v[SHAPE_LEN..SHAPE_LEN + BINS].copy_from_slice(curvature);
        v[SHAPE_LEN + BINS..].copy_from_slice(attenuation);
        Self::from_array(v)
    }

    /// Wraps a raw array; rejects non-finite values.
    pub fn from_array(v: [f64; FEATURE_LEN]) -> Result<Self> {
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("feature {i} is not finite")));
        }
        Ok(Self(v))
    }

    pub fn as_array(&self) -> &[f64; FEATURE_LEN] {
        &self.0
    }

    pub fn shape(&self) -> &[f64] {
        &self.0[..SHAPE_LEN]
    }

    pub fn curvature(&self) -> &[f64] {
        &self.0[SHAPE_LEN..SHAPE_LEN + BINS]
    }

    pub fn attenuation(&self) -> &[f64] {
        &self.0[SHAPE_LEN + BINS..]
    }
}

impl TryFrom<Vec<f64>> for FeatureVector28 {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; FEATURE_LEN] = v.try_into().map_err(|v: Vec<f64>| {
            Error::Shape(format!("expected {FEATURE_LEN} features, got {}", v.len()))
        })?;
        Self::from_array(arr)
    }
}

impl From<FeatureVector28> for Vec<f64> {
    fn from(f: FeatureVector28) -> Self {
        f.0.to_vec()
    }
}

/// Everything derived from one kidney's mask and scan.
#[derive(Debug, Clone)]
pub struct KidneyFeatures {
    pub features: FeatureVector28,
    pub mesh: TriMesh<f64>,
    pub curvature: CurvatureField<f64>,
    pub graph: KidneyGraph<f64>,
}

/// Surface reconstruction and histogram ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureParams {
    pub surface: SurfaceParams,
    pub curvature_range: (f64, f64),
    /// Raw HU.
    pub attenuation_range: (f64, f64),
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            surface: SurfaceParams::default(),
            curvature_range: CURVATURE_RANGE,
            attenuation_range: ATTENUATION_RANGE,
        }
    }
}

/// Surface, graph and feature vector for a split kidney; `volume` must be raw HU.
pub fn kidney_features(
    component: &KidneyComponent,
    volume: &VolumeGrid,
    surface: &SurfaceParams,
) -> Result<KidneyFeatures> {
    kidney_features_with(
        component,
        volume,
        &FeatureParams {
            surface: *surface,
            ..FeatureParams::default()
        },
    )
}

/// [`kidney_features`] with explicit histogram ranges.
pub fn kidney_features_with(
    component: &KidneyComponent,
    volume: &VolumeGrid,
    params: &FeatureParams,
) -> Result<KidneyFeatures> {
    if !(params.curvature_range.0 < params.curvature_range.1) {
        return Err(Error::InvalidArgument(format!(
            "histogram range {:?} is empty",
            params.curvature_range
        )));
    }
    let shape = shape_descriptors(component)?;
    let (mesh, curvature, graph) = kidney_graph::<f64>(&component.mask, &params.surface)?;
    let curv = curvature_histogram_in(&curvature.vertex_curvatures, params.curvature_range);
    let atten = attenuation_histogram_in(volume, &component.mask, params.attenuation_range)?;
    let features = FeatureVector28::assemble(&shape, &curv, &atten)?;
    Ok(KidneyFeatures {
        features,
        mesh,
        curvature,
        graph,
    })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub id: String,
    pub side: Side,
    pub label: u8,
    pub features: FeatureVector28,
}

/// Writes `id,side,label,<28 features>` rows.
pub fn write_feature_csv(path: impl AsRef<Path>, rows: &[FeatureRow]) -> Result<()> {
    let mut out = Vec::new();
    let header = ["id", "side", "label"]
        .map(String::from)
        .into_iter()
        .chain(feature_names());
    writeln!(out, "{}", header.collect::<Vec<_>>().join(",")).expect("write to vec");
    for r in rows {
        let vals: Vec<String> = r
            .features
            .as_array()
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        writeln!(
            out,
            "{},{},{},{}",
            r.id,
            r.side.as_str(),
            r.label,
            vals.join(",")
        )
        .expect("write to vec");
    }
    crate::volio::write_atomic(path.as_ref(), &out)
}

/// Reads a file written by [`write_feature_csv`].
pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty feature CSV".into()))?;
    if header.split(',').count() != 3 + FEATURE_LEN {
        return Err(Error::Format(
            "feature CSV header has the wrong width".into(),
        ));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 3 + FEATURE_LEN {
                return Err(Error::Format(format!(
                    "feature row has {} columns",
                    cols.len()
                )));
            }
            let bad = |e: String| Error::Format(format!("feature CSV: {e}"));
            let side: Side = cols[1]
                .parse()
                .map_err(|_| bad(format!("side {:?}", cols[1])))?;
            let label: u8 = cols[2]
                .parse()
                .map_err(|_| bad(format!("label {:?}", cols[2])))?;
            let vals = cols[3..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad(format!("value {c:?}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(FeatureRow {
                id: cols[0].to_string(),
                side,
                label,
                features: vals.try_into()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(side: f64) -> ShapeDescriptors {
        ShapeDescriptors {
            volume: 1.5e5,
            max_diameter: 110.0,
            min_diameter: 40.0,
            convexity: 0.96,
            inertia_eigenvalues: [900.0, 850.0, 200.0],
            side_flag: side,
        }
    }

    #[test]
    fn layout() {
        let c = [0.1; BINS];
        let mut a = [0.0; BINS];
        a[3] = 1.0;
        let f = FeatureVector28::assemble(&shape(1.0), &c, &a).unwrap();
        assert_eq!(f.as_array().len(), FEATURE_LEN);
        assert_eq!(feature_names().len(), FEATURE_LEN);
        assert_eq!(f.shape()[SIDE_INDEX], 1.0);
        assert_eq!(f.curvature(), &c);
        assert_eq!(f.attenuation(), &a);
        let empty = FeatureVector28::assemble(&shape(0.0), &[0.0; BINS], &[0.0; BINS]).unwrap();
        assert_eq!(empty.as_array().len(), FEATURE_LEN);
    }

    #[test]
    fn side_only_changes_index_seven() {
        let l = FeatureVector28::assemble(&shape(1.0), &[0.1; BINS], &[0.1; BINS]).unwrap();
        let r = FeatureVector28::assemble(&shape(0.0), &[0.1; BINS], &[0.1; BINS]).unwrap();
        let diff: Vec<usize> = (0..FEATURE_LEN)
            .filter(|&i| l.as_array()[i] != r.as_array()[i])
            .collect();
        assert_eq!(diff, vec![SIDE_INDEX]);
    }

    #[test]
    fn non_finite_rejected() {
        let mut s = shape(1.0);
        s.volume = f64::NAN;
        assert!(FeatureVector28::assemble(&s, &[0.0; BINS], &[0.0; BINS]).is_err());
        assert!(FeatureVector28::try_from(vec![0.0; 27]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let rows = vec![
            FeatureRow {
                id: "p001".into(),
                side: Side::Left,
                label: 1,
                features: FeatureVector28::assemble(&shape(1.0), &[0.1; BINS], &[0.1; BINS])
                    .unwrap(),
            },
            FeatureRow {
                id: "p002".into(),
                side: Side::Right,
                label: 0,
                features: FeatureVector28::assemble(&shape(0.0), &[1.0 / 3.0; BINS], &[0.0; BINS])
                    .unwrap(),
            },
        ];
        write_feature_csv(&p, &rows).unwrap();
        assert_eq!(read_feature_csv(&p).unwrap(), rows);
    }
}
