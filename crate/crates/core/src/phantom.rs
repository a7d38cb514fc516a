//! Synthetic CT scans: ellipsoidal kidneys with optional exophytic, endophytic or cystic lesions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::volio::{Geometry, Grid, LabelGrid, Side, VolumeGrid, BACKGROUND, CYST, KIDNEY, TUMOUR};
use crate::{Error, Result};

/// Lesion morphology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LesionKind {
    /// Tumour sphere centred on the kidney surface, deforming the contour.
    ExophyticBump,
    /// Tumour sphere inside the kidney.
    EndophyticSphere,
    /// Benign cyst sphere inside the kidney.
    Cyst,
}

impl LesionKind {
    pub fn code(self) -> u8 {
        match self {
            LesionKind::Cyst => CYST,
            _ => TUMOUR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LesionSpec {
    pub kind: LesionKind,
    pub radius_mm: f64,
    pub hu: f32,
    /// Direction from the kidney centre; need not be unit length.
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KidneyPhantom {
    pub side: Side,
    pub semi_axes_mm: [f64; 3],
    pub hu: f32,
    pub lesion: Option<LesionSpec>,
}

/// One scan at 1 mm spacing holding up to one kidney per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub kidneys: Vec<KidneyPhantom>,
    pub background_hu: f32,
    pub noise_sigma_hu: f32,
    /// Clearance around each kidney, also its distance from the midline.
    pub margin_mm: f64,
    /// Fixed scan size in voxels; sized to fit when absent.
    pub dims: Option<[usize; 3]>,
    pub seed: u64,
}

impl PhantomSpec {
    /// Single kidney, no lesion, default intensities.
    pub fn healthy(side: Side, semi_axes_mm: [f64; 3], seed: u64) -> Self {
        Self {
            kidneys: vec![KidneyPhantom {
                side,
                semi_axes_mm,
                hu: 35.0,
                lesion: None,
            }],
            background_hu: -100.0,
            noise_sigma_hu: 0.0,
            margin_mm: 6.0,
            dims: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.kidneys.is_empty() {
            return bad("phantom without kidneys".into());
        }
        if self.kidneys.len() > 2
            || (self.kidneys.len() == 2 && self.kidneys[0].side == self.kidneys[1].side)
        {
            return bad("at most one kidney per side".into());
        }
        if !(self.noise_sigma_hu >= 0.0 && self.noise_sigma_hu.is_finite())
            || !(self.margin_mm >= 0.0)
        {
            return bad("noise and margin must be finite and non-negative".into());
        }
        for k in &self.kidneys {
            if k.semi_axes_mm.iter().any(|&a| !(a > 1.0 && a.is_finite())) {
                return bad(format!("semi-axes {:?} must exceed 1 mm", k.semi_axes_mm));
            }
            if let Some(l) = &k.lesion {
                let min = k.semi_axes_mm.iter().copied().fold(f64::INFINITY, f64::min);
                if !(l.radius_mm > 0.0 && l.radius_mm < min) {
                    return bad(format!(
                        "lesion radius {} must lie in (0, {min})",
                        l.radius_mm
                    ));
                }
                if l.direction.iter().map(|d| d * d).sum::<f64>() < 1e-12
                    || l.direction.iter().any(|d| !d.is_finite())
                {
                    return bad("lesion direction must be non-zero".into());
                }
            }
        }
        Ok(())
    }
}

/// Ground truth of one lesion; volume counts labelled voxels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionTruth {
    pub kind: LesionKind,
    pub radius_mm: f64,
    pub center_mm: [f64; 3],
    pub volume_mm3: f64,
    pub max_diameter_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KidneyTruth {
    pub side: Side,
    pub center_mm: [f64; 3],
    pub semi_axes_mm: [f64; 3],
    /// Contour volume (kidney and lesion labels).
    pub contour_volume_mm3: f64,
    pub lesion: Option<LesionTruth>,
}

impl KidneyTruth {
    /// Lesion volume of any kind, cysts included; shape labels do not know the cause.
    pub fn lesion_volume_mm3(&self) -> f64 {
        self.lesion.map_or(0.0, |l| l.volume_mm3)
    }

    /// Tumour volume; cysts count as zero.
    pub fn tumour_volume_mm3(&self) -> f64 {
        self.lesion
            .filter(|l| l.kind != LesionKind::Cyst)
            .map_or(0.0, |l| l.volume_mm3)
    }

    /// Largest tumour diameter; zero without a tumour.
    pub fn tumour_diameter_mm(&self) -> f64 {
        self.lesion
            .filter(|l| l.kind != LesionKind::Cyst)
            .map_or(0.0, |l| l.max_diameter_mm)
    }
}

/// Sidecar written next to each phantom scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomManifest {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub seed: u64,
    pub kidneys: Vec<KidneyTruth>,
}

impl PhantomManifest {
    pub fn kidney(&self, side: Side) -> Option<&KidneyTruth> {
        self.kidneys.iter().find(|k| k.side == side)
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: VolumeGrid,
    pub labels: LabelGrid,
    pub manifest: PhantomManifest,
}

fn unit(d: [f64; 3]) -> [f64; 3] {
    let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    d.map(|v| v / n)
}

/// Lesion centre relative to the kidney centre.
fn lesion_offset(semi: [f64; 3], l: &LesionSpec) -> [f64; 3] {
    let u = unit(l.direction);
    match l.kind {
        LesionKind::ExophyticBump => {
            // where the ray meets the ellipsoid surface
            let t = 1.0 / (0..3).map(|a| (u[a] / semi[a]).powi(2)).sum::<f64>().sqrt();
            u.map(|v| v * t)
        }
        _ => {
            let min = semi.iter().copied().fold(f64::INFINITY, f64::min);
            u.map(|v| v * 0.5 * (min - l.radius_mm))
        }
    }
}

/// Half-extent of a kidney and its lesion along each axis.
fn reach(k: &KidneyPhantom) -> [f64; 3] {
    let extra = k
        .lesion
        .filter(|l| l.kind == LesionKind::ExophyticBump)
        .map_or(0.0, |l| l.radius_mm);
    k.semi_axes_mm.map(|a| a + extra)
}

/// Rasterises `spec` at 1 mm: kidneys sit on their side of the midline (patient-left at larger x).
pub fn phantom_generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let m = spec.margin_mm;
    let reaches: Vec<[f64; 3]> = spec.kidneys.iter().map(reach).collect();
    let max_reach = |a: usize| reaches.iter().map(|r| r[a]).fold(0.0, f64::max);
    let auto = [
        2 * (2.0 * (m + max_reach(0))).ceil() as usize + 1,
        (2.0 * (m + max_reach(1))).ceil() as usize + 1,
        (2.0 * (m + max_reach(2))).ceil() as usize + 1,
    ];
    let dims = spec.dims.unwrap_or(auto);
    let geom = Geometry::new(dims, [1.0; 3], [0.0; 3])?;
    let mid = geom.midline_x();
    let cy = (dims[1] as f64 - 1.0) / 2.0;
    let cz = (dims[2] as f64 - 1.0) / 2.0;

    let mut labels = vec![BACKGROUND; geom.len()];
    let mut hu = vec![spec.background_hu; geom.len()];
    let mut truths = Vec::with_capacity(spec.kidneys.len());
    for (k, r) in spec.kidneys.iter().zip(&reaches) {
        let offset = m + r[0];
        let cx = match k.side {
            Side::Left => mid + offset,
            Side::Right => mid - offset,
        };
        let c = [cx, cy, cz];
        let lesion = k.lesion.map(|l| {
            let o = lesion_offset(k.semi_axes_mm, &l);
            (l, [c[0] + o[0], c[1] + o[1], c[2] + o[2]])
        });
        // every sphere and ellipsoid voxel must land inside the scan
        let lo = (0..3).all(|a| c[a] - r[a] >= -0.5 && c[a] + r[a] <= dims[a] as f64 - 0.5);
        if !lo {
            return Err(Error::InvalidArgument(format!(
                "{} kidney and lesion do not fit in a {dims:?} scan",
                k.side.as_str()
            )));
        }
        let bounds: [(usize, usize); 3] = std::array::from_fn(|a| {
            (
                (c[a] - r[a]).floor().max(0.0) as usize,
                ((c[a] + r[a]).ceil() as usize).min(dims[a] - 1),
            )
        });
        let (mut contour, mut lesion_voxels) = (0usize, 0usize);
        for z in bounds[2].0..=bounds[2].1 {
            for y in bounds[1].0..=bounds[1].1 {
                for x in bounds[0].0..=bounds[0].1 {
                    let p = [x as f64, y as f64, z as f64];
                    let i = geom.index(x, y, z);
                    let e: f64 = (0..3)
                        .map(|a| ((p[a] - c[a]) / k.semi_axes_mm[a]).powi(2))
                        .sum();
                    let mut code = if e <= 1.0 { KIDNEY } else { BACKGROUND };
                    let mut v = if e <= 1.0 { k.hu } else { hu[i] };
                    if let Some((l, lc)) = &lesion {
                        let d2: f64 = (0..3).map(|a| (p[a] - lc[a]).powi(2)).sum();
                        if d2 <= l.radius_mm * l.radius_mm {
                            code = l.kind.code();
                            v = l.hu;
                            lesion_voxels += 1;
                        }
                    }
                    if code != BACKGROUND {
                        labels[i] = code;
                        hu[i] = v;
                        contour += 1;
                    }
                }
            }
        }
        truths.push(KidneyTruth {
            side: k.side,
            center_mm: c,
            semi_axes_mm: k.semi_axes_mm,
            contour_volume_mm3: contour as f64,
            lesion: lesion.map(|(l, lc)| LesionTruth {
                kind: l.kind,
                radius_mm: l.radius_mm,
                center_mm: lc,
                volume_mm3: lesion_voxels as f64,
                max_diameter_mm: 2.0 * l.radius_mm,
            }),
        });
    }
    if spec.noise_sigma_hu > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0f32, spec.noise_sigma_hu)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        hu.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    Ok(Phantom {
        volume: VolumeGrid::new(Grid::from_vec(geom, hu)?),
        labels: LabelGrid::new(Grid::from_vec(geom, labels)?)?,
        manifest: PhantomManifest {
            dims,
            spacing_mm: [1.0; 3],
            seed: spec.seed,
            kidneys: truths,
        },
    })
}

/// Recipe for a synthetic cohort; kidneys are shuffled and paired into two-kidney patients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub healthy: usize,
    pub exophytic: usize,
    pub endophytic: usize,
    pub cysts: usize,
    pub semi_axes_min_mm: [f64; 3],
    pub semi_axes_max_mm: [f64; 3],
    pub exophytic_radius_mm: (f64, f64),
    pub endophytic_radius_mm: (f64, f64),
    pub cyst_radius_mm: (f64, f64),
    pub kidney_hu: f32,
    pub exophytic_hu: f32,
    pub endophytic_hu: f32,
    pub cyst_hu: f32,
    pub background_hu: f32,
    pub noise_sigma_hu: f32,
    pub margin_mm: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            healthy: 100,
            exophytic: 50,
            endophytic: 50,
            cysts: 0,
            semi_axes_min_mm: [22.0, 20.0, 38.0],
            semi_axes_max_mm: [28.0, 25.0, 50.0],
            exophytic_radius_mm: (10.0, 19.5),
            endophytic_radius_mm: (8.0, 15.0),
            cyst_radius_mm: (6.0, 12.0),
            kidney_hu: 35.0,
            exophytic_hu: 35.0,
            endophytic_hu: 20.0,
            cyst_hu: 0.0,
            background_hu: -100.0,
            noise_sigma_hu: 10.0,
            margin_mm: 6.0,
            seed: 2024,
        }
    }
}

impl CohortSpec {
    pub fn kidney_count(&self) -> usize {
        self.healthy + self.exophytic + self.endophytic + self.cysts
    }

    /// `(patient_id, scan)` pairs; deterministic in `seed`.
    pub fn patients(&self) -> Result<Vec<(String, PhantomSpec)>> {
        let ranges = [
            self.exophytic_radius_mm,
            self.endophytic_radius_mm,
            self.cyst_radius_mm,
        ];
        if (0..3).any(|a| !(self.semi_axes_min_mm[a] <= self.semi_axes_max_mm[a]))
            || ranges.iter().any(|r| !(r.0 <= r.1 && r.0 > 0.0))
        {
            return Err(Error::InvalidArgument(
                "cohort ranges must be ordered and positive".into(),
            ));
        }
        let mut kinds: Vec<Option<LesionKind>> = Vec::with_capacity(self.kidney_count());
        kinds.extend(std::iter::repeat_n(None, self.healthy));
        kinds.extend(std::iter::repeat_n(
            Some(LesionKind::ExophyticBump),
            self.exophytic,
        ));
        kinds.extend(std::iter::repeat_n(
            Some(LesionKind::EndophyticSphere),
            self.endophytic,
        ));
        kinds.extend(std::iter::repeat_n(Some(LesionKind::Cyst), self.cysts));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        kinds.shuffle(&mut rng);
        let gauss = Normal::new(0.0, 1.0).expect("unit normal");
        let mut out = Vec::new();
        for (p, pair) in kinds.chunks(2).enumerate() {
            let mut kidneys = Vec::with_capacity(2);
            for (kind, side) in pair.iter().zip([Side::Left, Side::Right]) {
                let semi: [f64; 3] = std::array::from_fn(|a| {
                    rng.random_range(self.semi_axes_min_mm[a]..=self.semi_axes_max_mm[a])
                });
                let lesion = kind.map(|kind| {
                    let (range, hu) = match kind {
                        LesionKind::ExophyticBump => (self.exophytic_radius_mm, self.exophytic_hu),
                        LesionKind::EndophyticSphere => {
                            (self.endophytic_radius_mm, self.endophytic_hu)
                        }
                        LesionKind::Cyst => (self.cyst_radius_mm, self.cyst_hu),
                    };
                    let direction: [f64; 3] = std::array::from_fn(|_| gauss.sample(&mut rng));
                    LesionSpec {
                        kind,
                        radius_mm: rng.random_range(range.0..=range.1),
                        hu,
                        direction,
                    }
                });
                kidneys.push(KidneyPhantom {
                    side,
                    semi_axes_mm: semi,
                    hu: self.kidney_hu,
                    lesion,
                });
            }
            let spec = PhantomSpec {
                kidneys,
                background_hu: self.background_hu,
                noise_sigma_hu: self.noise_sigma_hu,
                margin_mm: self.margin_mm,
                dims: None,
                seed: rng.random(),
            };
            spec.validate()?;
            out.push((format!("p{p:03}"), spec));
        }
        Ok(out)
    }
}
