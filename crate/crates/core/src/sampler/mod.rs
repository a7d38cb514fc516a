//! Axial tile/block extraction, sample labeling and a reference sample scorer.

mod generate;
mod patch;
mod scorer;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use generate::{
    cap_per_class, centralised_samples, label_sample, sliding_grid, sliding_samples, ClassCounts,
    SamplerParams,
};
pub use patch::{extract_patch, inscribed_radius_mm, Footprint, Patch};
pub use scorer::{patch_features, ReferenceScorer, SampleScorer, ScorerTraining, SCORER_FEATURES};

use crate::volio::{clip_normalize_with, dilate, Interp, LabelGrid, Mask, Resample, VolumeGrid};
use crate::{Error, Result};

/// In-plane sample size, voxels at 1 mm.
pub const SAMPLE_SIDE: usize = 224;
/// Block depth, slices at 1 mm.
pub const BLOCK_DEPTH: usize = 20;

/// Axial sample geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    /// 1×224×224.
    Tile,
    /// 20×224×224.
    Block,
}

impl SampleKind {
    /// Slices in the footprint.
    pub fn depth(self) -> usize {
        match self {
            SampleKind::Tile => 1,
            SampleKind::Block => BLOCK_DEPTH,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Tile => "tile",
            SampleKind::Block => "block",
        }
    }
}

/// How a sample centre was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Centralised,
    Sliding,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Centralised => "centralised",
            Scheme::Sliding => "sliding",
        }
    }
}

/// Sample class; the index matches the order of score triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLabel {
    Cancerous,
    NormalKidney,
    None,
}

impl SampleLabel {
    pub const ALL: [SampleLabel; 3] = [
        SampleLabel::Cancerous,
        SampleLabel::NormalKidney,
        SampleLabel::None,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SampleLabel::Cancerous => "cancerous",
            SampleLabel::NormalKidney => "normal_kidney",
            SampleLabel::None => "none",
        }
    }
}

impl fmt::Display for SampleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! parse_by_name {
    ($t:ty, $($v:expr),+) => {
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                $(if s == $v.as_str() { return Ok($v); })+
                Err(Error::Format(format!("unknown {} {s:?}", stringify!($t))))
            }
        }
    };
}

parse_by_name!(SampleKind, SampleKind::Tile, SampleKind::Block);
parse_by_name!(Scheme, Scheme::Centralised, Scheme::Sliding);
parse_by_name!(
    SampleLabel,
    SampleLabel::Cancerous,
    SampleLabel::NormalKidney,
    SampleLabel::None
);

/// One axial sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub scan_id: String,
    pub kidney_id: String,
    pub kind: SampleKind,
    pub scheme: Scheme,
    /// Centre in mm; lies on a voxel centre of the 1 mm lattice.
    pub center: [f64; 3],
    pub label: SampleLabel,
}

/// Class probabilities `(cancerous, normal_kidney, none)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub probabilities: [f64; 3],
}

impl SampleScore {
    pub fn cancer(&self) -> f64 {
        self.probabilities[0]
    }
}

/// A scan on the 1 mm lattice, normalised and masked, with its labels and sampling region.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub volume: VolumeGrid,
    pub labels: LabelGrid,
    /// Contour dilated by the masking radius.
    pub region: Mask,
}

/// Resample to `spacing`, clip and scale, then zero everything outside the dilated contour.
pub fn preprocess(
    volume: &VolumeGrid,
    labels: &LabelGrid,
    params: &SamplerParams,
) -> Result<Preprocessed> {
    if !volume.geometry().same_lattice(labels.geometry())
        || volume.geometry().dims != labels.geometry().dims
    {
        return Err(Error::Shape(
            "volume and labels must share a lattice".into(),
        ));
    }
    if labels.binarize().count() == 0 {
        return Err(Error::NoKidney);
    }
    let target = [params.spacing_mm; 3];
    let vol = volume.resample(target, Interp::Trilinear)?;
    let labels = labels.resample(target, Interp::Nearest)?;
    let mut vol = clip_normalize_with(&vol, params.hu_clip, params.hu_scale)?;
    let region = dilate(&labels.binarize(), params.mask_dilation_mm)?;
    for (v, &keep) in vol.grid.data_mut().iter_mut().zip(region.data()) {
        if !keep {
            *v = 0.0;
        }
    }
    Ok(Preprocessed {
        volume: vol,
        labels,
        region,
    })
}

/// `scan_id,kidney_id,kind,scheme,x,y,z,label`.
pub fn write_sample_csv(path: impl AsRef<Path>, samples: &[SampleSpec]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "scan_id,kidney_id,kind,scheme,x,y,z,label").expect("write to vec");
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.scan_id,
            s.kidney_id,
            s.kind.as_str(),
            s.scheme.as_str(),
            s.center[0],
            s.center[1],
            s.center[2],
            s.label
        )
        .expect("write to vec");
    }
    crate::volio::write_atomic(path.as_ref(), &out)
}

pub fn read_sample_csv(path: impl AsRef<Path>) -> Result<Vec<SampleSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            if c.len() != 8 {
                return Err(Error::Format(format!("sample row has {} columns", c.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad coordinate {s:?}")))
            };
            Ok(SampleSpec {
                scan_id: c[0].into(),
                kidney_id: c[1].into(),
                kind: c[2].parse()?,
                scheme: c[3].parse()?,
                center: [num(c[4])?, num(c[5])?, num(c[6])?],
                label: c[7].parse()?,
            })
        })
        .collect()
}

/// `index,scan_id,kidney_id,kind,p_cancerous,p_normal_kidney,p_none`, rows aligned with `samples`.
pub fn write_score_csv(
    path: impl AsRef<Path>,
    samples: &[SampleSpec],
    scores: &[SampleScore],
) -> Result<()> {
    if samples.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} samples",
            scores.len(),
            samples.len()
        )));
    }
    let mut out = Vec::new();
    writeln!(
        out,
        "index,scan_id,kidney_id,kind,p_cancerous,p_normal_kidney,p_none"
    )
    .expect("write to vec");
    for (i, (s, p)) in samples.iter().zip(scores).enumerate() {
        let [a, b, c] = p.probabilities;
        writeln!(
            out,
            "{i},{},{},{},{a},{b},{c}",
            s.scan_id,
            s.kidney_id,
            s.kind.as_str()
        )
        .expect("write to vec");
    }
    crate::volio::write_atomic(path.as_ref(), &out)
}

/// One row of a score CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub scan_id: String,
    pub kidney_id: String,
    pub kind: SampleKind,
    pub score: SampleScore,
}

/// Reads a file written by [`write_score_csv`].
pub fn read_score_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            if c.len() != 7 {
                return Err(Error::Format(format!("score row has {} columns", c.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad probability {s:?}")))
            };
            Ok(ScoreRow {
                scan_id: c[1].into(),
                kidney_id: c[2].into(),
                kind: c[3].parse()?,
                score: SampleScore {
                    probabilities: [num(c[4])?, num(c[5])?, num(c[6])?],
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
