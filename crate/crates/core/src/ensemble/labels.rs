use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector28;
use crate::mesher::KidneyGraph;
use crate::{Error, Result};

/// Lesion volume above which graph and ensemble labels are positive, mm³.
pub const GNN_THRESHOLD_MM3: f64 = 500.0;
/// Lesion volume above which the MLP label is positive, mm³.
pub const MLP_THRESHOLD_MM3: f64 = 20000.0;

/// Per-mode lesion volume thresholds, mm³; labels are positive strictly above them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelThresholds {
    pub gnn_mm3: f64,
    pub mlp_mm3: f64,
    pub ensemble_mm3: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self {
            gnn_mm3: GNN_THRESHOLD_MM3,
            mlp_mm3: MLP_THRESHOLD_MM3,
            ensemble_mm3: GNN_THRESHOLD_MM3,
        }
    }
}

impl LabelThresholds {
    pub fn get(&self, mode: LabelMode) -> f64 {
        match mode {
            LabelMode::Gnn => self.gnn_mm3,
            LabelMode::Mlp => self.mlp_mm3,
            LabelMode::Ensemble => self.ensemble_mm3,
        }
    }
}

/// Which model a label is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    Gnn,
    Mlp,
    Ensemble,
}

impl LabelMode {
    pub fn threshold_mm3(self) -> f64 {
        match self {
            LabelMode::Mlp => MLP_THRESHOLD_MM3,
            LabelMode::Gnn | LabelMode::Ensemble => GNN_THRESHOLD_MM3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelMode::Gnn => "gnn",
            LabelMode::Mlp => "mlp",
            LabelMode::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnn" => Ok(LabelMode::Gnn),
            "mlp" => Ok(LabelMode::Mlp),
            "ensemble" => Ok(LabelMode::Ensemble),
            _ => Err(Error::InvalidArgument(format!("unknown label mode {s:?}"))),
        }
    }
}

/// 1 when `lesion_volume` strictly exceeds the mode's threshold.
pub fn assign_label(lesion_volume: f64, mode: LabelMode) -> u8 {
    u8::from(lesion_volume > mode.threshold_mm3())
}

/// One kidney's shape inputs and lesion ground truth.
#[derive(Debug, Clone)]
pub struct LabeledShapeRecord {
    pub kidney_id: String,
    pub patient_id: String,
    pub features: FeatureVector28,
    pub graph: KidneyGraph<f64>,
    /// Largest cancer-or-cyst volume within the contour, mm³.
    pub lesion_volume: f64,
}

impl LabeledShapeRecord {
    pub fn label(&self, mode: LabelMode) -> u8 {
        assign_label(self.lesion_volume, mode)
    }

    pub fn label_with(&self, mode: LabelMode, thresholds: &LabelThresholds) -> u8 {
        u8::from(self.lesion_volume > thresholds.get(mode))
    }
}

/// Labels for a record set.
pub fn assign_labels(records: &[LabeledShapeRecord], mode: LabelMode) -> Vec<u8> {
    records.iter().map(|r| r.label(mode)).collect()
}
