//! Pipeline configuration: one TOML file with a section per stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::ShapeTrainConfig;
use crate::eval::{BLOCK_TOP_K, SMALL_TUMOUR_MM, TILE_TOP_K};
use crate::features::FeatureParams;
use crate::phantom::CohortSpec;
use crate::sampler::{SampleKind, SamplerParams, ScorerTraining};
use crate::{Error, Result};

/// Which branches `run-all` executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSelection {
    pub shape: bool,
    pub sampling: bool,
}

impl Default for StageSelection {
    fn default() -> Self {
        Self {
            shape: true,
            sampling: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Every artifact lives under this directory.
    pub out_dir: PathBuf,
    pub stages: StageSelection,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("run"),
            stages: StageSelection::default(),
        }
    }
}

/// Patient split: a held-out test set plus k-fold cross-validation on the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub folds: usize,
    /// Fraction of patients held out for testing.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            folds: 5,
            test_fraction: 0.3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub tile_top_k: usize,
    pub block_top_k: usize,
    /// Tumours up to this diameter (inclusive) form the small stratum.
    pub small_tumour_mm: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            tile_top_k: TILE_TOP_K,
            block_top_k: BLOCK_TOP_K,
            small_tumour_mm: SMALL_TUMOUR_MM,
        }
    }
}

impl EvalSection {
    pub fn top_k(&self, kind: SampleKind) -> usize {
        match kind {
            SampleKind::Tile => self.tile_top_k,
            SampleKind::Block => self.block_top_k,
        }
    }
}

/// Sample kinds the sampling branch generates and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub kinds: Vec<SampleKind>,
    pub params: SamplerParams,
    pub scorer: ScorerTraining,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            kinds: vec![SampleKind::Tile, SampleKind::Block],
            params: SamplerParams::default(),
            scorer: ScorerTraining::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub run: RunSection,
    pub phantom: CohortSpec,
    pub features: FeatureParams,
    pub shape: ShapeTrainConfig,
    pub split: SplitSection,
    pub sampling: SamplingSection,
    pub eval: EvalSection,
}

/// Where a default comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// The value used by the published method.
    Published,
    /// A choice of this implementation.
    Implementation,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Published => "published value",
            Origin::Implementation => "implementation choice",
        }
    }
}

/// Surface lattice of [`PipelineConfig::desk_scale`], mm.
pub const DESK_REMESH_VOXEL_MM: f64 = 7.0;

/// Keys whose defaults are the values of the published method.
const PUBLISHED: &[&str] = &[
    "features.surface.remesh_voxel",
    "features.surface.smooth_factor",
    "features.surface.smooth_iterations",
    "shape.mlp_epochs",
    "shape.mlp_lr",
    "shape.gnn_epochs",
    "shape.gnn_lr",
    "shape.frozen_epochs",
    "shape.joint_epochs",
    "shape.ensemble_lr",
    "shape.batch_size",
    "shape.label_thresholds.gnn_mm3",
    "shape.label_thresholds.mlp_mm3",
    "shape.label_thresholds.ensemble_mm3",
    "split.folds",
    "sampling.params.spacing_mm",
    "sampling.params.hu_clip",
    "sampling.params.hu_scale",
    "sampling.params.mask_dilation_mm",
    "sampling.params.tile_step_mm",
    "sampling.params.block_step_mm",
    "sampling.params.sliding_spacing_mm",
    "sampling.params.cap_per_class",
    "sampling.params.cancer_radius_mm",
    "sampling.params.kidney_radius_mm",
    "sampling.scorer.pretrain_lr_min",
    "sampling.scorer.pretrain_lr_max",
    "sampling.scorer.pretrain_decay",
    "sampling.scorer.finetune_lr_min",
    "sampling.scorer.finetune_lr_max",
    "sampling.scorer.finetune_decay",
    "eval.tile_top_k",
    "eval.block_top_k",
    "eval.small_tumour_mm",
];

impl PipelineConfig {
    /// Defaults with a coarser surface lattice, which keeps graph training on phantom
    /// cohorts within minutes on one core.
    pub fn desk_scale() -> Self {
        let mut c = Self::default();
        c.features.surface.remesh_voxel = DESK_REMESH_VOXEL_MM;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.split.folds < 2 {
            return bad("split.folds must be at least 2");
        }
        if !(0.0..1.0).contains(&self.split.test_fraction) {
            return bad("split.test_fraction must lie in [0, 1)");
        }
        let s = &self.features.surface;
        if !(s.remesh_voxel > 0.0 && s.smooth_factor >= 0.0 && s.smooth_factor <= 1.0) {
            return bad("features.surface needs remesh_voxel > 0 and smooth_factor in [0, 1]");
        }
        let sh = &self.shape;
        if sh.batch_size == 0 || !(sh.mlp_lr > 0.0 && sh.gnn_lr > 0.0 && sh.ensemble_lr > 0.0) {
            return bad("shape needs a positive batch size and learning rates");
        }
        let p = &self.sampling.params;
        if !(p.spacing_mm > 0.0
            && p.hu_scale > 0.0
            && p.hu_clip.0 < p.hu_clip.1
            && p.sliding_spacing_mm > 0.0)
        {
            return bad(
                "sampling.params needs positive spacing and scale and an ordered clip range",
            );
        }
        if self.eval.tile_top_k == 0 || self.eval.block_top_k == 0 {
            return bad("eval top-k must be positive");
        }
        self.sampling
            .scorer
            .pretrain_schedule()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.sampling
            .scorer
            .finetune_schedule()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Every scalar key of this configuration with its value and the origin of its default.
    pub fn dump(&self) -> Result<Vec<(String, String, Origin)>> {
        let value = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        Ok(out
            .into_iter()
            .map(|(k, v)| {
                let origin = if PUBLISHED.contains(&k.as_str()) {
                    Origin::Published
                } else {
                    Origin::Implementation
                };
                (k, v, origin)
            })
            .collect())
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
