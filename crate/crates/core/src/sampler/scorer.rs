use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::patch::{extract_patch, Footprint};
use super::{Preprocessed, SampleLabel, SampleScore, SampleSpec};
use crate::neuro::{
    load_weights, relu, relu_backward, save_weights, softmax, softmax_xent, Adam, Dense, Mat,
    Schedule, Tensor,
};
use crate::{Error, Result};

/// Mean, standard deviation and nine deciles.
pub const SCORER_FEATURES: usize = 11;
const HIDDEN: usize = 16;

/// Anything that maps a sample to class probabilities `(cancerous, normal_kidney, none)`.
pub trait SampleScorer {
    fn score(&self, pre: &Preprocessed, spec: &SampleSpec) -> Result<SampleScore>;
}

/// Intensity summary of the sample voxels inside the sampling region; zeros when none are.
pub fn patch_features(pre: &Preprocessed, spec: &SampleSpec) -> [f64; SCORER_FEATURES] {
    let fp = Footprint::of(pre.volume.geometry(), spec);
    let vals = extract_patch(&pre.volume.grid, &fp, 0.0f32);
    let keep = extract_patch(&pre.region, &fp, false);
    let mut v: Vec<f64> = vals
        .data
        .iter()
        .zip(&keep.data)
        .filter(|(_, &k)| k)
        .map(|(&x, _)| f64::from(x))
        .collect();
    intensity_summary(&mut v)
}

/// Mean, population standard deviation and the nine deciles (linear interpolation).
fn intensity_summary(v: &mut [f64]) -> [f64; SCORER_FEATURES] {
    let mut out = [0.0; SCORER_FEATURES];
    if v.is_empty() {
        return out;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    out[0] = mean;
    out[1] = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    // selection instead of a full sort; each pass narrows the slice
    let last = v.len() - 1;
    let mut ranks: Vec<usize> = (1..10)
        .flat_map(|q| {
            let i = (q as f64 / 10.0 * last as f64).floor() as usize;
            [i, (i + 1).min(last)]
        })
        .collect();
    ranks.sort_unstable();
    ranks.dedup();
    let mut start = 0;
    for &r in &ranks {
        v[start..].select_nth_unstable_by(r - start, f64::total_cmp);
        start = r + 1;
    }
    for q in 1..10 {
        let pos = q as f64 / 10.0 * last as f64;
        let (i, t) = (pos.floor() as usize, pos.fract());
        out[1 + q] = v[i] + t * (v[(i + 1).min(last)] - v[i]);
    }
    out
}

/// Two-stage training of the reference scorer; each stage follows the warm-up/decay
/// schedule with `k_max = epochs + 1`, so every epoch has a positive rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerTraining {
    pub pretrain_epochs: u32,
    pub pretrain_lr_min: f64,
    pub pretrain_lr_max: f64,
    pub pretrain_decay: f64,
    pub finetune_epochs: u32,
    pub finetune_lr_min: f64,
    pub finetune_lr_max: f64,
    pub finetune_decay: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for ScorerTraining {
    fn default() -> Self {
        let (p, f) = (
            Schedule::pretraining(17).expect("valid"),
            Schedule::fine_tuning(17).expect("valid"),
        );
        Self {
            pretrain_epochs: 20,
            pretrain_lr_min: p.lr_min,
            pretrain_lr_max: p.lr_max,
            pretrain_decay: p.a,
            finetune_epochs: 20,
            finetune_lr_min: f.lr_min,
            finetune_lr_max: f.lr_max,
            finetune_decay: f.a,
            batch: 16,
            seed: 5,
        }
    }
}

impl ScorerTraining {
    pub fn pretrain_schedule(&self) -> Result<Schedule> {
        Schedule::new(
            self.pretrain_lr_min,
            self.pretrain_lr_max,
            self.pretrain_decay,
            self.pretrain_epochs + 1,
        )
    }

    pub fn finetune_schedule(&self) -> Result<Schedule> {
        Schedule::new(
            self.finetune_lr_min,
            self.finetune_lr_max,
            self.finetune_decay,
            self.finetune_epochs + 1,
        )
    }
}

/// Small dense classifier on [`patch_features`], standing in for a trained image network.
#[derive(Debug, Clone)]
pub struct ReferenceScorer {
    mean: [f64; SCORER_FEATURES],
    scale: [f64; SCORER_FEATURES],
    fc1: Dense<f64>,
    fc2: Dense<f64>,
}

impl ReferenceScorer {
    /// Pretrains on `pretrain`, then fine-tunes on `finetune`; rows are features and labels.
    pub fn train(
        pretrain: &[([f64; SCORER_FEATURES], SampleLabel)],
        finetune: &[([f64; SCORER_FEATURES], SampleLabel)],
        cfg: &ScorerTraining,
    ) -> Result<Self> {
        let all: Vec<&[f64; SCORER_FEATURES]> =
            pretrain.iter().chain(finetune).map(|(f, _)| f).collect();
        if all.is_empty() {
            return Err(Error::Training("no samples to train the scorer".into()));
        }
        let n = all.len() as f64;
        let mut mean = [0.0; SCORER_FEATURES];
        let mut scale = [1.0; SCORER_FEATURES];
        for j in 0..SCORER_FEATURES {
            mean[j] = all.iter().map(|f| f[j]).sum::<f64>() / n;
            let sd = (all.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            scale[j] = if sd > 1e-12 { sd } else { 1.0 };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut s = Self {
            mean,
            scale,
            fc1: Dense::new(SCORER_FEATURES, HIDDEN, &mut rng),
            fc2: Dense::new(HIDDEN, 3, &mut rng),
        };
        s.fit(pretrain, &cfg.pretrain_schedule()?, cfg.batch, &mut rng)?;
        s.fit(finetune, &cfg.finetune_schedule()?, cfg.batch, &mut rng)?;
        Ok(s)
    }

    fn input(&self, f: &[f64; SCORER_FEATURES]) -> [f64; SCORER_FEATURES] {
        std::array::from_fn(|j| (f[j] - self.mean[j]) / self.scale[j])
    }

    fn fit(
        &mut self,
        rows: &[([f64; SCORER_FEATURES], SampleLabel)],
        schedule: &Schedule,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let mut opt = Adam::new();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for epoch in 1..schedule.k_max {
            let lr = schedule.lr_at(epoch)?;
            order.shuffle(rng);
            for chunk in order.chunks(batch.max(1)) {
                let x = Mat::from_rows(
                    &chunk
                        .iter()
                        .map(|&i| self.input(&rows[i].0))
                        .collect::<Vec<_>>(),
                )?;
                let h = self.fc1.forward(&x)?;
                let a = relu(&h);
                let logits = self.fc2.forward(&a)?;
                let mut dlogits = Mat::zeros(chunk.len(), 3);
                for (r, &i) in chunk.iter().enumerate() {
                    let (_, g) = softmax_xent(logits.row(r), rows[i].1.index())?;
                    for (d, v) in dlogits.row_mut(r).iter_mut().zip(g) {
                        *d = v / chunk.len() as f64;
                    }
                }
                let da = self.fc2.backward(&a, &dlogits);
                self.fc1.backward(&x, &relu_backward(&h, &da));
                opt.step(&mut self.params_mut(), lr)?;
                self.params_mut().into_iter().for_each(|p| p.zero_grad());
            }
        }
        Ok(())
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        let [a, b] = self.fc1.params_mut();
        let [c, d] = self.fc2.params_mut();
        vec![a, b, c, d]
    }

    /// Class probabilities for a feature row.
    pub fn probabilities(&self, f: &[f64; SCORER_FEATURES]) -> Result<[f64; 3]> {
        let x = Mat::from_rows(&[self.input(f)])?;
        let logits = self.fc2.forward(&relu(&self.fc1.forward(&x)?))?;
        let p = softmax(logits.row(0));
        Ok([p[0], p[1], p[2]])
    }

    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let mean = Tensor::from_vec(&[SCORER_FEATURES], self.mean.to_vec())?;
        let scale = Tensor::from_vec(&[SCORER_FEATURES], self.scale.to_vec())?;
        let [w1, b1] = self.fc1.params();
        let [w2, b2] = self.fc2.params();
        let named: Vec<(String, &Tensor<f64>)> = [
            ("input.mean", &mean),
            ("input.scale", &scale),
            ("fc1.weight", w1),
            ("fc1.bias", b1),
            ("fc2.weight", w2),
            ("fc2.bias", b2),
        ]
        .into_iter()
        .map(|(n, t)| (n.to_string(), t))
        .collect();
        save_weights(path, "sample_scorer", seed, &named)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (_, tensors) = load_weights::<f64>(path)?;
        let get = |name: &str, shape: &[usize]| -> Result<Tensor<f64>> {
            let i = tensors
                .iter()
                .position(|(n, t)| n == name && t.shape == shape)
                .ok_or_else(|| Error::Format(format!("scorer weights lack {name} {shape:?}")))?;
            Ok(tensors[i].1.clone())
        };
        let mean = get("input.mean", &[SCORER_FEATURES])?;
        let scale = get("input.scale", &[SCORER_FEATURES])?;
        let fc1 = Dense::from_parts(
            get("fc1.weight", &[HIDDEN, SCORER_FEATURES])?,
            get("fc1.bias", &[HIDDEN])?,
        )?;
        let fc2 = Dense::from_parts(get("fc2.weight", &[3, HIDDEN])?, get("fc2.bias", &[3])?)?;
        Ok(Self {
            mean: mean.values.try_into().expect("checked shape"),
            scale: scale.values.try_into().expect("checked shape"),
            fc1,
            fc2,
        })
    }
}

impl SampleScorer for ReferenceScorer {
    fn score(&self, pre: &Preprocessed, spec: &SampleSpec) -> Result<SampleScore> {
        Ok(SampleScore {
            probabilities: self.probabilities(&patch_features(pre, spec))?,
        })
    }
}
