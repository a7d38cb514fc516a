//! Kidney-wise voting, fold aggregation, ROC/AUC, size strata, Dice and patient folds.

mod roc;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use roc::{roc_auc, write_roc_csv, RocCurve, RocPoint, RocSummary};

use crate::sampler::SampleKind;
use crate::volio::Mask;
use crate::{Error, Result};

/// Tiles summed per kidney.
pub const TILE_TOP_K: usize = 10;
/// Blocks kept per kidney.
pub const BLOCK_TOP_K: usize = 1;
/// Small-tumour cut-off, mm (inclusive).
pub const SMALL_TUMOUR_MM: f64 = 40.0;

/// Sum of the `k` largest sample probabilities (all of them when fewer), `k` by sample kind.
pub fn kidney_score(scores: &[f64], kind: SampleKind) -> Result<f64> {
    let k = match kind {
        SampleKind::Tile => TILE_TOP_K,
        SampleKind::Block => BLOCK_TOP_K,
    };
    top_k_sum(scores, k)
}

/// Sum of the `k` largest values.
pub fn top_k_sum(scores: &[f64], k: usize) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no samples for kidney".into()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("sample score {s}")));
    }
    let mut top: Vec<f64> = scores.to_vec();
    top.sort_by(|a, b| b.total_cmp(a));
    Ok(top.iter().take(k).sum())
}

/// Sum over exactly `k` fold outputs.
pub fn fold_sum(per_fold: &[f64], k: usize) -> Result<f64> {
    if per_fold.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} fold scores, expected {k}",
            per_fold.len()
        )));
    }
    Ok(per_fold.iter().sum())
}

/// One kidney's ground truth and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KidneyRecord {
    pub kidney_id: String,
    pub patient_id: String,
    pub cancerous: bool,
    /// 0 for healthy kidneys.
    pub tumour_max_diameter: f64,
    pub score: f64,
}

/// Records split by tumour size; healthy kidneys appear in both.
#[derive(Debug, Clone, PartialEq)]
pub struct Strata {
    pub small: Vec<KidneyRecord>,
    pub large: Vec<KidneyRecord>,
}

/// Small holds cancerous kidneys with diameter `<= cutoff_mm`.
pub fn stratify(records: &[KidneyRecord], cutoff_mm: f64) -> Strata {
    let mut s = Strata {
        small: Vec::new(),
        large: Vec::new(),
    };
    for r in records {
        if !r.cancerous {
            s.small.push(r.clone());
            s.large.push(r.clone());
        } else if r.tumour_max_diameter <= cutoff_mm {
            s.small.push(r.clone());
        } else {
            s.large.push(r.clone());
        }
    }
    s
}

/// `2|A∩B| / (|A|+|B|)`, 1 when both are empty.
pub fn dice(gt: &Mask, pred: &Mask) -> Result<f64> {
    if !gt.geometry().same_lattice(pred.geometry()) || gt.dims() != pred.dims() {
        return Err(Error::Shape("dice needs masks on the same lattice".into()));
    }
    let (mut inter, mut total) = (0usize, 0usize);
    for (&a, &b) in gt.data().iter().zip(pred.data()) {
        inter += usize::from(a && b);
        total += usize::from(a) + usize::from(b);
    }
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    })
}

/// Patient-wise fold assignment: sorted ids, seeded shuffle, round-robin.
pub fn make_folds(patient_ids: &[String], k: usize, seed: u64) -> Result<BTreeMap<String, usize>> {
    let mut ids: Vec<&String> = patient_ids.iter().collect();
    ids.sort();
    ids.dedup();
    if k == 0 || ids.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} patients cannot fill {k} folds",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i % k))
        .collect())
}
