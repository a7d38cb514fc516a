use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scalar::to_f64;
use crate::{Error, Real, Result};

/// Operating point: scores `>= threshold` are called positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint<T> {
    pub threshold: T,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Threshold sweep from strictest to loosest plus the Mann–Whitney area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve<T> {
    /// Starts at (+inf, 0, 1) and ends at (min score, 1, 0).
    pub points: Vec<RocPoint<T>>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// Sweeps every unique score; ties earn half credit in the area.
pub fn roc_auc<T: Real>(scores: &[T], truth: &[bool]) -> Result<RocCurve<T>> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    let p = truth.iter().filter(|&&t| t).count();
    let n = truth.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::InvalidArgument("ROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut points = vec![RocPoint {
        threshold: T::infinity(),
        sensitivity: 0.0,
        specificity: 1.0,
    }];
    // twice the Mann–Whitney U, kept integral
    let (mut tp, mut fp, mut twice_u) = (0u128, 0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut gp, mut gn) = (0u128, 0u128);
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        // positives in this group beat the negatives still below it, tie with the group's negatives
        let below = n as u128 - fp - gn;
        twice_u += 2 * gp * below + gp * gn;
        tp += gp;
        fp += gn;
        points.push(RocPoint {
            threshold: s,
            sensitivity: tp as f64 / p as f64,
            specificity: 1.0 - fp as f64 / n as f64,
        });
    }
    let auc = twice_u as f64 / (2 * p as u128 * n as u128) as f64;
    Ok(RocCurve {
        points,
        auc,
        positives: p,
        negatives: n,
    })
}

impl<T: Real> RocCurve<T> {
    /// Area by the trapezoid rule over the curve points.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let (x0, x1) = (1.0 - w[0].specificity, 1.0 - w[1].specificity);
                (x1 - x0) * (w[0].sensitivity + w[1].sensitivity) / 2.0
            })
            .sum()
    }

    /// Point maximising sensitivity + specificity; earliest on ties.
    pub fn youden_point(&self) -> RocPoint<T> {
        let mut best = self.points[0];
        for &pt in &self.points[1..] {
            if pt.sensitivity + pt.specificity > best.sensitivity + best.specificity {
                best = pt;
            }
        }
        best
    }

    pub fn summary(&self, model: &str, stratum: &str) -> RocSummary {
        let op = self.youden_point();
        RocSummary {
            model: model.into(),
            stratum: stratum.into(),
            auc: self.auc,
            positives: self.positives,
            negatives: self.negatives,
            threshold: to_f64(op.threshold),
            sensitivity: op.sensitivity,
            specificity: op.specificity,
        }
    }
}

/// Headline numbers of one curve at the Youden operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    pub model: String,
    pub stratum: String,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// `threshold,sensitivity,specificity` rows.
pub fn write_roc_csv<T: Real>(path: impl AsRef<Path>, curve: &RocCurve<T>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "threshold,sensitivity,specificity").expect("write to vec");
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{}",
            to_f64(p.threshold),
            p.sensitivity,
            p.specificity
        )
        .expect("write to vec");
    }
    crate::volio::write_atomic(path.as_ref(), &out)
}
