use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Warm-up length in epochs.
pub const WARMUP_EPOCHS: u32 = 15;

/// Linear ascent over 15 epochs, then exponential decay reaching 0 at `k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub lr_min: f64,
    pub lr_max: f64,
    pub a: f64,
    pub k_max: u32,
}

impl Schedule {
    pub fn new(lr_min: f64, lr_max: f64, a: f64, k_max: u32) -> Result<Self> {
        if !(lr_min > 0.0 && lr_max >= lr_min && a > 0.0 && k_max > WARMUP_EPOCHS + 1) {
            return Err(Error::InvalidArgument(format!(
                "schedule needs lr_max >= lr_min > 0, a > 0, k_max > 16 (got {lr_min}, {lr_max}, {a}, {k_max})"
            )));
        }
        Ok(Self {
            lr_min,
            lr_max,
            a,
            k_max,
        })
    }

    /// Pretraining schedule: 1e-4 rising to 4e-3, a = 4.
    pub fn pretraining(k_max: u32) -> Result<Self> {
        Self::new(1e-4, 4e-3, 4.0, k_max)
    }

    /// Fine-tuning schedule: 1e-4 rising to 5e-4, a = 3.
    pub fn fine_tuning(k_max: u32) -> Result<Self> {
        Self::new(1e-4, 5e-4, 3.0, k_max)
    }

    /// Rate at 1-based epoch `k`.
    pub fn lr_at(&self, k: u32) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return Err(Error::InvalidArgument(format!(
                "epoch {k} outside 1..={}",
                self.k_max
            )));
        }
        Ok(if k <= WARMUP_EPOCHS {
            self.lr_max * (f64::from(k - 1) / f64::from(WARMUP_EPOCHS)) + self.lr_min
        } else if k == self.k_max {
            0.0
        } else {
            self.lr_max * (-self.a * f64::from(k - 16) / f64::from(self.k_max - k)).exp()
        })
    }
}
