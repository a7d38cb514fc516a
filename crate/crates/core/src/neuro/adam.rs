use super::tensor::Tensor;
use crate::scalar::lit;
use crate::{Error, Real, Result};

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Default for Adam<T> {
    fn default() -> Self {
        Self {
            beta1: lit(0.9),
            beta2: lit(0.999),
            eps: lit(1e-8),
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl<T: Real> Adam<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients; parameters are untouched on error.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], lr: T) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len()
            || self
                .m
                .iter()
                .zip(params.iter())
                .any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::Shape(
                "optimizer state does not match parameters".into(),
            ));
        }
        for (k, p) in params.iter().enumerate() {
            if let Some(i) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at tensor {k}, element {i}"
                )));
            }
        }
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.values.len() {
                let g = p.grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.values[i] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
