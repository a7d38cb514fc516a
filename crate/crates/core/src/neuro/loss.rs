use crate::{Error, Real, Result};

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `−log softmax(logits)[label]` and its gradient `softmax − one_hot`.
pub fn softmax_xent<T: Real>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if logits.len() < 2 {
        return Err(Error::Shape(format!(
            "cross-entropy needs at least 2 classes, got {}",
            logits.len()
        )));
    }
    if label >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} for {} classes",
            logits.len()
        )));
    }
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln() + m;
    let loss = lse - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= T::one();
    Ok((loss, grad))
}
