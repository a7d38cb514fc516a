use crate::scalar::{lit, to_f64};
use crate::Real;

/// Central-difference step used by the checks.
pub const FD_STEP: f64 = 1e-4;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient<T: Real>(mut f: impl FnMut(&[T]) -> T, x: &[T], h: f64) -> Vec<T> {
    let mut p = x.to_vec();
    let h_t: T = lit(h);
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h_t;
            let up = f(&p);
            p[i] = x[i] - h_t;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (h_t + h_t)
        })
        .collect()
}

/// Largest `|a − n| / max(|a|, |n|)`; pairs with both magnitudes below `floor` count as equal.
pub fn max_relative_error<T: Real>(analytic: &[T], numeric: &[T], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let (a, n) = (to_f64(a), to_f64(n));
            let scale = a.abs().max(n.abs());
            if scale < floor {
                0.0
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Max relative error of `analytic` against central differences of `f` at `x`.
pub fn gradient_check<T: Real>(f: impl FnMut(&[T]) -> T, x: &[T], analytic: &[T]) -> f64 {
    let numeric = numeric_gradient(f, x, FD_STEP);
    max_relative_error(analytic, &numeric, 1e-7)
}
