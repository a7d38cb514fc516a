use rand::Rng;

use super::tensor::{axpy, dot, Mat, Tensor};
use crate::{Error, Real, Result};

/// `y = W x + b` with `W` of shape `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: Tensor::glorot(&[n_out, n_in], n_in, n_out, rng),
            bias: Tensor::zeros(&[n_out]),
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.shape.len() != 2 || bias.shape != [weight.shape[0]] {
            return Err(Error::Shape(format!(
                "dense weight {:?} with bias {:?}",
                weight.shape, bias.shape
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn n_in(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn n_out(&self) -> usize {
        self.weight.shape[0]
    }

    /// Applies the layer to every row of `x`.
    pub fn forward(&self, x: &Mat<T>) -> Result<Mat<T>> {
        let (n_in, n_out) = (self.n_in(), self.n_out());
        if x.cols != n_in {
            return Err(Error::Shape(format!(
                "dense expects {n_in} inputs, got {}",
                x.cols
            )));
        }
        let mut y = Mat::zeros(x.rows, n_out);
        for r in 0..x.rows {
            let xr = x.row(r);
            for (o, yo) in y.row_mut(r).iter_mut().enumerate() {
                *yo = dot(&self.weight.values[o * n_in..(o + 1) * n_in], xr) + self.bias.values[o];
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &Mat<T>, dy: &Mat<T>) -> Mat<T> {
        let n_in = self.n_in();
        let mut dx = Mat::zeros(x.rows, n_in);
        for r in 0..x.rows {
            let (xr, dyr) = (x.row(r), dy.row(r));
            for (o, &g) in dyr.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                axpy(&mut self.weight.grad[o * n_in..(o + 1) * n_in], g, xr);
                self.bias.grad[o] += g;
                axpy(
                    dx.row_mut(r),
                    g,
                    &self.weight.values[o * n_in..(o + 1) * n_in],
                );
            }
        }
        dx
    }

    pub fn params(&self) -> [&Tensor<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// Elementwise rectifier.
pub fn relu<T: Real>(x: &Mat<T>) -> Mat<T> {
    Mat {
        rows: x.rows,
        cols: x.cols,
        data: x.data.iter().map(|&v| v.max(T::zero())).collect(),
    }
}

/// Gradient through [`relu`] given its input.
pub fn relu_backward<T: Real>(x: &Mat<T>, dy: &Mat<T>) -> Mat<T> {
    let data = x
        .data
        .iter()
        .zip(&dy.data)
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Mat {
        rows: x.rows,
        cols: x.cols,
        data,
    }
}

/// Column means, as a single row.
pub fn mean_pool<T: Real>(x: &Mat<T>) -> Result<Mat<T>> {
    if x.rows == 0 {
        return Err(Error::Shape("mean pool over zero rows".into()));
    }
    let mut out = Mat::zeros(1, x.cols);
    for r in 0..x.rows {
        axpy(&mut out.data, T::one(), x.row(r));
    }
    let n = T::from_usize(x.rows).expect("row count");
    out.data.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Gradient through [`mean_pool`] for an input with `rows` rows.
pub fn mean_pool_backward<T: Real>(rows: usize, dy: &Mat<T>) -> Mat<T> {
    let n = T::from_usize(rows).expect("row count");
    let g: Vec<T> = dy.data.iter().map(|&v| v / n).collect();
    let mut out = Mat::zeros(rows, dy.cols);
    for r in 0..rows {
        out.row_mut(r).copy_from_slice(&g);
    }
    out
}
