use rand::Rng;

use super::tensor::{axpy, dot, Mat, Tensor};
use crate::mesher::Adjacency;
use crate::scalar::lit;
use crate::{Error, Real, Result};

/// `L̃ = L_sym − I = −D^{-1/2} A D^{-1/2}` (λ_max = 2), stored sparse.
///
/// Isolated nodes get an all-zero row.
#[derive(Debug, Clone)]
pub struct ScaledLaplacian<T> {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> ScaledLaplacian<T> {
    pub fn new(adj: &Adjacency) -> Self {
        let n = adj.len();
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| match adj.degree(i) {
                0 => 0.0,
                d => 1.0 / (d as f64).sqrt(),
            })
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        offsets.push(0);
        for i in 0..n {
            for &j in adj.neighbors(i) {
                cols.push(j);
                vals.push(lit(-inv_sqrt[i] * inv_sqrt[j]));
            }
            offsets.push(cols.len());
        }
        Self {
            offsets,
            cols,
            vals,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `L̃ X`; symmetric, so this is also the transpose product.
    pub fn apply(&self, x: &Mat<T>) -> Result<Mat<T>> {
        if x.rows != self.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                x.rows,
                self.len()
            )));
        }
        let mut y = Mat::zeros(x.rows, x.cols);
        for i in 0..self.len() {
            let row = y.row_mut(i);
            for k in self.offsets[i]..self.offsets[i + 1] {
                axpy(row, self.vals[k], x.row(self.cols[k]));
            }
        }
        Ok(y)
    }
}

/// Order-2 Chebyshev graph convolution `Y = X W₀ + (L̃ X) W₁ + b`, weights `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebConv<T> {
    pub w0: Tensor<T>,
    pub w1: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Values kept from the forward pass.
#[derive(Debug, Clone)]
pub struct ChebCache<T> {
    x: Mat<T>,
    lx: Mat<T>,
}

impl<T: Real> ChebConv<T> {
    pub fn new(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            w0: Tensor::glorot(&[n_in, n_out], n_in, n_out, rng),
            w1: Tensor::glorot(&[n_in, n_out], n_in, n_out, rng),
            bias: Tensor::zeros(&[n_out]),
        }
    }

    pub fn from_parts(w0: Tensor<T>, w1: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if w0.shape.len() != 2 || w0.shape != w1.shape || bias.shape != [w0.shape[1]] {
            return Err(Error::Shape(format!(
                "cheb weights {:?} {:?} bias {:?}",
                w0.shape, w1.shape, bias.shape
            )));
        }
        Ok(Self { w0, w1, bias })
    }

    pub fn n_in(&self) -> usize {
        self.w0.shape[0]
    }

    pub fn n_out(&self) -> usize {
        self.w0.shape[1]
    }

    pub fn forward(&self, lap: &ScaledLaplacian<T>, x: Mat<T>) -> Result<(Mat<T>, ChebCache<T>)> {
        if x.cols != self.n_in() {
            return Err(Error::Shape(format!(
                "cheb_conv expects {} features, got {}",
                self.n_in(),
                x.cols
            )));
        }
        let lx = lap.apply(&x)?;
        let n_out = self.n_out();
        let mut y = Mat::zeros(x.rows, n_out);
        for r in 0..x.rows {
            let yr = y.row_mut(r);
            yr.copy_from_slice(&self.bias.values);
            for (i, (&a, &b)) in x.row(r).iter().zip(lx.row(r)).enumerate() {
                axpy(yr, a, &self.w0.values[i * n_out..(i + 1) * n_out]);
                axpy(yr, b, &self.w1.values[i * n_out..(i + 1) * n_out]);
            }
        }
        Ok((y, ChebCache { x, lx }))
    }

    /// Accumulates parameter gradients and returns `dL/dX`.
    pub fn backward(
        &mut self,
        lap: &ScaledLaplacian<T>,
        cache: &ChebCache<T>,
        dy: &Mat<T>,
    ) -> Result<Mat<T>> {
        let (n_in, n_out) = (self.n_in(), self.n_out());
        let rows = cache.x.rows;
        let mut dx = Mat::zeros(rows, n_in);
        let mut dlx = Mat::zeros(rows, n_in);
        for r in 0..rows {
            let dyr = dy.row(r);
            axpy(&mut self.bias.grad, T::one(), dyr);
            let (xr, lxr) = (cache.x.row(r), cache.lx.row(r));
            for i in 0..n_in {
                let span = i * n_out..(i + 1) * n_out;
                axpy(&mut self.w0.grad[span.clone()], xr[i], dyr);
                axpy(&mut self.w1.grad[span.clone()], lxr[i], dyr);
                dx.row_mut(r)[i] = dot(&self.w0.values[span.clone()], dyr);
                dlx.row_mut(r)[i] = dot(&self.w1.values[span], dyr);
            }
        }
        let back = lap.apply(&dlx)?;
        for (a, b) in dx.data.iter_mut().zip(back.data) {
            *a += b;
        }
        Ok(dx)
    }

    pub fn params(&self) -> [&Tensor<T>; 3] {
        [&self.w0, &self.w1, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 3] {
        [&mut self.w0, &mut self.w1, &mut self.bias]
    }
}
