use crate::linalg::Matrix;

use super::{check_dim, NnError, ParamId, ParameterSet, Result};

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

/// Per-dimension batch normalization over the rows of a batch matrix.
///
/// The running statistics live in the parameter set as frozen entries so
/// they are checkpointed alongside the learned scale and shift.
#[derive(Debug, Clone, Copy)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub dim: usize,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(ps: &mut ParameterSet, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gamma: ps.add(format!("{name}.gamma"), Matrix::from_fn(1, dim, |_, _| 1.0))?,
            beta: ps.add(format!("{name}.beta"), Matrix::zeros(1, dim))?,
            running_mean: ps.add_frozen(format!("{name}.running_mean"), Matrix::zeros(1, dim))?,
            running_var: ps.add_frozen(format!("{name}.running_var"), Matrix::from_fn(1, dim, |_, _| 1.0))?,
            dim,
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        })
    }

    /// Normalizes with batch statistics and folds them into the running averages.
    pub fn forward_train(&self, ps: &mut ParameterSet, batch: &Matrix) -> Result<(Matrix, BatchNormCache)> {
        check_dim("batch norm width", self.dim, batch.cols())?;
        let n = batch.rows();
        if n < 2 {
            return Err(NnError::BatchTooSmall(n));
        }
        let mut mean = vec![0.0; self.dim];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(batch.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; self.dim];
        for r in 0..n {
            for ((s, v), m) in var.iter_mut().zip(batch.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        let normalized = Matrix::from_fn(n, self.dim, |r, c| (batch[(r, c)] - mean[c]) * inv_std[c]);
        let out = self.affine(ps, &normalized);

        let unbiased = n as f64 / (n as f64 - 1.0);
        let keep = self.momentum;
        for (rm, m) in ps.value_mut(self.running_mean).as_mut_slice().iter_mut().zip(&mean) {
            *rm = keep * *rm + (1.0 - keep) * m;
        }
        for (rv, v) in ps.value_mut(self.running_var).as_mut_slice().iter_mut().zip(&var) {
            *rv = keep * *rv + (1.0 - keep) * v * unbiased;
        }
        Ok((out, BatchNormCache { normalized, inv_std }))
    }

    pub fn forward_infer(&self, ps: &ParameterSet, batch: &Matrix) -> Result<Matrix> {
        check_dim("batch norm width", self.dim, batch.cols())?;
        let mean = ps.value(self.running_mean).as_slice();
        let var = ps.value(self.running_var).as_slice();
        let normalized = Matrix::from_fn(batch.rows(), self.dim, |r, c| {
            (batch[(r, c)] - mean[c]) / (var[c] + self.eps).sqrt()
        });
        Ok(self.affine(ps, &normalized))
    }

    fn affine(&self, ps: &ParameterSet, normalized: &Matrix) -> Matrix {
        let gamma = ps.value(self.gamma).as_slice();
        let beta = ps.value(self.beta).as_slice();
        Matrix::from_fn(normalized.rows(), self.dim, |r, c| {
            gamma[c] * normalized[(r, c)] + beta[c]
        })
    }

    /// Training-mode backward pass; returns `dL/dbatch`.
    pub fn backward(&self, ps: &mut ParameterSet, cache: &BatchNormCache, dy: &Matrix) -> Matrix {
        let n = dy.rows();
        let xhat = &cache.normalized;
        let mut sum_dy = vec![0.0; self.dim];
        let mut sum_dy_xhat = vec![0.0; self.dim];
        for r in 0..n {
            for c in 0..self.dim {
                sum_dy[c] += dy[(r, c)];
                sum_dy_xhat[c] += dy[(r, c)] * xhat[(r, c)];
            }
        }
        for (g, s) in ps.grad_mut(self.gamma).as_mut_slice().iter_mut().zip(&sum_dy_xhat) {
            *g += s;
        }
        for (g, s) in ps.grad_mut(self.beta).as_mut_slice().iter_mut().zip(&sum_dy) {
            *g += s;
        }
        let gamma = ps.value(self.gamma).as_slice();
        let nf = n as f64;
        Matrix::from_fn(n, self.dim, |r, c| {
            gamma[c] * cache.inv_std[c] / nf * (nf * dy[(r, c)] - sum_dy[c] - xhat[(r, c)] * sum_dy_xhat[c])
        })
    }
}
