//! 1D batch normalization over `[N, K]` activations.

use super::{Mode, Tensor};
use crate::error::{Error, Result};

/// Epsilon inside the variance square root.
pub const BN_EPS: f64 = 1e-5;

/// Learnable scale/shift plus running statistics for one normalized width.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Weight of the newest batch statistics in the running update.
    pub momentum: f64,
}

/// Intermediates saved by a forward pass for the matching backward.
#[derive(Debug, Clone)]
pub struct BnCache {
    mode: Mode,
    /// Normalized activations (before γ/β).
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    n: usize,
    k: usize,
}

impl BatchNorm1d {
    pub fn new(width: usize) -> Self {
        BatchNorm1d {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: 0.1,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    /// Normalize a `[N, K]` batch. Train mode uses batch statistics
    /// (population variance) and requires N ≥ 2; eval mode uses running
    /// statistics. Running statistics are not touched here — apply the
    /// returned cache with [`BatchNorm1d::update_running`].
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<(Tensor, BnCache)> {
        let (n, k) = match x.shape() {
            [n, k] => (*n, *k),
            s => return Err(Error::Shape(format!("batchnorm1d input must be 2-axis, got {s:?}"))),
        };
        if k != self.width() {
            return Err(Error::Shape(format!(
                "batchnorm1d width {} vs input columns {k}",
                self.width()
            )));
        }
        let xd = x.data();
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::Shape(
                        "batchnorm1d in train mode needs a batch of at least 2 rows".into(),
                    ));
                }
                let mut mean = vec![0.0; k];
                let mut var = vec![0.0; k];
                for col in 0..k {
                    let mut s = 0.0;
                    for row in 0..n {
                        s += xd[row * k + col];
                    }
                    let m = s / n as f64;
                    let mut sq = 0.0;
                    for row in 0..n {
                        let dl = xd[row * k + col] - m;
                        sq += dl * dl;
                    }
                    mean[col] = m;
                    var[col] = sq / n as f64;
                }
                (mean, var)
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut out = Tensor::zeros(&[n, k])?;
        let mut xhat = vec![0.0; n * k];
        let od = out.data_mut();
        for row in 0..n {
            for col in 0..k {
                let idx = row * k + col;
                let h = (xd[idx] - mean[col]) * inv_std[col];
                xhat[idx] = h;
                od[idx] = self.gamma[col] * h + self.beta[col];
            }
        }
        Ok((
            out,
            BnCache {
                mode,
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
                n,
                k,
            },
        ))
    }

    /// Fold a train-mode cache's batch statistics into the running stats.
    pub fn update_running(&mut self, cache: &BnCache) {
        if cache.mode != Mode::Train {
            return;
        }
        let m = self.momentum;
        for col in 0..cache.k {
            self.running_mean[col] = (1.0 - m) * self.running_mean[col] + m * cache.batch_mean[col];
            self.running_var[col] = (1.0 - m) * self.running_var[col] + m * cache.batch_var[col];
        }
    }

    /// Gradients w.r.t. the input, γ, and β.
    pub fn backward(&self, cache: &BnCache, grad_out: &Tensor) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
        let (n, k) = (cache.n, cache.k);
        if grad_out.data().len() != n * k {
            return Err(Error::Shape("batchnorm1d backward: gradient shape mismatch".into()));
        }
        let gd = grad_out.data();
        let mut dgamma = vec![0.0; k];
        let mut dbeta = vec![0.0; k];
        for row in 0..n {
            for col in 0..k {
                let idx = row * k + col;
                dgamma[col] += gd[idx] * cache.xhat[idx];
                dbeta[col] += gd[idx];
            }
        }
        let mut gx = Tensor::zeros(&[n, k])?;
        let gxd = gx.data_mut();
        match cache.mode {
            Mode::Eval => {
                for row in 0..n {
                    for col in 0..k {
                        let idx = row * k + col;
                        gxd[idx] = gd[idx] * self.gamma[col] * cache.inv_std[col];
                    }
                }
            }
            Mode::Train => {
                let nf = n as f64;
                for col in 0..k {
                    // Means of g and g·xhat over the batch.
                    let mut mg = 0.0;
                    let mut mgx = 0.0;
                    for row in 0..n {
                        let idx = row * k + col;
                        mg += gd[idx];
                        mgx += gd[idx] * cache.xhat[idx];
                    }
                    mg /= nf;
                    mgx /= nf;
                    let scale = self.gamma[col] * cache.inv_std[col];
                    for row in 0..n {
                        let idx = row * k + col;
                        gxd[idx] = scale * (gd[idx] - mg - cache.xhat[idx] * mgx);
                    }
                }
            }
        }
        Ok((gx, dgamma, dbeta))
    }
}
