//! Independent reference implementations used to cross-check the fast paths.
//!
//! Everything here trades speed for obviousness and stays disjoint from the
//! code it verifies: the hypercomplex product is rebuilt by recursive
//! Cayley–Dickson doubling from the reals, the convolution by six nested
//! loops, the optimizer by a scalar transcription, and the evaluator by
//! per-candidate scoring with set arithmetic over the raw splits.

use std::collections::HashSet;

use crate::error::Result;
use crate::graph::{Split, TripleStore};
use crate::model::ModelParams;
use crate::nn::{Mode, Tensor};

/// Conjugate in a 2^k-dimensional Cayley–Dickson algebra.
pub fn cd_conj(x: &[f64]) -> Vec<f64> {
    if x.len() == 1 {
        return vec![x[0]];
    }
    let mut out = Vec::with_capacity(x.len());
    out.push(x[0]);
    out.extend(x[1..].iter().map(|v| -v));
    out
}

/// Product in a 2^k-dimensional Cayley–Dickson algebra built from ℝ:
/// `(a, b)(c, d) = (ac − d̄b, da + bc̄)`. At length 4 this is the Hamilton
/// product; at length 8 the octonion product.
pub fn cd_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    assert!(x.len().is_power_of_two());
    if x.len() == 1 {
        return vec![x[0] * y[0]];
    }
    let half = x.len() / 2;
    let (a, b) = x.split_at(half);
    let (c, d) = y.split_at(half);
    let lo_l = cd_mul(a, c);
    let lo_r = cd_mul(&cd_conj(d), b);
    let hi_l = cd_mul(d, a);
    let hi_r = cd_mul(b, &cd_conj(c));
    let mut out = Vec::with_capacity(x.len());
    out.extend(lo_l.iter().zip(&lo_r).map(|(p, q)| p - q));
    out.extend(hi_l.iter().zip(&hi_r).map(|(p, q)| p + q));
    out
}

/// The 8×8 octonion basis product table: entry `(i, j)` is the signed basis
/// index of `e_i ★ e_j`, encoded as `±(index + 1)`.
pub fn octonion_basis_table() -> [[i8; 8]; 8] {
    let mut table = [[0i8; 8]; 8];
    for (i, row) in table.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut x = [0.0; 8];
            let mut y = [0.0; 8];
            x[i] = 1.0;
            y[j] = 1.0;
            let prod = cd_mul(&x, &y);
            let mut found = None;
            for (k, &v) in prod.iter().enumerate() {
                if v != 0.0 {
                    assert!(found.is_none(), "basis product not a signed basis vector");
                    assert!(v == 1.0 || v == -1.0);
                    found = Some(if v > 0.0 { (k + 1) as i8 } else { -((k + 1) as i8) });
                }
            }
            *cell = found.expect("basis product is nonzero");
        }
    }
    table
}

/// Cross-correlation by six nested loops; same contract as `nn::conv2d`.
pub fn conv2d_naive(
    input: &Tensor,
    kernels: &Tensor,
    padding: usize,
    stride: usize,
) -> Tensor {
    let (n, h, w) = (input.shape()[0], input.shape()[2], input.shape()[3]);
    let (f, kh, kw) = (kernels.shape()[0], kernels.shape()[2], kernels.shape()[3]);
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    let mut out = Tensor::zeros(&[n, f, oh, ow]).expect("oracle shape");
    for ni in 0..n {
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let y = (oy * stride + ky) as isize - padding as isize;
                            let x = (ox * stride + kx) as isize - padding as isize;
                            if y >= 0 && (y as usize) < h && x >= 0 && (x as usize) < w {
                                let iv = input.data()[(ni * h + y as usize) * w + x as usize];
                                let kv = kernels.data()[(fi * kh + ky) * kw + kx];
                                acc += iv * kv;
                            }
                        }
                    }
                    out.data_mut()[((ni * f + fi) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

/// Scalar Adam transcription for trajectory checks.
pub struct ScalarAdam {
    pub m: f64,
    pub v: f64,
    pub t: u32,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        ScalarAdam { m: 0.0, v: 0.0, t: 0, lr, beta1, beta2, eps: 1e-8 }
    }

    pub fn step(&mut self, param: f64, grad: f64) -> f64 {
        self.t += 1;
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad;
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad;
        let mhat = self.m / (1.0 - self.beta1.powi(self.t as i32));
        let vhat = self.v / (1.0 - self.beta2.powi(self.t as i32));
        param - self.lr * mhat / (vhat.sqrt() + self.eps)
    }
}

/// The four-term multilinear score a gated quaternion model reduces to when
/// the last two imaginary planes of h, r, t vanish: with real/i gate planes
/// γ₁/γ₂, `Σ γ₁aₕaᵣaₜ + γ₂bₕaᵣbₜ + γ₂aₕbᵣbₜ − γ₁bₕbᵣaₜ`.
pub fn complex_form_score(
    gamma1: &[f64],
    gamma2: &[f64],
    a_h: &[f64],
    b_h: &[f64],
    a_r: &[f64],
    b_r: &[f64],
    a_t: &[f64],
    b_t: &[f64],
) -> f64 {
    let d = a_h.len();
    let mut acc = 0.0;
    for k in 0..d {
        acc += gamma1[k] * a_h[k] * a_r[k] * a_t[k];
        acc += gamma2[k] * b_h[k] * a_r[k] * b_t[k];
        acc += gamma2[k] * a_h[k] * b_r[k] * b_t[k];
        acc -= gamma1[k] * b_h[k] * b_r[k] * a_t[k];
    }
    acc
}

/// The real triple product `Σ aₕaᵣaₜ`.
pub fn triple_product_score(a_h: &[f64], a_r: &[f64], a_t: &[f64]) -> f64 {
    a_h.iter()
        .zip(a_r)
        .zip(a_t)
        .map(|((h, r), t)| h * r * t)
        .sum()
}

/// A brute-force ranked query: every candidate scored one triple at a time,
/// exclusions rebuilt by scanning all three splits.
pub struct BruteRank {
    pub relation: u32,
    pub rank: usize,
}

/// Rank every query of the evaluation scope by per-candidate scoring.
/// `tail_only` restricts to raw-relation triples, mirroring the evaluator's
/// tail-only mode.
pub fn brute_force_ranks(
    models: &[&ModelParams],
    store: &TripleStore,
    tail_only: bool,
) -> Result<Vec<BruteRank>> {
    let mut known: HashSet<(u32, u32, u32)> = HashSet::new();
    for split in [Split::Train, Split::Valid, Split::Test] {
        for &[h, r, t] in store.split(split) {
            known.insert((h, r, t));
        }
    }
    let n = store.n_entities() as u32;
    let mut out = Vec::new();
    for &[h, r, gold] in store.split(Split::Test) {
        if tail_only && store.is_reverse(r) {
            continue;
        }
        // Mean post-sigmoid probability over the ensemble, one candidate at
        // a time through the per-triple scoring path.
        let mut probs = Vec::with_capacity(n as usize);
        for x in 0..n {
            let mut acc = 0.0;
            for m in models {
                let s = m.score(h, r, x, Mode::Eval)?;
                acc += 1.0 / (1.0 + (-s).exp());
            }
            probs.push(acc / models.len() as f64);
        }
        let gold_p = probs[gold as usize];
        let mut greater = 0usize;
        let mut ties = 0usize;
        for x in 0..n {
            if x == gold || (x != gold && known.contains(&(h, r, x))) {
                continue;
            }
            if probs[x as usize] > gold_p {
                greater += 1;
            } else if probs[x as usize] == gold_p {
                ties += 1;
            }
        }
        out.push(BruteRank {
            relation: r,
            rank: 1 + greater + ties.div_ceil(2),
        });
    }
    Ok(out)
}
