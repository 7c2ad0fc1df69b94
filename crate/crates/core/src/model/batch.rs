//! Batched forward and backward passes shared by scoring and training.
//!
//! The pipeline for a batch of (h, r) pairs, with C·d-wide planar rows:
//!
//! 1. gather head/relation rows, normalize them per the norm mode;
//! 2. element-wise hypercomplex product per dimension index;
//! 3. for conv kinds, run the gate head on the stacked `[2C, d]` image
//!    (input dropout → conv → ReLU → feature dropout → flatten → batch norm
//!    → affine → hidden dropout → ReLU) and scale the product by the gate;
//! 4. the score plane is one `gated · Eᵀ` product against the entity table.

use rand::Rng;

use super::{ModelParams, NormMode};
use crate::algebra;
use crate::error::{Error, Result};
use crate::linalg;
use crate::nn::{
    affine, affine_backward, conv2d, conv2d_backward, dropout, dropout_backward, relu,
    relu_backward, BnCache, DropoutMask, Mode, Tensor,
};

/// Saved intermediates of the conv-head pipeline.
#[derive(Debug, Clone)]
struct ConvTrace {
    /// Stacked `[B,1,2C,d]` image after input dropout.
    image: Tensor,
    drop_in: DropoutMask,
    /// Pre-activation feature maps `[B,F,2C,d]`.
    conv_out: Tensor,
    drop_feat: DropoutMask,
    bn_cache: Option<BnCache>,
    /// Affine input `[B, F·2C·d]` (post batch norm when present).
    bn_out: Tensor,
    /// Affine output after hidden dropout, before the final ReLU.
    hid: Tensor,
    drop_hidden: DropoutMask,
    /// The gate γ, `[B, C·d]`.
    gate: Tensor,
}

/// One batch's forward intermediates; consumed by [`ModelParams::backward`].
#[derive(Debug, Clone)]
pub struct BatchForward {
    pairs: Vec<(u32, u32)>,
    mode: Mode,
    /// Gathered relation rows `[B, C·d]` (pre-normalization).
    xr: Tensor,
    /// Normalized head rows.
    hh: Tensor,
    /// Normalized relation rows.
    rr: Tensor,
    bn_head_cache: Option<BnCache>,
    bn_rel_cache: Option<BnCache>,
    /// Hypercomplex product rows `[B, C·d]`.
    prod: Tensor,
    conv: Option<ConvTrace>,
    /// Gate-scaled product (or the product itself), `[B, C·d]`.
    gated: Tensor,
}

impl BatchForward {
    pub fn batch_len(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub(crate) fn gated_row(&self, b: usize) -> &[f64] {
        let w = self.gated.shape()[1];
        &self.gated.data()[b * w..(b + 1) * w]
    }

    pub(crate) fn gate_row(&self, b: usize) -> Option<&[f64]> {
        self.conv.as_ref().map(|c| {
            let w = c.gate.shape()[1];
            &c.gate.data()[b * w..(b + 1) * w]
        })
    }

    /// Score plane `[B, |E|]`: one matrix product against the entity table.
    pub fn all_scores(&self, params: &ModelParams) -> Tensor {
        let b = self.batch_len();
        let width = params.entities.row_width();
        let n = params.n_entities();
        let mut out = Tensor::zeros(&[b, n]).expect("score plane shape");
        linalg::matmul_nt(
            self.gated.data(),
            params.entities.data(),
            b,
            width,
            n,
            out.data_mut(),
        );
        out
    }
}

/// Gradients w.r.t. every parameter buffer, congruent with
/// [`ModelParams::flat_params`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub entities: Vec<f64>,
    pub relations: Vec<f64>,
    pub bn_head: Option<(Vec<f64>, Vec<f64>)>,
    pub bn_rel: Option<(Vec<f64>, Vec<f64>)>,
    pub bn_conv: Option<(Vec<f64>, Vec<f64>)>,
    pub conv_kernels: Option<Vec<f64>>,
    pub conv_w: Option<Vec<f64>>,
    pub conv_b: Option<Vec<f64>>,
}

impl Gradients {
    /// Buffers in the canonical parameter order.
    pub fn visit(&self, mut f: impl FnMut(&[f64])) {
        f(&self.entities);
        f(&self.relations);
        for bn in [&self.bn_head, &self.bn_rel, &self.bn_conv].into_iter().flatten() {
            f(&bn.0);
            f(&bn.1);
        }
        if let Some(k) = &self.conv_kernels {
            f(k);
        }
        if let Some(w) = &self.conv_w {
            f(w);
        }
        if let Some(b) = &self.conv_b {
            f(b);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(|buf| out.extend_from_slice(buf));
        out
    }

    /// Buffer slices in the canonical parameter order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        self.visit_collect(&mut out);
        out
    }

    fn visit_collect<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        out.push(&self.entities);
        out.push(&self.relations);
        for bn in [&self.bn_head, &self.bn_rel, &self.bn_conv].into_iter().flatten() {
            out.push(&bn.0);
            out.push(&bn.1);
        }
        if let Some(k) = &self.conv_kernels {
            out.push(k);
        }
        if let Some(w) = &self.conv_w {
            out.push(w);
        }
        if let Some(b) = &self.conv_b {
            out.push(b);
        }
    }
}

fn same_padding(kernel: usize) -> usize {
    (kernel - 1) / 2
}

/// Forward up to the gated product. `dropout_rng: None` disables dropout
/// regardless of mode, which keeps scoring deterministic.
pub(crate) fn forward_gated<R: Rng>(
    params: &ModelParams,
    pairs: &[(u32, u32)],
    mode: Mode,
    mut dropout_rng: Option<&mut R>,
) -> Result<BatchForward> {
    if pairs.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    for &(h, r) in pairs {
        params.check_pair(h, r)?;
    }
    let b = pairs.len();
    let width = params.entities.row_width();
    let c = params.components();
    let d = params.dim();
    let algebra = params.kind.algebra();

    let mut xh = Tensor::zeros(&[b, width])?;
    let mut xr = Tensor::zeros(&[b, width])?;
    for (i, &(h, r)) in pairs.iter().enumerate() {
        xh.data_mut()[i * width..(i + 1) * width].copy_from_slice(params.entities.row(h));
        xr.data_mut()[i * width..(i + 1) * width].copy_from_slice(params.relations.row(r));
    }

    let (hh, rr, bn_head_cache, bn_rel_cache) = match params.norm {
        NormMode::Batch => {
            let bn_h = params.bn_head.as_ref().expect("batch norm state present");
            let bn_r = params.bn_rel.as_ref().expect("batch norm state present");
            let (hh, ch) = bn_h.forward(&xh, mode)?;
            let (rr, cr) = bn_r.forward(&xr, mode)?;
            (hh, rr, Some(ch), Some(cr))
        }
        NormMode::Unit => {
            let mut rr = xr.clone();
            for row in rr.data_mut().chunks_mut(width) {
                algebra::unit_normalize_row(c, d, row);
            }
            (xh.clone(), rr, None, None)
        }
        NormMode::None => (xh.clone(), xr.clone(), None, None),
    };

    let mut prod = Tensor::zeros(&[b, width])?;
    for i in 0..b {
        algebra::mul_into(
            algebra,
            d,
            &hh.data()[i * width..(i + 1) * width],
            &rr.data()[i * width..(i + 1) * width],
            &mut prod.data_mut()[i * width..(i + 1) * width],
        );
    }

    let (conv, gated) = if let Some(head) = &params.conv {
        let cfg = &head.config;
        let pad = same_padding(cfg.kernel_size);

        // Rows 0..C hold the head planes, rows C..2C the relation planes.
        let mut image0 = Tensor::zeros(&[b, 1, 2 * c, d])?;
        for i in 0..b {
            let dst = &mut image0.data_mut()[i * 2 * width..(i + 1) * 2 * width];
            dst[..width].copy_from_slice(&hh.data()[i * width..(i + 1) * width]);
            dst[width..].copy_from_slice(&rr.data()[i * width..(i + 1) * width]);
        }
        let (image, drop_in) = apply_dropout(&image0, cfg.dropout_input, mode, &mut dropout_rng)?;
        let conv_out = conv2d(&image, &head.kernels, pad, 1)?;
        let act = relu(&conv_out);
        let (feat, drop_feat) = apply_dropout(&act, cfg.dropout_feature, mode, &mut dropout_rng)?;
        let flat_width = cfg.filters * 2 * c * d;
        let flat = feat.reshape(&[b, flat_width])?;
        let (bn_out, bn_cache) = match &params.bn_conv {
            Some(bn) => {
                let (out, cache) = bn.forward(&flat, mode)?;
                (out, Some(cache))
            }
            None => (flat, None),
        };
        let aff = affine(&bn_out, &head.w, &head.b)?;
        let (hid, drop_hidden) = apply_dropout(&aff, cfg.dropout_hidden, mode, &mut dropout_rng)?;
        let gate = relu(&hid);

        let mut gated = prod.clone();
        for (g, &m) in gated.data_mut().iter_mut().zip(gate.data()) {
            *g *= m;
        }
        (
            Some(ConvTrace {
                image,
                drop_in,
                conv_out,
                drop_feat,
                bn_cache,
                bn_out,
                hid,
                drop_hidden,
                gate,
            }),
            gated,
        )
    } else {
        (None, prod.clone())
    };

    Ok(BatchForward {
        pairs: pairs.to_vec(),
        mode,
        xr,
        hh,
        rr,
        bn_head_cache,
        bn_rel_cache,
        prod,
        conv,
        gated,
    })
}

fn apply_dropout<R: Rng>(
    x: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut Option<&mut R>,
) -> Result<(Tensor, DropoutMask)> {
    match rng {
        Some(r) if mode == Mode::Train && rate > 0.0 => dropout(x, rate, Mode::Train, &mut **r),
        _ => Ok((x.clone(), DropoutMask::identity())),
    }
}

impl ModelParams {
    /// Forward a batch of pairs. Dropout fires only in train mode and only
    /// when an RNG is supplied.
    pub fn forward_pairs<R: Rng>(
        &self,
        pairs: &[(u32, u32)],
        mode: Mode,
        dropout_rng: Option<&mut R>,
    ) -> Result<BatchForward> {
        forward_gated(self, pairs, mode, dropout_rng)
    }

    /// Backward pass from the score-plane gradient `[B, |E|]` to gradients
    /// for every parameter buffer.
    pub fn backward(&self, fwd: &BatchForward, grad_scores: &Tensor) -> Result<Gradients> {
        let b = fwd.batch_len();
        let n = self.n_entities();
        let width = self.entities.row_width();
        let c = self.components();
        let d = self.dim();
        let algebra = self.kind.algebra();
        if grad_scores.shape() != [b, n] {
            return Err(Error::Shape(format!(
                "score gradient must be [{b}, {n}], got {:?}",
                grad_scores.shape()
            )));
        }

        // Tail side: gradients through the score product.
        let mut g_gated = Tensor::zeros(&[b, width])?;
        linalg::matmul_nn(grad_scores.data(), self.entities.data(), b, n, width, g_gated.data_mut());
        let mut g_entities = vec![0.0; n * width];
        linalg::matmul_tn(grad_scores.data(), fwd.gated.data(), b, n, width, &mut g_entities);

        // Gate and product split.
        let (g_prod, conv_grads, g_image_rows) = if let Some(trace) = &fwd.conv {
            let head = self.conv.as_ref().expect("conv params present");
            let mut g_gate = g_gated.clone();
            for (g, &p) in g_gate.data_mut().iter_mut().zip(fwd.prod.data()) {
                *g *= p;
            }
            let mut g_prod = g_gated;
            for (g, &m) in g_prod.data_mut().iter_mut().zip(trace.gate.data()) {
                *g *= m;
            }

            let g_hid = relu_backward(&trace.hid, &g_gate);
            let g_aff = dropout_backward(&trace.drop_hidden, &g_hid);
            let (g_bn_out, g_w, g_b) = affine_backward(&trace.bn_out, &head.w, &g_aff)?;
            let (g_flat, bn_conv_grads) = match (&self.bn_conv, &trace.bn_cache) {
                (Some(bn), Some(cache)) => {
                    let (gx, dgamma, dbeta) = bn.backward(cache, &g_bn_out)?;
                    (gx, Some((dgamma, dbeta)))
                }
                _ => (g_bn_out, None),
            };
            let g_feat = g_flat.reshape(&[b, head.config.filters, 2 * c, d])?;
            let g_act = dropout_backward(&trace.drop_feat, &g_feat);
            let g_conv_out = relu_backward(&trace.conv_out, &g_act);
            let pad = same_padding(head.config.kernel_size);
            let (g_image, g_kernels) =
                conv2d_backward(&trace.image, &head.kernels, &g_conv_out, pad, 1)?;
            let g_image0 = dropout_backward(&trace.drop_in, &g_image);
            (
                g_prod,
                Some((g_kernels, g_w, g_b, bn_conv_grads)),
                Some(g_image0),
            )
        } else {
            (g_gated, None, None)
        };

        // Product backward via the composition-algebra adjoints.
        let mut g_hh = Tensor::zeros(&[b, width])?;
        let mut g_rr = Tensor::zeros(&[b, width])?;
        for i in 0..b {
            let span = i * width..(i + 1) * width;
            algebra::mul_backward_into(
                algebra,
                d,
                &fwd.hh.data()[span.clone()],
                &fwd.rr.data()[span.clone()],
                &g_prod.data()[span.clone()],
                &mut g_hh.data_mut()[span.clone()],
                &mut g_rr.data_mut()[span],
            );
        }

        // The gate head also feeds on the normalized rows.
        if let Some(g_image0) = &g_image_rows {
            for i in 0..b {
                let img = &g_image0.data()[i * 2 * width..(i + 1) * 2 * width];
                for (g, &v) in g_hh.data_mut()[i * width..(i + 1) * width]
                    .iter_mut()
                    .zip(&img[..width])
                {
                    *g += v;
                }
                for (g, &v) in g_rr.data_mut()[i * width..(i + 1) * width]
                    .iter_mut()
                    .zip(&img[width..])
                {
                    *g += v;
                }
            }
        }

        // Normalization backward.
        let (g_xh, g_xr, bn_head_grads, bn_rel_grads) = match self.norm {
            NormMode::Batch => {
                let bn_h = self.bn_head.as_ref().expect("batch norm state present");
                let bn_r = self.bn_rel.as_ref().expect("batch norm state present");
                let cache_h = fwd.bn_head_cache.as_ref().expect("head cache");
                let cache_r = fwd.bn_rel_cache.as_ref().expect("rel cache");
                let (g_xh, dgh, dbh) = bn_h.backward(cache_h, &g_hh)?;
                let (g_xr, dgr, dbr) = bn_r.backward(cache_r, &g_rr)?;
                (g_xh, g_xr, Some((dgh, dbh)), Some((dgr, dbr)))
            }
            NormMode::Unit => {
                let mut g_xr = Tensor::zeros(&[b, width])?;
                for i in 0..b {
                    let span = i * width..(i + 1) * width;
                    algebra::unit_normalize_backward_row(
                        c,
                        d,
                        &fwd.xr.data()[span.clone()],
                        &g_rr.data()[span.clone()],
                        &mut g_xr.data_mut()[span],
                    );
                }
                (g_hh, g_xr, None, None)
            }
            NormMode::None => (g_hh, g_rr, None, None),
        };

        // Scatter row gradients into the tables (head side accumulates on
        // top of the dense tail-side gradient).
        let mut g_relations = vec![0.0; self.n_relations() * width];
        for (i, &(h, r)) in fwd.pairs.iter().enumerate() {
            let hrow = &mut g_entities[h as usize * width..(h as usize + 1) * width];
            for (g, &v) in hrow.iter_mut().zip(&g_xh.data()[i * width..(i + 1) * width]) {
                *g += v;
            }
            let rrow = &mut g_relations[r as usize * width..(r as usize + 1) * width];
            for (g, &v) in rrow.iter_mut().zip(&g_xr.data()[i * width..(i + 1) * width]) {
                *g += v;
            }
        }

        let (conv_kernels, conv_w, conv_b, bn_conv) = match conv_grads {
            Some((gk, gw, gb, bn)) => (
                Some(gk.data().to_vec()),
                Some(gw.data().to_vec()),
                Some(gb),
                bn,
            ),
            None => (None, None, None, None),
        };

        Ok(Gradients {
            entities: g_entities,
            relations: g_relations,
            bn_head: bn_head_grads,
            bn_rel: bn_rel_grads,
            bn_conv,
            conv_kernels,
            conv_w,
            conv_b,
        })
    }
}

/// Fold a train-mode forward's batch statistics into the running stats.
pub(crate) fn update_running_stats(params: &mut ModelParams, fwd: &BatchForward) {
    if fwd.mode != Mode::Train {
        return;
    }
    if let (Some(bn), Some(cache)) = (&mut params.bn_head, &fwd.bn_head_cache) {
        bn.update_running(cache);
    }
    if let (Some(bn), Some(cache)) = (&mut params.bn_rel, &fwd.bn_rel_cache) {
        bn.update_running(cache);
    }
    if let (Some(bn), Some(trace)) = (&mut params.bn_conv, &fwd.conv) {
        if let Some(cache) = &trace.bn_cache {
            bn.update_running(cache);
        }
    }
}
