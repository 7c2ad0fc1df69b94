//! The four scoring functions — QMult, OMult, ConvQ, ConvO — over learned
//! embedding tables, with the convolutional gate head and the KvsAll
//! all-entity scoring path.

mod batch;

pub use batch::{BatchForward, Gradients};

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, HVec};
use crate::error::{Error, Result};
use crate::graph::TripleStore;
use crate::nn::{BatchNorm1d, Mode, Tensor};

/// Which scoring function a parameter set implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    QMult,
    OMult,
    ConvQ,
    ConvO,
}

impl ModelKind {
    pub fn algebra(self) -> Algebra {
        match self {
            ModelKind::QMult | ModelKind::ConvQ => Algebra::Quaternion,
            ModelKind::OMult | ModelKind::ConvO => Algebra::Octonion,
        }
    }

    pub fn has_conv(self) -> bool {
        matches!(self, ModelKind::ConvQ | ModelKind::ConvO)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::QMult => "qmult",
            ModelKind::OMult => "omult",
            ModelKind::ConvQ => "convq",
            ModelKind::ConvO => "convo",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qmult" => Ok(ModelKind::QMult),
            "omult" => Ok(ModelKind::OMult),
            "convq" => Ok(ModelKind::ConvQ),
            "convo" => Ok(ModelKind::ConvO),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How head/relation embeddings are normalized before the product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormMode {
    /// Batch-normalize head and relation rows (and the conv feature maps).
    Batch,
    /// Unit-normalize the relation embedding per dimension index.
    Unit,
    /// No normalization.
    None,
}

impl NormMode {
    pub fn name(self) -> &'static str {
        match self {
            NormMode::Batch => "batch",
            NormMode::Unit => "unit",
            NormMode::None => "none",
        }
    }
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "batch" => Ok(NormMode::Batch),
            "unit" => Ok(NormMode::Unit),
            "none" => Ok(NormMode::None),
            other => Err(Error::Config(format!("unknown norm mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for NormMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Convolution head hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvConfig {
    pub filters: usize,
    /// Square kernel extent; must be odd so same-padding keeps the
    /// feature-map extent at `2C × d`.
    pub kernel_size: usize,
    pub dropout_input: f64,
    pub dropout_feature: f64,
    pub dropout_hidden: f64,
}

impl Default for ConvConfig {
    fn default() -> Self {
        ConvConfig {
            filters: 16,
            kernel_size: 3,
            dropout_input: 0.3,
            dropout_feature: 0.4,
            dropout_hidden: 0.3,
        }
    }
}

impl ConvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.filters == 0 {
            return Err(Error::Config("conv filters must be ≥ 1".into()));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config("conv kernel size must be odd".into()));
        }
        for rate in [self.dropout_input, self.dropout_feature, self.dropout_hidden] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("dropout rate {rate} not in [0,1)")));
            }
        }
        Ok(())
    }
}

/// Kernels, affine map, and bias of the gate head.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvHead {
    /// `[F, 1, kh, kw]` filters applied to the stacked `[2C, d]` image.
    pub kernels: Tensor,
    /// `[F·2C·d, C·d]` affine map from flattened feature maps to the gate.
    pub w: Tensor,
    /// `[C·d]` affine bias.
    pub b: Vec<f64>,
    pub config: ConvConfig,
}

/// Row-major table of hypercomplex rows: row `i` is the planar
/// `components·dim` layout of one embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    n: usize,
    components: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(n: usize, components: usize, dim: usize) -> Self {
        EmbeddingTable {
            n,
            components,
            dim,
            data: vec![0.0; n * components * dim],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row_width(&self) -> usize {
        self.components * self.dim
    }

    pub fn row(&self, i: u32) -> &[f64] {
        let w = self.row_width();
        &self.data[i as usize * w..(i as usize + 1) * w]
    }

    pub fn row_mut(&mut self, i: u32) -> &mut [f64] {
        let w = self.row_width();
        &mut self.data[i as usize * w..(i as usize + 1) * w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copy a row out as a hypercomplex vector.
    pub fn hvec(&self, algebra: Algebra, i: u32) -> HVec {
        debug_assert_eq!(algebra.components(), self.components);
        HVec::from_data(algebra, self.dim, self.row(i).to_vec()).expect("row width")
    }
}

/// All learnable state of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub norm: NormMode,
    pub entities: EmbeddingTable,
    pub relations: EmbeddingTable,
    pub bn_head: Option<BatchNorm1d>,
    pub bn_rel: Option<BatchNorm1d>,
    pub bn_conv: Option<BatchNorm1d>,
    pub conv: Option<ConvHead>,
}

/// Initialize parameters: embedding planes i.i.d. N(0, 0.1²), conv weights
/// Kaiming-uniform over fan-in, batch-norm scale 1 / shift 0. Deterministic
/// given the seed.
pub fn init_params<R: Rng>(
    store: &TripleStore,
    dim: usize,
    kind: ModelKind,
    norm: NormMode,
    conv_config: ConvConfig,
    rng: &mut R,
) -> Result<ModelParams> {
    init_with_sizes(store.n_entities(), store.n_relations(), dim, kind, norm, conv_config, rng)
}

/// [`init_params`] without a store, from raw vocabulary sizes.
pub fn init_with_sizes<R: Rng>(
    n_entities: usize,
    n_relations: usize,
    dim: usize,
    kind: ModelKind,
    norm: NormMode,
    conv_config: ConvConfig,
    rng: &mut R,
) -> Result<ModelParams> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be ≥ 1".into()));
    }
    if n_entities == 0 || n_relations == 0 {
        return Err(Error::Config("empty vocabulary".into()));
    }
    let c = kind.algebra().components();
    let width = c * dim;

    let normal = Normal::new(0.0, 0.1).expect("std > 0");
    let mut entities = EmbeddingTable::zeros(n_entities, c, dim);
    for v in entities.data_mut() {
        *v = normal.sample(rng);
    }
    let mut relations = EmbeddingTable::zeros(n_relations, c, dim);
    for v in relations.data_mut() {
        *v = normal.sample(rng);
    }

    let conv = if kind.has_conv() {
        conv_config.validate()?;
        let f = conv_config.filters;
        let ks = conv_config.kernel_size;
        let kernel_bound = (6.0 / (ks * ks) as f64).sqrt();
        let kdist = Uniform::new_inclusive(-kernel_bound, kernel_bound);
        let kernels = Tensor::new(
            &[f, 1, ks, ks],
            (0..f * ks * ks).map(|_| kdist.sample(rng)).collect(),
        )?;
        let flat_width = f * 2 * c * dim;
        let w_bound = (6.0 / flat_width as f64).sqrt();
        let wdist = Uniform::new_inclusive(-w_bound, w_bound);
        let w = Tensor::new(
            &[flat_width, width],
            (0..flat_width * width).map(|_| wdist.sample(rng)).collect(),
        )?;
        Some(ConvHead {
            kernels,
            w,
            b: vec![0.0; width],
            config: conv_config,
        })
    } else {
        None
    };

    let (bn_head, bn_rel, bn_conv) = if norm == NormMode::Batch {
        let conv_width = conv.as_ref().map(|c| c.w.shape()[0]);
        (
            Some(BatchNorm1d::new(width)),
            Some(BatchNorm1d::new(width)),
            conv_width.map(BatchNorm1d::new),
        )
    } else {
        (None, None, None)
    };

    Ok(ModelParams {
        kind,
        norm,
        entities,
        relations,
        bn_head,
        bn_rel,
        bn_conv,
        conv,
    })
}

impl ModelParams {
    pub fn dim(&self) -> usize {
        self.entities.dim
    }

    pub fn components(&self) -> usize {
        self.entities.components
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub(crate) fn check_pair(&self, h: u32, r: u32) -> Result<()> {
        if h as usize >= self.n_entities() {
            return Err(Error::Vocab(format!("entity id {h} out of range")));
        }
        if r as usize >= self.n_relations() {
            return Err(Error::Vocab(format!("relation id {r} out of range")));
        }
        Ok(())
    }

    /// Verify compatibility with a store's vocabulary sizes.
    pub fn check_store(&self, store: &TripleStore) -> Result<()> {
        if self.n_entities() != store.n_entities() || self.n_relations() != store.n_relations() {
            return Err(Error::Vocab(format!(
                "model tables {}×{} vs store vocabularies {}×{}",
                self.n_entities(),
                self.n_relations(),
                store.n_entities(),
                store.n_relations()
            )));
        }
        Ok(())
    }

    /// φ(h, r, t). Dropout never fires here; batch norm follows `mode`.
    pub fn score(&self, h: u32, r: u32, t: u32, mode: Mode) -> Result<f64> {
        if t as usize >= self.n_entities() {
            return Err(Error::Vocab(format!("entity id {t} out of range")));
        }
        let fwd = batch::forward_gated(self, &[(h, r)], mode, None::<&mut rand::rngs::ThreadRng>)?;
        Ok(crate::linalg::dot(fwd.gated_row(0), self.entities.row(t)))
    }

    /// The score plane φ(h, r, ·) over every entity.
    pub fn score_all_tails(&self, h: u32, r: u32, mode: Mode) -> Result<Vec<f64>> {
        let fwd = batch::forward_gated(self, &[(h, r)], mode, None::<&mut rand::rngs::ThreadRng>)?;
        let width = self.entities.row_width();
        let n = self.n_entities();
        let mut out = vec![0.0; n];
        crate::linalg::matmul_nt(fwd.gated_row(0), self.entities.data(), 1, width, n, &mut out);
        Ok(out)
    }

    /// The conv-head gate γ for a pair, as a hypercomplex vector.
    pub fn conv_gate(&self, h: u32, r: u32, mode: Mode) -> Result<HVec> {
        if self.conv.is_none() {
            return Err(Error::Config(format!(
                "{} has no convolution head",
                self.kind
            )));
        }
        let fwd = batch::forward_gated(self, &[(h, r)], mode, None::<&mut rand::rngs::ThreadRng>)?;
        let gate = fwd
            .gate_row(0)
            .expect("conv model produces a gate");
        HVec::from_data(self.kind.algebra(), self.dim(), gate.to_vec())
    }

    /// Parameter buffers in canonical order (no running statistics).
    /// The same order is used by [`Gradients::flat`] and the optimizer.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_params(|buf| out.extend_from_slice(buf));
        out
    }

    /// Overwrite all parameter buffers from a flat vector.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = {
            let mut n = 0;
            self.visit_params(|buf| n += buf.len());
            n
        };
        if flat.len() != total {
            return Err(Error::Shape(format!(
                "flat parameter vector: expected {total}, got {}",
                flat.len()
            )));
        }
        let mut offset = 0;
        self.visit_params_mut(|buf| {
            buf.copy_from_slice(&flat[offset..offset + buf.len()]);
            offset += buf.len();
        });
        Ok(())
    }

    /// Lengths of the parameter buffers in canonical order.
    pub(crate) fn visit_param_lens(&self, mut f: impl FnMut(usize)) {
        self.visit_params(|buf| f(buf.len()));
    }

    pub(crate) fn visit_params(&self, mut f: impl FnMut(&[f64])) {
        f(self.entities.data());
        f(self.relations.data());
        for bn in [&self.bn_head, &self.bn_rel, &self.bn_conv].into_iter().flatten() {
            f(&bn.gamma);
            f(&bn.beta);
        }
        if let Some(conv) = &self.conv {
            f(conv.kernels.data());
            f(conv.w.data());
            f(&conv.b);
        }
    }

    /// Parameter buffers, mutably, in canonical order — the optimizer hook.
    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        f(self.entities.data_mut());
        f(self.relations.data_mut());
        for bn in [&mut self.bn_head, &mut self.bn_rel, &mut self.bn_conv]
            .into_iter()
            .flatten()
        {
            f(&mut bn.gamma);
            f(&mut bn.beta);
        }
        if let Some(conv) = &mut self.conv {
            f(conv.kernels.data_mut());
            f(conv.w.data_mut());
            f(&mut conv.b);
        }
    }

    /// Fold a train-mode forward's batch statistics into the running stats.
    pub fn update_running_stats(&mut self, fwd: &BatchForward) {
        batch::update_running_stats(self, fwd);
    }
}
