//! KvsAll mini-batch training: distinct (h, r) pairs against label-smoothed
//! all-entity targets, sigmoid + binary cross entropy, Adam updates.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TripleStore;
use crate::model::{init_params, ConvConfig, Gradients, ModelKind, ModelParams, NormMode};
use crate::nn::{bce_backward, bce_loss, sigmoid, sigmoid_backward, AdamState, Mode, Tensor};

/// Checkpoint storage width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn bits(self) -> u8 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "32" => Ok(Precision::F32),
            "64" => Ok(Precision::F64),
            other => Err(Error::Config(format!("precision must be 32 or 64, got {other:?}"))),
        }
    }
}

/// Every optimizer, regularization, and architecture hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub norm: NormMode,
    pub dim: usize,
    pub conv: ConvConfig,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub label_smoothing: f64,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ModelKind::QMult,
            norm: NormMode::Batch,
            dim: 32,
            conv: ConvConfig::default(),
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 256,
            epochs: 100,
            label_smoothing: 0.1,
            seed: 1,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label smoothing {} not in [0,1)",
                self.label_smoothing
            )));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0,1)".into()));
        }
        let min_batch = if self.norm == NormMode::Batch { 2 } else { 1 };
        if self.batch_size < min_batch {
            return Err(Error::Config(format!(
                "batch size {} too small for norm mode {} (needs ≥ {min_batch})",
                self.batch_size, self.norm
            )));
        }
        if self.kind.has_conv() {
            self.conv.validate()?;
        }
        Ok(())
    }
}

/// One epoch's bookkeeping record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Pair-weighted mean training loss over the epoch.
    pub loss: f64,
    pub seconds: f64,
}

/// Format epoch logs as `epoch<TAB>loss<TAB>seconds` lines.
pub fn format_epoch_logs(logs: &[EpochLog]) -> String {
    let mut out = String::new();
    for log in logs {
        out.push_str(&format!("{}\t{:.6}\t{:.3}\n", log.epoch, log.loss, log.seconds));
    }
    out
}

/// Train a fresh model on the store's train split. Deterministic given the
/// config (the rayon thread count does not affect results).
pub fn fit(store: &TripleStore, config: &TrainConfig) -> Result<(ModelParams, Vec<EpochLog>)> {
    fit_with(store, config, |_, _| {})
}

/// [`fit`] with a per-epoch callback (used by the CLI for validation
/// tracking); the callback sees the log entry and the current parameters.
pub fn fit_with(
    store: &TripleStore,
    config: &TrainConfig,
    mut hook: impl FnMut(&EpochLog, &ModelParams),
) -> Result<(ModelParams, Vec<EpochLog>)> {
    config.validate()?;
    if !store.has_reciprocals() {
        return Err(Error::Contract(
            "KvsAll training needs a store built with reciprocal triples".into(),
        ));
    }

    let mut init_rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut params = init_params(
        store,
        config.dim,
        config.kind,
        config.norm,
        config.conv,
        &mut init_rng,
    )?;

    // Separate stream so training draws are independent of initialization.
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut adam: Vec<AdamState> = {
        let mut lens = Vec::new();
        params.visit_param_lens(|len| lens.push(len));
        lens.into_iter()
            .map(|len| AdamState::new(len, config.lr, config.beta1, config.beta2))
            .collect()
    };

    let mut pairs = store.distinct_train_pairs();
    if pairs.is_empty() {
        return Err(Error::Contract("train split is empty".into()));
    }
    let n = store.n_entities();
    let mut logs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        pairs.shuffle(&mut rng);

        // Batch boundaries; a trailing singleton is merged into the previous
        // batch when batch norm needs at least two rows.
        let mut bounds: Vec<(usize, usize)> = (0..pairs.len())
            .step_by(config.batch_size)
            .map(|start| (start, (start + config.batch_size).min(pairs.len())))
            .collect();
        if config.norm == NormMode::Batch && bounds.len() >= 2 {
            let (last_start, last_end) = *bounds.last().expect("nonempty");
            if last_end - last_start == 1 {
                bounds.pop();
                bounds.last_mut().expect("nonempty").1 = last_end;
                log::debug!("epoch {epoch}: merged trailing singleton batch");
            }
        }

        let mut loss_sum = 0.0;
        let mut pair_count = 0usize;
        for &(start, end) in &bounds {
            let batch = &pairs[start..end];
            let b = batch.len();

            let mut target = Tensor::zeros(&[b, n])?;
            for (i, &(h, r)) in batch.iter().enumerate() {
                let plane = store.kvsall_targets(h, r, config.label_smoothing);
                target.data_mut()[i * n..(i + 1) * n].copy_from_slice(&plane);
            }

            let fwd = params.forward_pairs(batch, Mode::Train, Some(&mut rng))?;
            let scores = fwd.all_scores(&params);
            let probs = sigmoid(&scores);
            let loss = bce_loss(&probs, &target)?;

            let g_probs = bce_backward(&probs, &target)?;
            let g_scores = sigmoid_backward(&probs, &g_probs);
            let grads = params.backward(&fwd, &g_scores)?;

            params.update_running_stats(&fwd);
            apply_adam(&mut params, &grads, &mut adam);

            loss_sum += loss * b as f64;
            pair_count += b;
        }

        let log = EpochLog {
            epoch,
            loss: loss_sum / pair_count as f64,
            seconds: started.elapsed().as_secs_f64(),
        };
        hook(&log, &params);
        logs.push(log);
    }

    Ok((params, logs))
}

fn apply_adam(params: &mut ModelParams, grads: &Gradients, adam: &mut [AdamState]) {
    let gslices = grads.slices();
    debug_assert_eq!(gslices.len(), adam.len());
    let mut i = 0;
    params.visit_params_mut(|buf| {
        adam[i].step(buf, gslices[i]);
        i += 1;
    });
}
