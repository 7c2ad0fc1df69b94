//! Scoring contracts: agreement with the algebra-level oracles, the gated
//! reduction chain, the all-tails fast path, and gradient correctness of
//! every scoring function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use hyperkge::algebra::{self, Algebra, HVec};
use hyperkge::model::{
    init_with_sizes, ConvConfig, ModelKind, ModelParams, NormMode,
};
use hyperkge::nn::{bce_backward, bce_loss, grad_check, sigmoid, sigmoid_backward, Mode, Tensor};
use hyperkge::reference;

const N_ENTITIES: usize = 7;
const N_RELATIONS: usize = 5;

fn no_dropout() -> ConvConfig {
    ConvConfig {
        filters: 2,
        kernel_size: 3,
        dropout_input: 0.0,
        dropout_feature: 0.0,
        dropout_hidden: 0.0,
    }
}

fn make(kind: ModelKind, norm: NormMode, dim: usize, seed: u64) -> ModelParams {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    init_with_sizes(N_ENTITIES, N_RELATIONS, dim, kind, norm, no_dropout(), &mut rng).unwrap()
}

/// Force the conv head to emit an all-ones gate: zero kernels, unit bias.
fn force_unit_gate(params: &mut ModelParams) {
    let head = params.conv.as_mut().unwrap();
    head.kernels.data_mut().fill(0.0);
    head.w.data_mut().fill(0.0);
    head.b.fill(1.0);
}

fn entity_hvec(params: &ModelParams, id: u32) -> HVec {
    params.entities.hvec(params.kind.algebra(), id)
}

fn relation_hvec(params: &ModelParams, id: u32) -> HVec {
    params.relations.hvec(params.kind.algebra(), id)
}

#[test]
fn qmult_identity_and_hamilton_examples() {
    let mut params = make(ModelKind::QMult, NormMode::None, 1, 1);
    // h = r = t = 1
    params.entities.row_mut(0).copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
    params.relations.row_mut(0).copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
    assert_eq!(params.score(0, 0, 0, Mode::Eval).unwrap(), 1.0);

    // h = i, r = j, t = k  →  ⟨i⊗j, k⟩ = ⟨k, k⟩ = 1
    params.entities.row_mut(1).copy_from_slice(&[0.0, 1.0, 0.0, 0.0]);
    params.relations.row_mut(1).copy_from_slice(&[0.0, 0.0, 1.0, 0.0]);
    params.entities.row_mut(2).copy_from_slice(&[0.0, 0.0, 0.0, 1.0]);
    assert_eq!(params.score(1, 1, 2, Mode::Eval).unwrap(), 1.0);
}

#[test]
fn qmult_matches_algebra_expansion() {
    let params = make(ModelKind::QMult, NormMode::None, 3, 7);
    for (h, r, t) in [(0u32, 0u32, 1u32), (2, 3, 4), (5, 1, 6)] {
        let got = params.score(h, r, t, Mode::Eval).unwrap();
        let want = algebra::quat_inner(
            &algebra::quat_mul(&entity_hvec(&params, h), &relation_hvec(&params, r)).unwrap(),
            &entity_hvec(&params, t),
        )
        .unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn omult_identity_head_gives_squared_norm() {
    let mut params = make(ModelKind::OMult, NormMode::None, 2, 3);
    let width = 8 * 2;
    let mut id_row = vec![0.0; width];
    for j in 0..2 {
        id_row[j] = 1.0; // real plane = 1 at every dimension index
    }
    params.entities.row_mut(0).copy_from_slice(&id_row);
    // t := same row as relation 2
    let r_row = params.relations.row(2).to_vec();
    params.entities.row_mut(1).copy_from_slice(&r_row);
    let got = params.score(0, 2, 1, Mode::Eval).unwrap();
    let want: f64 = r_row.iter().map(|v| v * v).sum();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn omult_matches_cayley_dickson_oracle() {
    let params = make(ModelKind::OMult, NormMode::None, 2, 11);
    let d = 2;
    for (h, r, t) in [(0u32, 0u32, 1u32), (3, 4, 2), (6, 2, 5)] {
        let got = params.score(h, r, t, Mode::Eval).unwrap();
        let hrow = params.entities.row(h);
        let rrow = params.relations.row(r);
        let trow = params.entities.row(t);
        let mut want = 0.0;
        for j in 0..d {
            let hx: Vec<f64> = (0..8).map(|c| hrow[c * d + j]).collect();
            let rx: Vec<f64> = (0..8).map(|c| rrow[c * d + j]).collect();
            let prod = reference::cd_mul(&hx, &rx);
            for c in 0..8 {
                want += prod[c] * trow[c * d + j];
            }
        }
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn omult_on_quaternion_subalgebra_matches_qmult() {
    let d = 3;
    let mut oparams = make(ModelKind::OMult, NormMode::None, d, 5);
    let qparams = make(ModelKind::QMult, NormMode::None, d, 5);
    // Copy the quaternion tables into the first four octonion planes and
    // zero the rest.
    for i in 0..N_ENTITIES as u32 {
        let src = qparams.entities.row(i).to_vec();
        let dst = oparams.entities.row_mut(i);
        dst.fill(0.0);
        dst[..4 * d].copy_from_slice(&src);
    }
    for i in 0..N_RELATIONS as u32 {
        let src = qparams.relations.row(i).to_vec();
        let dst = oparams.relations.row_mut(i);
        dst.fill(0.0);
        dst[..4 * d].copy_from_slice(&src);
    }
    for (h, r, t) in [(0u32, 1u32, 2u32), (4, 0, 3), (6, 4, 0)] {
        let o = oparams.score(h, r, t, Mode::Eval).unwrap();
        let q = qparams.score(h, r, t, Mode::Eval).unwrap();
        assert!((o - q).abs() < 1e-12);
    }
}

#[test]
fn conv_gate_shape_and_forced_ones() {
    let d = 4;
    let mut params = make(ModelKind::ConvQ, NormMode::None, d, 9);
    let gate = params.conv_gate(0, 0, Mode::Eval).unwrap();
    assert_eq!(gate.algebra(), Algebra::Quaternion);
    assert_eq!(gate.dim(), d);

    force_unit_gate(&mut params);
    let gate = params.conv_gate(2, 1, Mode::Eval).unwrap();
    assert!(gate.data().iter().all(|&g| g == 1.0));
}

#[test]
fn conv_gate_missing_head_is_an_error() {
    let params = make(ModelKind::QMult, NormMode::None, 2, 1);
    assert!(params.conv_gate(0, 0, Mode::Eval).is_err());
}

#[test]
fn conv_gate_agrees_with_naive_conv_oracle() {
    let d = 4;
    let params = make(ModelKind::ConvQ, NormMode::None, d, 21);
    let (h, r) = (3u32, 2u32);
    let gate = params.conv_gate(h, r, Mode::Eval).unwrap();

    // Recompute by hand: stacked image → naive conv → relu → affine → relu.
    let head = params.conv.as_ref().unwrap();
    let c = 4;
    let mut image = Tensor::zeros(&[1, 1, 2 * c, d]).unwrap();
    image.data_mut()[..c * d].copy_from_slice(params.entities.row(h));
    image.data_mut()[c * d..].copy_from_slice(params.relations.row(r));
    let conv = reference::conv2d_naive(&image, &head.kernels, 1, 1);
    let flat: Vec<f64> = conv.data().iter().map(|&v| v.max(0.0)).collect();
    let m = c * d;
    let mut want = head.b.clone();
    for (k, &fv) in flat.iter().enumerate() {
        for j in 0..m {
            want[j] += fv * head.w.data()[k * m + j];
        }
    }
    for w in want.iter_mut() {
        *w = w.max(0.0);
    }
    for (g, w) in gate.data().iter().zip(&want) {
        assert!((g - w).abs() < 1e-10, "{g} vs {w}");
    }
}

#[test]
fn convq_with_unit_gate_reduces_to_qmult() {
    let d = 4;
    let mut conv = make(ModelKind::ConvQ, NormMode::None, d, 13);
    force_unit_gate(&mut conv);
    let plain = {
        let mut p = make(ModelKind::QMult, NormMode::None, d, 13);
        p.entities = conv.entities.clone();
        p.relations = conv.relations.clone();
        p
    };
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for _ in 0..100 {
        let h = rng.gen_range(0..N_ENTITIES as u32);
        let r = rng.gen_range(0..N_RELATIONS as u32);
        let t = rng.gen_range(0..N_ENTITIES as u32);
        let a = conv.score(h, r, t, Mode::Eval).unwrap();
        let b = plain.score(h, r, t, Mode::Eval).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn convq_reduces_to_complex_and_real_forms() {
    let d = 5;
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    for _ in 0..100 {
        let mut params = make(ModelKind::ConvQ, NormMode::None, d, rng.gen());
        force_unit_gate(&mut params);
        // Zero the j/k planes of every row.
        for i in 0..N_ENTITIES as u32 {
            params.entities.row_mut(i)[2 * d..].fill(0.0);
        }
        for i in 0..N_RELATIONS as u32 {
            params.relations.row_mut(i)[2 * d..].fill(0.0);
        }
        let h = rng.gen_range(0..N_ENTITIES as u32);
        let r = rng.gen_range(0..N_RELATIONS as u32);
        let t = rng.gen_range(0..N_ENTITIES as u32);
        let got = params.score(h, r, t, Mode::Eval).unwrap();
        let ones = vec![1.0; d];
        let want = reference::complex_form_score(
            &ones,
            &ones,
            &params.entities.row(h)[..d],
            &params.entities.row(h)[d..2 * d],
            &params.relations.row(r)[..d],
            &params.relations.row(r)[d..2 * d],
            &params.entities.row(t)[..d],
            &params.entities.row(t)[d..2 * d],
        );
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");

        // Zeroing the remaining imaginary plane leaves the triple product.
        for i in 0..N_ENTITIES as u32 {
            params.entities.row_mut(i)[d..].fill(0.0);
        }
        for i in 0..N_RELATIONS as u32 {
            params.relations.row_mut(i)[d..].fill(0.0);
        }
        let got = params.score(h, r, t, Mode::Eval).unwrap();
        let want = reference::triple_product_score(
            &params.entities.row(h)[..d],
            &params.relations.row(r)[..d],
            &params.entities.row(t)[..d],
        );
        assert!((got - want).abs() < 1e-10);
    }
}

#[test]
fn convo_with_unit_gate_reduces_to_omult() {
    let d = 3;
    let mut conv = make(ModelKind::ConvO, NormMode::None, d, 17);
    force_unit_gate(&mut conv);
    let plain = {
        let mut p = make(ModelKind::OMult, NormMode::None, d, 17);
        p.entities = conv.entities.clone();
        p.relations = conv.relations.clone();
        p
    };
    for (h, r, t) in [(0u32, 0u32, 0u32), (1, 2, 3), (6, 4, 5)] {
        let a = conv.score(h, r, t, Mode::Eval).unwrap();
        let b = plain.score(h, r, t, Mode::Eval).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn convo_subalgebra_matches_convq() {
    let d = 2;
    let mut convo = make(ModelKind::ConvO, NormMode::None, d, 23);
    force_unit_gate(&mut convo);
    let mut convq = make(ModelKind::ConvQ, NormMode::None, d, 23);
    force_unit_gate(&mut convq);
    // Zero planes x4..x7 of the octonion model and copy the quaternion
    // planes across.
    for i in 0..N_ENTITIES as u32 {
        let src = convq.entities.row(i).to_vec();
        let dst = convo.entities.row_mut(i);
        dst.fill(0.0);
        dst[..4 * d].copy_from_slice(&src);
    }
    for i in 0..N_RELATIONS as u32 {
        let src = convq.relations.row(i).to_vec();
        let dst = convo.relations.row_mut(i);
        dst.fill(0.0);
        dst[..4 * d].copy_from_slice(&src);
    }
    for (h, r, t) in [(0u32, 1u32, 2u32), (3, 0, 6)] {
        let o = convo.score(h, r, t, Mode::Eval).unwrap();
        let q = convq.score(h, r, t, Mode::Eval).unwrap();
        assert!((o - q).abs() < 1e-10);
    }
}

#[test]
fn all_tails_matches_per_triple_loop() {
    for kind in [ModelKind::QMult, ModelKind::OMult, ModelKind::ConvQ, ModelKind::ConvO] {
        let params = make(kind, NormMode::None, 2, 41);
        for (h, r) in [(0u32, 0u32), (3, 4)] {
            let plane = params.score_all_tails(h, r, Mode::Eval).unwrap();
            assert_eq!(plane.len(), N_ENTITIES);
            for t in 0..N_ENTITIES as u32 {
                let s = params.score(h, r, t, Mode::Eval).unwrap();
                assert!((plane[t as usize] - s).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn all_tails_is_permutation_equivariant() {
    let params = make(ModelKind::QMult, NormMode::None, 3, 43);
    let plane = params.score_all_tails(2, 1, Mode::Eval).unwrap();

    // Swap two non-head entity rows; their scores must swap with them.
    let mut swapped = params.clone();
    let a = swapped.entities.row(4).to_vec();
    let b = swapped.entities.row(5).to_vec();
    swapped.entities.row_mut(4).copy_from_slice(&b);
    swapped.entities.row_mut(5).copy_from_slice(&a);
    let plane2 = swapped.score_all_tails(2, 1, Mode::Eval).unwrap();
    assert_eq!(plane[4], plane2[5]);
    assert_eq!(plane[5], plane2[4]);
    for x in [0usize, 1, 2, 3, 6] {
        assert_eq!(plane[x], plane2[x]);
    }
}

#[test]
fn unit_mode_is_invariant_to_relation_scale() {
    let mut params = make(ModelKind::QMult, NormMode::Unit, 4, 47);
    let base = params.score(0, 1, 2, Mode::Eval).unwrap();
    for v in params.relations.row_mut(1) {
        *v *= 7.0;
    }
    let scaled = params.score(0, 1, 2, Mode::Eval).unwrap();
    assert!((base - scaled).abs() < 1e-10, "{base} vs {scaled}");
}

#[test]
fn batch_eval_scaling_preserves_ranking() {
    let mut params = make(ModelKind::QMult, NormMode::Batch, 4, 53);
    // Use O(1) embeddings so the batch-norm epsilon is negligible, and give
    // the normalizers statistics consistent with the tables.
    for v in params.entities.data_mut() {
        *v *= 10.0;
    }
    for v in params.relations.data_mut() {
        *v *= 10.0;
    }
    let set_stats = |bn: &mut hyperkge::nn::BatchNorm1d, table: &[f64], width: usize| {
        let n = table.len() / width;
        for col in 0..width {
            let mut mean = 0.0;
            for row in 0..n {
                mean += table[row * width + col];
            }
            mean /= n as f64;
            let mut var = 0.0;
            for row in 0..n {
                let d = table[row * width + col] - mean;
                var += d * d;
            }
            bn.running_mean[col] = mean;
            bn.running_var[col] = var / n as f64;
        }
    };
    let width = 16;
    let etable = params.entities.data().to_vec();
    let rtable = params.relations.data().to_vec();
    set_stats(params.bn_head.as_mut().unwrap(), &etable, width);
    set_stats(params.bn_rel.as_mut().unwrap(), &rtable, width);

    let base = params.score_all_tails(1, 2, Mode::Eval).unwrap();

    let lambda = 3.0;
    for v in params.entities.data_mut() {
        *v *= lambda;
    }
    let bn = params.bn_head.as_mut().unwrap();
    for m in bn.running_mean.iter_mut() {
        *m *= lambda;
    }
    for v in bn.running_var.iter_mut() {
        *v *= lambda * lambda;
    }
    let scaled = params.score_all_tails(1, 2, Mode::Eval).unwrap();

    for (s, b) in scaled.iter().zip(&base) {
        assert!((s - lambda * b).abs() < 1e-4 * b.abs().max(1.0), "{s} vs {}", lambda * b);
    }
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap());
        idx
    };
    assert_eq!(order(&base), order(&scaled));
}

#[test]
fn init_is_deterministic_and_reasonably_scaled() {
    let mut rng1 = ChaCha20Rng::seed_from_u64(1);
    let mut rng2 = ChaCha20Rng::seed_from_u64(1);
    let a = init_with_sizes(120, 10, 4, ModelKind::QMult, NormMode::Batch, no_dropout(), &mut rng1)
        .unwrap();
    let b = init_with_sizes(120, 10, 4, ModelKind::QMult, NormMode::Batch, no_dropout(), &mut rng2)
        .unwrap();
    assert_eq!(a, b);

    let data = a.entities.data();
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let std = (data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / data.len() as f64).sqrt();
    assert!((0.05..=0.15).contains(&std), "sample std {std}");

    assert!(a.conv.is_none());
    let o = init_with_sizes(10, 4, 2, ModelKind::OMult, NormMode::Unit, no_dropout(), &mut rng1)
        .unwrap();
    assert!(o.conv.is_none() && o.bn_head.is_none());
    assert!(
        init_with_sizes(10, 4, 0, ModelKind::QMult, NormMode::None, no_dropout(), &mut rng1)
            .is_err()
    );
}

#[test]
fn out_of_range_ids_are_rejected() {
    let params = make(ModelKind::QMult, NormMode::None, 2, 1);
    assert!(params.score(99, 0, 0, Mode::Eval).is_err());
    assert!(params.score(0, 99, 0, Mode::Eval).is_err());
    assert!(params.score(0, 0, 99, Mode::Eval).is_err());
}

/// Gradient of the per-triple score w.r.t. every parameter, checked by
/// central differences, for each model kind and normalization regime.
#[test]
fn score_gradients_pass_finite_difference_check() {
    for kind in [ModelKind::QMult, ModelKind::OMult, ModelKind::ConvQ, ModelKind::ConvO] {
        for norm in [NormMode::None, NormMode::Unit, NormMode::Batch] {
            for dim in [1usize, 4] {
                for seed in 0..2u64 {
                    let params = make(kind, norm, dim, 1000 + seed);
                    let err = score_grad_error(&params, 1, 2, 3);
                    assert!(
                        err < 1e-4,
                        "{kind} {norm} d={dim} seed={seed}: max rel err {err}"
                    );
                }
            }
        }
    }
}

fn score_grad_error(params: &ModelParams, h: u32, r: u32, t: u32) -> f64 {
    // Analytic gradient: one-hot score-plane gradient through backward.
    let fwd = params
        .forward_pairs(&[(h, r)], Mode::Eval, None::<&mut ChaCha20Rng>)
        .unwrap();
    let mut grad_scores = Tensor::zeros(&[1, params.n_entities()]).unwrap();
    grad_scores.data_mut()[t as usize] = 1.0;
    let grads = params.backward(&fwd, &grad_scores).unwrap();

    let flat = params.flat_params();
    let f = |x: &[f64]| {
        let mut p = params.clone();
        p.set_flat_params(x).unwrap();
        p.score(h, r, t, Mode::Eval).unwrap()
    };
    grad_check(f, &flat, &grads.flat(), 1e-5)
}

/// Full KvsAll training-step gradient (train-mode batch norm included),
/// checked end to end through sigmoid and the cross-entropy.
#[test]
fn batch_loss_gradient_passes_finite_difference_check() {
    for kind in [ModelKind::QMult, ModelKind::ConvO] {
        for norm in [NormMode::Batch, NormMode::Unit] {
            let params = make(kind, norm, 2, 77);
            let pairs = [(0u32, 1u32), (2, 0), (4, 3)];
            let n = params.n_entities();
            let mut target = Tensor::zeros(&[pairs.len(), n]).unwrap();
            for (i, v) in target.data_mut().iter_mut().enumerate() {
                *v = if i % 3 == 0 { 0.925 } else { 0.025 };
            }

            let loss_of = |x: &[f64]| {
                let mut p = params.clone();
                p.set_flat_params(x).unwrap();
                let fwd = p
                    .forward_pairs(&pairs, Mode::Train, None::<&mut ChaCha20Rng>)
                    .unwrap();
                let probs = sigmoid(&fwd.all_scores(&p));
                bce_loss(&probs, &target).unwrap()
            };

            let fwd = params
                .forward_pairs(&pairs, Mode::Train, None::<&mut ChaCha20Rng>)
                .unwrap();
            let probs = sigmoid(&fwd.all_scores(&params));
            let g_probs = bce_backward(&probs, &target).unwrap();
            let g_scores = sigmoid_backward(&probs, &g_probs);
            let grads = params.backward(&fwd, &g_scores).unwrap();

            let err = grad_check(loss_of, &params.flat_params(), &grads.flat(), 1e-5);
            assert!(err < 1e-4, "{kind} {norm}: max rel err {err}");
        }
    }
}
