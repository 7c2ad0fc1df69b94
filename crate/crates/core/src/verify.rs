//! Fast self-check battery behind the `verify` command: algebra identities,
//! kernel and scoring gradients, the gated reduction chain, and the ranking
//! oracle. Designed to finish in seconds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::algebra::{self, Algebra, HVec};
use crate::eval::{evaluate, EvalMode};
use crate::graph::{build_store, RawTriple};
use crate::model::{init_with_sizes, ConvConfig, ModelKind, NormMode};
use crate::nn::{self, grad_check, Mode, Tensor};
use crate::reference;
use crate::train::{fit, TrainConfig};

/// Outcome of one check group.
#[derive(Debug, Clone)]
pub struct GroupResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn group(name: &'static str, run: impl FnOnce() -> Result<String, String>) -> GroupResult {
    match run() {
        Ok(detail) => GroupResult { name, passed: true, detail },
        Err(detail) => GroupResult { name, passed: false, detail },
    }
}

/// Run every check group; all groups run even if earlier ones fail.
pub fn run_battery() -> Vec<GroupResult> {
    vec![
        group("hamilton-identities", hamilton_identities),
        group("octonion-table", octonion_table),
        group("norm-multiplicativity", norm_multiplicativity),
        group("kernel-gradients", kernel_gradients),
        group("score-gradients", score_gradients),
        group("reduction-chain", reduction_chain),
        group("ranking-oracle", ranking_oracle),
    ]
}

fn basis_quat(i: usize) -> HVec {
    let mut q = [0.0; 4];
    q[i] = 1.0;
    HVec::quat(q[0], q[1], q[2], q[3])
}

fn hamilton_identities() -> Result<String, String> {
    let minus_one = HVec::quat(-1.0, 0.0, 0.0, 0.0);
    for i in 1..4 {
        let sq = algebra::quat_mul(&basis_quat(i), &basis_quat(i)).map_err(|e| e.to_string())?;
        if sq != minus_one {
            return Err(format!("basis {i} squared is {:?}", sq.data()));
        }
    }
    let ij = algebra::quat_mul(&basis_quat(1), &basis_quat(2)).map_err(|e| e.to_string())?;
    if ij != basis_quat(3) {
        return Err("i·j is not k".into());
    }
    let ji = algebra::quat_mul(&basis_quat(2), &basis_quat(1)).map_err(|e| e.to_string())?;
    if ji != HVec::quat(0.0, 0.0, 0.0, -1.0) {
        return Err("j·i is not −k".into());
    }
    let ijk = algebra::quat_mul(&ij, &basis_quat(3)).map_err(|e| e.to_string())?;
    if ijk != minus_one {
        return Err("i·j·k is not −1".into());
    }
    let p = HVec::quat(1.0, 2.0, 3.0, 4.0);
    let q = HVec::quat(5.0, 6.0, 7.0, 8.0);
    let pq = algebra::quat_mul(&p, &q).map_err(|e| e.to_string())?;
    if pq.data() != [-60.0, 12.0, 30.0, 24.0] {
        return Err(format!("worked product gave {:?}", pq.data()));
    }
    Ok("all identities exact".into())
}

fn octonion_table() -> Result<String, String> {
    let oracle = reference::octonion_basis_table();
    for i in 0..8 {
        for j in 0..8 {
            let mut x = [0.0; 8];
            let mut y = [0.0; 8];
            x[i] = 1.0;
            y[j] = 1.0;
            let prod =
                algebra::oct_mul(&HVec::oct(x), &HVec::oct(y)).map_err(|e| e.to_string())?;
            let mut signed = 0i8;
            for (k, &v) in prod.data().iter().enumerate() {
                if v != 0.0 {
                    if signed != 0 || (v != 1.0 && v != -1.0) {
                        return Err(format!("e{i}★e{j} is not a signed basis vector"));
                    }
                    signed = if v > 0.0 { (k + 1) as i8 } else { -((k + 1) as i8) };
                }
            }
            if signed != oracle[i][j] {
                return Err(format!(
                    "e{i}★e{j}: kernel {signed}, construction {}",
                    oracle[i][j]
                ));
            }
        }
    }
    Ok("64 basis products match the construction".into())
}

fn norm_multiplicativity() -> Result<String, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let algebra = if trial % 2 == 0 { Algebra::Quaternion } else { Algebra::Octonion };
        let c = algebra.components();
        let d = rng.gen_range(1..=8);
        let sample = |rng: &mut ChaCha20Rng| {
            let data: Vec<f64> = (0..c * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            HVec::from_data(algebra, d, data).unwrap()
        };
        let p = sample(&mut rng);
        let q = sample(&mut rng);
        let prod = algebra::hmul(&p, &q).map_err(|e| e.to_string())?;
        let np = algebra::norm(&p);
        let nq = algebra::norm(&q);
        for (j, n) in algebra::norm(&prod).iter().enumerate() {
            worst = worst.max((n - np[j] * nq[j]).abs());
        }
    }
    if worst < 1e-10 {
        Ok(format!("worst deviation {worst:.2e} over 1000 samples"))
    } else {
        Err(format!("norm deviation {worst:.2e} exceeds 1e-10"))
    }
}

fn kernel_gradients() -> Result<String, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(34);
    let mut worst = 0.0f64;

    // conv2d forward against the naive oracle, then its gradient.
    let input = Tensor::new(&[1, 1, 5, 5], (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .map_err(|e| e.to_string())?;
    let kernels = Tensor::new(&[2, 1, 3, 3], (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .map_err(|e| e.to_string())?;
    let fast = nn::conv2d(&input, &kernels, 1, 1).map_err(|e| e.to_string())?;
    let naive = reference::conv2d_naive(&input, &kernels, 1, 1);
    for (a, b) in fast.data().iter().zip(naive.data()) {
        if (a - b).abs() > 1e-12 {
            return Err("conv2d disagrees with the nested-loop oracle".into());
        }
    }
    let (gi, gk) = nn::conv2d_backward(
        &input,
        &kernels,
        &Tensor::new(&[1, 2, 5, 5], vec![1.0; 50]).unwrap(),
        1,
        1,
    )
    .map_err(|e| e.to_string())?;
    let f_in = |x: &[f64]| {
        let t = Tensor::new(&[1, 1, 5, 5], x.to_vec()).unwrap();
        nn::conv2d(&t, &kernels, 1, 1).unwrap().data().iter().sum::<f64>()
    };
    worst = worst.max(grad_check(f_in, input.data(), gi.data(), 1e-5));
    let f_k = |x: &[f64]| {
        let t = Tensor::new(&[2, 1, 3, 3], x.to_vec()).unwrap();
        nn::conv2d(&input, &t, 1, 1).unwrap().data().iter().sum::<f64>()
    };
    worst = worst.max(grad_check(f_k, kernels.data(), gk.data(), 1e-5));

    // batch norm (train mode) w.r.t. input.
    let bn = nn::BatchNorm1d::new(3);
    let x = Tensor::new(&[4, 3], (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .map_err(|e| e.to_string())?;
    let (out, cache) = bn.forward(&x, Mode::Train).map_err(|e| e.to_string())?;
    let g_out = Tensor::new(&[4, 3], (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .map_err(|e| e.to_string())?;
    let (gx, _, _) = bn.backward(&cache, &g_out).map_err(|e| e.to_string())?;
    let _ = out;
    let f_bn = |v: &[f64]| {
        let t = Tensor::new(&[4, 3], v.to_vec()).unwrap();
        let (y, _) = bn.forward(&t, Mode::Train).unwrap();
        y.data().iter().zip(g_out.data()).map(|(a, b)| a * b).sum::<f64>()
    };
    worst = worst.max(grad_check(f_bn, x.data(), gx.data(), 1e-5));

    // bce ∘ sigmoid composite.
    let logits: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let target = Tensor::new(&[1, 6], vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
    let p = nn::sigmoid(&Tensor::new(&[1, 6], logits.clone()).unwrap());
    let g = nn::sigmoid_backward(&p, &nn::bce_backward(&p, &target).unwrap());
    let f_bce = |x: &[f64]| {
        let pr = nn::sigmoid(&Tensor::new(&[1, 6], x.to_vec()).unwrap());
        nn::bce_loss(&pr, &target).unwrap()
    };
    worst = worst.max(grad_check(f_bce, &logits, g.data(), 1e-6));

    if worst < 1e-4 {
        Ok(format!("worst relative error {worst:.2e}"))
    } else {
        Err(format!("kernel gradient error {worst:.2e} exceeds 1e-4"))
    }
}

fn score_gradients() -> Result<String, String> {
    let conv = ConvConfig {
        filters: 2,
        kernel_size: 3,
        dropout_input: 0.0,
        dropout_feature: 0.0,
        dropout_hidden: 0.0,
    };
    let mut worst = 0.0f64;
    for kind in [ModelKind::QMult, ModelKind::OMult, ModelKind::ConvQ, ModelKind::ConvO] {
        for seed in 0..5u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(100 + seed);
            let params = init_with_sizes(6, 4, 4, kind, NormMode::None, conv, &mut rng)
                .map_err(|e| e.to_string())?;
            let (h, r, t) = (1u32, 2u32, 3u32);
            let fwd = params
                .forward_pairs(&[(h, r)], Mode::Eval, None::<&mut ChaCha20Rng>)
                .map_err(|e| e.to_string())?;
            let mut g_scores = Tensor::zeros(&[1, 6]).unwrap();
            g_scores.data_mut()[t as usize] = 1.0;
            let grads = params.backward(&fwd, &g_scores).map_err(|e| e.to_string())?;
            let f = |x: &[f64]| {
                let mut p = params.clone();
                p.set_flat_params(x).unwrap();
                p.score(h, r, t, Mode::Eval).unwrap()
            };
            worst = worst.max(grad_check(f, &params.flat_params(), &grads.flat(), 1e-5));
        }
    }
    if worst < 1e-4 {
        Ok(format!("worst relative error {worst:.2e} across 4 models × 5 seeds"))
    } else {
        Err(format!("score gradient error {worst:.2e} exceeds 1e-4"))
    }
}

fn reduction_chain() -> Result<String, String> {
    let conv = ConvConfig {
        filters: 2,
        kernel_size: 3,
        dropout_input: 0.0,
        dropout_feature: 0.0,
        dropout_hidden: 0.0,
    };
    let d = 4;
    let mut rng = ChaCha20Rng::seed_from_u64(55);
    for _ in 0..100 {
        let mut gated = init_with_sizes(5, 3, d, ModelKind::ConvQ, NormMode::None, conv, &mut rng)
            .map_err(|e| e.to_string())?;
        let head = gated.conv.as_mut().expect("conv head");
        head.kernels.data_mut().fill(0.0);
        head.w.data_mut().fill(0.0);
        head.b.fill(1.0);
        let mut plain =
            init_with_sizes(5, 3, d, ModelKind::QMult, NormMode::None, conv, &mut rng)
                .map_err(|e| e.to_string())?;
        plain.entities = gated.entities.clone();
        plain.relations = gated.relations.clone();

        let (h, r, t) = (
            rng.gen_range(0..5u32),
            rng.gen_range(0..3u32),
            rng.gen_range(0..5u32),
        );
        let a = gated.score(h, r, t, Mode::Eval).map_err(|e| e.to_string())?;
        let b = plain.score(h, r, t, Mode::Eval).map_err(|e| e.to_string())?;
        if (a - b).abs() >= 1e-10 {
            return Err(format!("unit gate: gated {a} vs plain {b}"));
        }

        // j,k planes zeroed: the four-term multilinear form.
        for i in 0..5u32 {
            gated.entities.row_mut(i)[2 * d..].fill(0.0);
        }
        for i in 0..3u32 {
            gated.relations.row_mut(i)[2 * d..].fill(0.0);
        }
        let got = gated.score(h, r, t, Mode::Eval).map_err(|e| e.to_string())?;
        let ones = vec![1.0; d];
        let want = reference::complex_form_score(
            &ones,
            &ones,
            &gated.entities.row(h)[..d],
            &gated.entities.row(h)[d..2 * d],
            &gated.relations.row(r)[..d],
            &gated.relations.row(r)[d..2 * d],
            &gated.entities.row(t)[..d],
            &gated.entities.row(t)[d..2 * d],
        );
        if (got - want).abs() >= 1e-10 {
            return Err(format!("complex form: {got} vs {want}"));
        }

        // All imaginary planes zeroed: the real triple product.
        for i in 0..5u32 {
            gated.entities.row_mut(i)[d..].fill(0.0);
        }
        for i in 0..3u32 {
            gated.relations.row_mut(i)[d..].fill(0.0);
        }
        let got = gated.score(h, r, t, Mode::Eval).map_err(|e| e.to_string())?;
        let want = reference::triple_product_score(
            &gated.entities.row(h)[..d],
            &gated.relations.row(r)[..d],
            &gated.entities.row(t)[..d],
        );
        if (got - want).abs() >= 1e-10 {
            return Err(format!("triple product: {got} vs {want}"));
        }
    }
    Ok("gate, complex, and real reductions agree on 100 instances".into())
}

fn ranking_oracle() -> Result<String, String> {
    let t = |h: &str, r: &str, x: &str| RawTriple::new(h, r, x);
    let train = vec![
        t("a", "r", "b"),
        t("b", "r", "c"),
        t("c", "r", "d"),
        t("d", "r", "a"),
        t("a", "s", "c"),
        t("b", "s", "d"),
    ];
    let store = build_store(&train, &[t("c", "s", "a")], &[t("d", "s", "b")], true);
    let config = TrainConfig {
        kind: ModelKind::QMult,
        norm: NormMode::Batch,
        dim: 4,
        lr: 0.05,
        batch_size: 16,
        epochs: 40,
        label_smoothing: 0.0,
        seed: 1,
        ..TrainConfig::default()
    };
    let (params, _) = fit(&store, &config).map_err(|e| e.to_string())?;
    for (mode, tail_only) in [(EvalMode::HeadAndTail, false), (EvalMode::TailOnly, true)] {
        let report = evaluate(&[&params], &store, mode).map_err(|e| e.to_string())?;
        let brute =
            reference::brute_force_ranks(&[&params], &store, tail_only).map_err(|e| e.to_string())?;
        let mrr: f64 =
            brute.iter().map(|q| 1.0 / q.rank as f64).sum::<f64>() / brute.len() as f64;
        if report.n_test != brute.len() || (report.mrr - mrr).abs() >= 1e-12 {
            return Err(format!("{mode}: evaluator {} vs oracle {mrr}", report.mrr));
        }
    }
    Ok("filtered ranks match the per-candidate oracle".into())
}
