//! Property tests for the hypercomplex kernels, plus the frozen octonion
//! basis table cross-checked against the recursive Cayley–Dickson oracle.

use proptest::prelude::*;

use hyperkge::algebra::{
    conjugate, inner, norm, oct_mul, quat_mul, unit_normalize, Algebra, HVec,
};
use hyperkge::reference;

fn hvec_strategy(algebra: Algebra, max_dim: usize) -> impl Strategy<Value = HVec> {
    let c = algebra.components();
    (1..=max_dim).prop_flat_map(move |d| {
        proptest::collection::vec(-1.0f64..1.0, c * d)
            .prop_map(move |data| HVec::from_data(algebra, d, data).unwrap())
    })
}

fn paired(algebra: Algebra, max_dim: usize) -> impl Strategy<Value = (HVec, HVec)> {
    let c = algebra.components();
    (1..=max_dim).prop_flat_map(move |d| {
        (
            proptest::collection::vec(-1.0f64..1.0, c * d),
            proptest::collection::vec(-1.0f64..1.0, c * d),
        )
            .prop_map(move |(a, b)| {
                (
                    HVec::from_data(algebra, d, a).unwrap(),
                    HVec::from_data(algebra, d, b).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn quat_norm_is_multiplicative((p, q) in paired(Algebra::Quaternion, 8)) {
        let prod = quat_mul(&p, &q).unwrap();
        let np = norm(&p);
        let nq = norm(&q);
        for (j, n) in norm(&prod).iter().enumerate() {
            prop_assert!((n - np[j] * nq[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn oct_norm_is_multiplicative((p, q) in paired(Algebra::Octonion, 8)) {
        let prod = oct_mul(&p, &q).unwrap();
        let np = norm(&p);
        let nq = norm(&q);
        for (j, n) in norm(&prod).iter().enumerate() {
            prop_assert!((n - np[j] * nq[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn inner_product_is_symmetric_and_bilinear((p, q) in paired(Algebra::Octonion, 6), s in -2.0f64..2.0) {
        prop_assert_eq!(inner(&p, &q).unwrap(), inner(&q, &p).unwrap());
        let scaled = HVec::from_data(
            Algebra::Octonion,
            p.dim(),
            p.data().iter().map(|v| v * s).collect(),
        ).unwrap();
        let lhs = inner(&scaled, &q).unwrap();
        let rhs = s * inner(&p, &q).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn octonions_are_alternative((p, q) in paired(Algebra::Octonion, 4)) {
        let pp = oct_mul(&p, &p).unwrap();
        let left = oct_mul(&pp, &q).unwrap();
        let right = oct_mul(&p, &oct_mul(&p, &q).unwrap()).unwrap();
        for (a, b) in left.data().iter().zip(right.data()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn quaternion_subalgebra_is_exact((p, q) in paired(Algebra::Quaternion, 6)) {
        let d = p.dim();
        let embed = |v: &HVec| {
            let mut data = v.data().to_vec();
            data.extend(std::iter::repeat(0.0).take(4 * d));
            HVec::from_data(Algebra::Octonion, d, data).unwrap()
        };
        let o = oct_mul(&embed(&p), &embed(&q)).unwrap();
        let h = quat_mul(&p, &q).unwrap();
        prop_assert_eq!(&o.data()[..4 * d], h.data());
        prop_assert!(o.data()[4 * d..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn oct_mul_agrees_with_recursive_cayley_dickson((p, q) in paired(Algebra::Octonion, 4)) {
        let d = p.dim();
        let prod = oct_mul(&p, &q).unwrap();
        for j in 0..d {
            let pj: Vec<f64> = (0..8).map(|c| p.data()[c * d + j]).collect();
            let qj: Vec<f64> = (0..8).map(|c| q.data()[c * d + j]).collect();
            let oracle = reference::cd_mul(&pj, &qj);
            for c in 0..8 {
                prop_assert!((prod.data()[c * d + j] - oracle[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_normalize_produces_unit_tuples(v in hvec_strategy(Algebra::Quaternion, 8)) {
        let u = unit_normalize(&v);
        for (j, n) in norm(&u).iter().enumerate() {
            let original = norm(&v)[j];
            if original > 1e-6 {
                prop_assert!((n - 1.0).abs() < 1e-9, "index {j}: norm {n}");
            }
        }
    }

    #[test]
    fn conjugation_is_an_involution_and_reverses_products((p, q) in paired(Algebra::Quaternion, 4)) {
        prop_assert_eq!(conjugate(&conjugate(&p)), p.clone());
        // (pq)* = q* p*
        let lhs = conjugate(&quat_mul(&p, &q).unwrap());
        let rhs = quat_mul(&conjugate(&q), &conjugate(&p)).unwrap();
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

/// Every basis product from the fast kernel, against both the recursive
/// construction and the frozen golden file.
#[test]
fn octonion_basis_table_matches_the_frozen_golden_file() {
    let golden = include_str!("data/octonion_table.txt");
    let oracle = reference::octonion_basis_table();

    let mut rendered = String::new();
    for i in 0..8 {
        let mut cells = Vec::new();
        for j in 0..8 {
            let mut x = [0.0; 8];
            let mut y = [0.0; 8];
            x[i] = 1.0;
            y[j] = 1.0;
            let prod = oct_mul(&HVec::oct(x), &HVec::oct(y)).unwrap();
            let nonzero: Vec<(usize, f64)> = prod
                .data()
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, v)| v != 0.0)
                .collect();
            assert_eq!(nonzero.len(), 1, "e{i}★e{j} must be a signed basis vector");
            let (k, v) = nonzero[0];
            assert!(v == 1.0 || v == -1.0);
            cells.push(format!("{}e{k}", if v > 0.0 { "+" } else { "-" }));

            // Signed-index encoding used by the oracle table.
            let want = oracle[i][j];
            let got = if v > 0.0 { (k + 1) as i8 } else { -((k + 1) as i8) };
            assert_eq!(got, want, "e{i}★e{j} disagrees with the construction oracle");
        }
        rendered.push_str(&cells.join(" "));
        rendered.push('\n');
    }
    assert_eq!(rendered, golden, "fast kernel diverged from the frozen table");
}

/// Hamilton's rule encoded through the public API, exactly.
#[test]
fn hamilton_rule_holds_exactly() {
    let e = |i: usize| {
        let mut q = [0.0; 4];
        q[i] = 1.0;
        HVec::quat(q[0], q[1], q[2], q[3])
    };
    let minus_one = HVec::quat(-1.0, 0.0, 0.0, 0.0);
    for i in 1..4 {
        assert_eq!(quat_mul(&e(i), &e(i)).unwrap(), minus_one);
    }
    let ij = quat_mul(&e(1), &e(2)).unwrap();
    assert_eq!(ij, e(3));
    assert_eq!(quat_mul(&ij, &e(3)).unwrap(), minus_one);
}
