//! Quaternion and octonion vector kernels.
//!
//! A [`HVec`] is a d-dimensional vector over ℍ or 𝕆 stored as C planar real
//! component planes (C = 4 or 8), laid out plane-major: `data[c * d + j]` is
//! component `c` of dimension index `j`. Products act element-wise per
//! dimension index, so a d-dimensional vector behaves like d independent
//! hypercomplex numbers sharing storage.
//!
//! The octonion product is built by the Cayley–Dickson doubling of the
//! quaternions: `(p1, p2) ★ (q1, q2) = (p1⊗q1 − q̄2⊗p2, q2⊗p1 + p2⊗q̄1)`.
//! Restricted to the first four planes it coincides with the Hamilton
//! product exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard added to norms before division in [`unit_normalize`].
pub const NORM_EPS: f64 = 1e-12;

/// Which hypercomplex algebra a vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algebra {
    Quaternion,
    Octonion,
}

impl Algebra {
    /// Number of real component planes: 4 for ℍ, 8 for 𝕆.
    pub fn components(self) -> usize {
        match self {
            Algebra::Quaternion => 4,
            Algebra::Octonion => 8,
        }
    }
}

impl std::fmt::Display for Algebra {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algebra::Quaternion => write!(f, "quaternion"),
            Algebra::Octonion => write!(f, "octonion"),
        }
    }
}

/// A d-dimensional vector over ℍ or 𝕆, planar storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HVec {
    algebra: Algebra,
    dim: usize,
    data: Vec<f64>,
}

impl HVec {
    /// Zero vector of the given dimension.
    pub fn zeros(algebra: Algebra, dim: usize) -> Self {
        HVec {
            algebra,
            dim,
            data: vec![0.0; algebra.components() * dim],
        }
    }

    /// Wrap planar data; `data.len()` must equal `components * dim`.
    pub fn from_data(algebra: Algebra, dim: usize, data: Vec<f64>) -> Result<Self> {
        let want = algebra.components() * dim;
        if data.len() != want {
            return Err(Error::Shape(format!(
                "{algebra} vector of dim {dim} needs {want} values, got {}",
                data.len()
            )));
        }
        Ok(HVec { algebra, dim, data })
    }

    /// Build from per-component planes, each of length d.
    pub fn from_planes(algebra: Algebra, planes: &[&[f64]]) -> Result<Self> {
        let c = algebra.components();
        if planes.len() != c {
            return Err(Error::Shape(format!(
                "{algebra} vector needs {c} planes, got {}",
                planes.len()
            )));
        }
        let dim = planes[0].len();
        if planes.iter().any(|p| p.len() != dim) {
            return Err(Error::Shape("component planes differ in length".into()));
        }
        let mut data = Vec::with_capacity(c * dim);
        for p in planes {
            data.extend_from_slice(p);
        }
        Ok(HVec { algebra, dim, data })
    }

    /// A single quaternion as a d=1 vector.
    pub fn quat(a: f64, b: f64, c: f64, d: f64) -> Self {
        HVec {
            algebra: Algebra::Quaternion,
            dim: 1,
            data: vec![a, b, c, d],
        }
    }

    /// A single octonion as a d=1 vector.
    pub fn oct(x: [f64; 8]) -> Self {
        HVec {
            algebra: Algebra::Octonion,
            dim: 1,
            data: x.to_vec(),
        }
    }

    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Component plane `c` as a slice of length d.
    pub fn plane(&self, c: usize) -> &[f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    fn check_same_shape(&self, other: &HVec) -> Result<()> {
        if self.algebra != other.algebra {
            return Err(Error::Algebra(format!(
                "cannot combine {} with {}",
                self.algebra, other.algebra
            )));
        }
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

/// Hamilton product on a single 4-tuple.
#[inline]
pub(crate) fn qmul4(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    let [a1, b1, c1, d1] = p;
    let [a2, b2, c2, d2] = q;
    [
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ]
}

#[inline]
fn qconj4(p: [f64; 4]) -> [f64; 4] {
    [p[0], -p[1], -p[2], -p[3]]
}

#[inline]
fn add4(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3]]
}

#[inline]
fn sub4(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    [p[0] - q[0], p[1] - q[1], p[2] - q[2], p[3] - q[3]]
}

/// Octonion product on a single 8-tuple via Cayley–Dickson over ℍ.
#[inline]
pub(crate) fn omul8(p: [f64; 8], q: [f64; 8]) -> [f64; 8] {
    let p1 = [p[0], p[1], p[2], p[3]];
    let p2 = [p[4], p[5], p[6], p[7]];
    let q1 = [q[0], q[1], q[2], q[3]];
    let q2 = [q[4], q[5], q[6], q[7]];
    let lo = sub4(qmul4(p1, q1), qmul4(qconj4(q2), p2));
    let hi = add4(qmul4(q2, p1), qmul4(p2, qconj4(q1)));
    [lo[0], lo[1], lo[2], lo[3], hi[0], hi[1], hi[2], hi[3]]
}

#[inline]
fn oconj8(p: [f64; 8]) -> [f64; 8] {
    [p[0], -p[1], -p[2], -p[3], -p[4], -p[5], -p[6], -p[7]]
}

/// Element-wise product of two planar rows of length `components * d`,
/// written into `out`. Shared by [`HVec`] ops and the batched model path.
pub(crate) fn mul_into(algebra: Algebra, d: usize, p: &[f64], q: &[f64], out: &mut [f64]) {
    match algebra {
        Algebra::Quaternion => {
            for j in 0..d {
                let pj = [p[j], p[d + j], p[2 * d + j], p[3 * d + j]];
                let qj = [q[j], q[d + j], q[2 * d + j], q[3 * d + j]];
                let r = qmul4(pj, qj);
                out[j] = r[0];
                out[d + j] = r[1];
                out[2 * d + j] = r[2];
                out[3 * d + j] = r[3];
            }
        }
        Algebra::Octonion => {
            for j in 0..d {
                let mut pj = [0.0; 8];
                let mut qj = [0.0; 8];
                for c in 0..8 {
                    pj[c] = p[c * d + j];
                    qj[c] = q[c * d + j];
                }
                let r = omul8(pj, qj);
                for c in 0..8 {
                    out[c * d + j] = r[c];
                }
            }
        }
    }
}

/// Accumulate gradients of the element-wise product `out = p ★ q` into
/// `grad_p` and `grad_q`, given the upstream gradient `grad_out`.
///
/// Uses the composition-algebra adjoints ⟨a★b, c⟩ = ⟨a, c★b̄⟩ = ⟨b, ā★c⟩,
/// which hold in both ℍ and 𝕆.
pub(crate) fn mul_backward_into(
    algebra: Algebra,
    d: usize,
    p: &[f64],
    q: &[f64],
    grad_out: &[f64],
    grad_p: &mut [f64],
    grad_q: &mut [f64],
) {
    match algebra {
        Algebra::Quaternion => {
            for j in 0..d {
                let pj = [p[j], p[d + j], p[2 * d + j], p[3 * d + j]];
                let qj = [q[j], q[d + j], q[2 * d + j], q[3 * d + j]];
                let gj = [
                    grad_out[j],
                    grad_out[d + j],
                    grad_out[2 * d + j],
                    grad_out[3 * d + j],
                ];
                let gp = qmul4(gj, qconj4(qj));
                let gq = qmul4(qconj4(pj), gj);
                for c in 0..4 {
                    grad_p[c * d + j] += gp[c];
                    grad_q[c * d + j] += gq[c];
                }
            }
        }
        Algebra::Octonion => {
            for j in 0..d {
                let mut pj = [0.0; 8];
                let mut qj = [0.0; 8];
                let mut gj = [0.0; 8];
                for c in 0..8 {
                    pj[c] = p[c * d + j];
                    qj[c] = q[c * d + j];
                    gj[c] = grad_out[c * d + j];
                }
                let gp = omul8(gj, oconj8(qj));
                let gq = omul8(oconj8(pj), gj);
                for c in 0..8 {
                    grad_p[c * d + j] += gp[c];
                    grad_q[c * d + j] += gq[c];
                }
            }
        }
    }
}

/// Element-wise Hamilton product of two quaternion vectors.
pub fn quat_mul(p: &HVec, q: &HVec) -> Result<HVec> {
    p.check_same_shape(q)?;
    if p.algebra != Algebra::Quaternion {
        return Err(Error::Algebra("quat_mul requires quaternion operands".into()));
    }
    let mut out = HVec::zeros(Algebra::Quaternion, p.dim);
    mul_into(Algebra::Quaternion, p.dim, &p.data, &q.data, &mut out.data);
    Ok(out)
}

/// Element-wise octonion product of two octonion vectors.
pub fn oct_mul(p: &HVec, q: &HVec) -> Result<HVec> {
    p.check_same_shape(q)?;
    if p.algebra != Algebra::Octonion {
        return Err(Error::Algebra("oct_mul requires octonion operands".into()));
    }
    let mut out = HVec::zeros(Algebra::Octonion, p.dim);
    mul_into(Algebra::Octonion, p.dim, &p.data, &q.data, &mut out.data);
    Ok(out)
}

/// Product dispatching on the shared algebra tag.
pub fn hmul(p: &HVec, q: &HVec) -> Result<HVec> {
    p.check_same_shape(q)?;
    let mut out = HVec::zeros(p.algebra, p.dim);
    mul_into(p.algebra, p.dim, &p.data, &q.data, &mut out.data);
    Ok(out)
}

/// Inner product: sum over dimensions and components of element-wise products.
pub fn inner(p: &HVec, q: &HVec) -> Result<f64> {
    p.check_same_shape(q)?;
    Ok(p.data.iter().zip(&q.data).map(|(a, b)| a * b).sum())
}

/// Quaternion inner product ⟨a₁a₂⟩+⟨b₁b₂⟩+⟨c₁c₂⟩+⟨d₁d₂⟩.
pub fn quat_inner(p: &HVec, q: &HVec) -> Result<f64> {
    if p.algebra != Algebra::Quaternion || q.algebra != Algebra::Quaternion {
        return Err(Error::Algebra("quat_inner requires quaternion operands".into()));
    }
    inner(p, q)
}

/// Octonion inner product over 8 component planes.
pub fn oct_inner(p: &HVec, q: &HVec) -> Result<f64> {
    if p.algebra != Algebra::Octonion || q.algebra != Algebra::Octonion {
        return Err(Error::Algebra("oct_inner requires octonion operands".into()));
    }
    inner(p, q)
}

/// Sign-flip of all imaginary planes.
pub fn conjugate(v: &HVec) -> HVec {
    let mut out = v.clone();
    for c in 1..v.algebra.components() {
        for x in &mut out.data[c * v.dim..(c + 1) * v.dim] {
            *x = -*x;
        }
    }
    out
}

/// Per-index Euclidean norm across components; a real plane of length d.
pub fn norm(v: &HVec) -> Vec<f64> {
    let c = v.algebra.components();
    (0..v.dim)
        .map(|j| {
            (0..c)
                .map(|k| {
                    let x = v.data[k * v.dim + j];
                    x * x
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Normalize each dimension index's component tuple to unit Euclidean norm.
/// Zero tuples pass through unchanged (the norm is guarded by [`NORM_EPS`]).
pub fn unit_normalize(v: &HVec) -> HVec {
    let mut out = v.clone();
    unit_normalize_row(v.algebra.components(), v.dim, &mut out.data);
    out
}

/// In-place row form of [`unit_normalize`] on a planar `components * d` slice.
pub(crate) fn unit_normalize_row(components: usize, d: usize, row: &mut [f64]) {
    for j in 0..d {
        let mut sq = 0.0;
        for c in 0..components {
            let x = row[c * d + j];
            sq += x * x;
        }
        let scale = 1.0 / (sq.sqrt() + NORM_EPS);
        for c in 0..components {
            row[c * d + j] *= scale;
        }
    }
}

/// Accumulate the gradient of [`unit_normalize_row`] into `grad_in`,
/// given the pre-normalization row `x` and upstream gradient `grad_out`.
pub(crate) fn unit_normalize_backward_row(
    components: usize,
    d: usize,
    x: &[f64],
    grad_out: &[f64],
    grad_in: &mut [f64],
) {
    for j in 0..d {
        let mut sq = 0.0;
        let mut dot = 0.0;
        for c in 0..components {
            let xi = x[c * d + j];
            sq += xi * xi;
            dot += grad_out[c * d + j] * xi;
        }
        let n = sq.sqrt();
        let denom = n + NORM_EPS;
        let inv = 1.0 / denom;
        // d(x/ (n+eps)) pulls a rank-one correction along x.
        let corr = if n > 0.0 { dot / (n * denom * denom) } else { 0.0 };
        for c in 0..components {
            grad_in[c * d + j] += grad_out[c * d + j] * inv - x[c * d + j] * corr;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn basis_quat(i: usize) -> HVec {
        let mut q = [0.0; 4];
        q[i] = 1.0;
        HVec::quat(q[0], q[1], q[2], q[3])
    }

    fn basis_oct(i: usize) -> HVec {
        let mut o = [0.0; 8];
        o[i] = 1.0;
        HVec::oct(o)
    }

    #[test]
    fn quat_identity_is_neutral() {
        let e = HVec::quat(1.0, 0.0, 0.0, 0.0);
        let q = HVec::quat(0.3, -1.5, 2.0, 9.0);
        assert_eq!(quat_mul(&e, &q).unwrap(), q);
        assert_eq!(quat_mul(&q, &e).unwrap(), q);
    }

    #[test]
    fn hamilton_rule() {
        let i = basis_quat(1);
        let j = basis_quat(2);
        let k = basis_quat(3);
        let minus_one = HVec::quat(-1.0, 0.0, 0.0, 0.0);
        assert_eq!(quat_mul(&i, &j).unwrap(), k);
        assert_eq!(quat_mul(&i, &i).unwrap(), minus_one);
        assert_eq!(quat_mul(&j, &j).unwrap(), minus_one);
        assert_eq!(quat_mul(&k, &k).unwrap(), minus_one);
        // i j k = -1
        let ij = quat_mul(&i, &j).unwrap();
        assert_eq!(quat_mul(&ij, &k).unwrap(), minus_one);
    }

    #[test]
    fn quat_mul_is_not_commutative() {
        let i = basis_quat(1);
        let j = basis_quat(2);
        let k = basis_quat(3);
        let minus_k = HVec::quat(0.0, 0.0, 0.0, -1.0);
        assert_eq!(quat_mul(&i, &j).unwrap(), k);
        assert_eq!(quat_mul(&j, &i).unwrap(), minus_k);
    }

    #[test]
    fn quat_mul_worked_example() {
        let p = HVec::quat(1.0, 2.0, 3.0, 4.0);
        let q = HVec::quat(5.0, 6.0, 7.0, 8.0);
        let r = quat_mul(&p, &q).unwrap();
        assert_eq!(r.data(), &[-60.0, 12.0, 30.0, 24.0]);
    }

    #[test]
    fn quat_inner_examples() {
        let e = HVec::quat(1.0, 0.0, 0.0, 0.0);
        assert_eq!(quat_inner(&e, &e).unwrap(), 1.0);
        let p = HVec::quat(1.0, 2.0, 3.0, 4.0);
        let q = HVec::quat(5.0, 6.0, 7.0, 8.0);
        assert_eq!(quat_inner(&p, &q).unwrap(), 70.0);
        let z = HVec::zeros(Algebra::Quaternion, 1);
        assert_eq!(quat_inner(&p, &z).unwrap(), 0.0);
    }

    #[test]
    fn oct_identity_and_inner() {
        let e = basis_oct(0);
        let o = HVec::oct([0.5, -1.0, 2.0, 3.0, -4.0, 5.5, 6.0, -7.0]);
        assert_eq!(oct_mul(&e, &o).unwrap(), o);
        let e3 = basis_oct(3);
        assert_eq!(oct_inner(&e3, &e3).unwrap(), 1.0);
        let ones = HVec::oct([1.0; 8]);
        assert_eq!(oct_inner(&ones, &ones).unwrap(), 8.0);
        let ramp = HVec::oct([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(oct_inner(&ramp, &ones).unwrap(), 36.0);
    }

    #[test]
    fn oct_basis_products() {
        let e1 = basis_oct(1);
        let e2 = basis_oct(2);
        let e3 = basis_oct(3);
        let e4 = basis_oct(4);
        let e5 = basis_oct(5);
        assert_eq!(oct_mul(&e1, &e2).unwrap(), e3);
        assert_eq!(oct_mul(&e1, &e4).unwrap(), e5);
        for i in 1..8 {
            let ei = basis_oct(i);
            let sq = oct_mul(&ei, &ei).unwrap();
            assert_eq!(sq.data()[0], -1.0);
            assert!(sq.data()[1..].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn oct_subalgebra_matches_quat() {
        let p = HVec::oct([0.4, -1.2, 3.0, 0.7, 0.0, 0.0, 0.0, 0.0]);
        let q = HVec::oct([2.0, 0.5, -0.3, 1.1, 0.0, 0.0, 0.0, 0.0]);
        let o = oct_mul(&p, &q).unwrap();
        let pq = quat_mul(
            &HVec::quat(0.4, -1.2, 3.0, 0.7),
            &HVec::quat(2.0, 0.5, -0.3, 1.1),
        )
        .unwrap();
        assert_eq!(&o.data()[..4], pq.data());
        assert!(o.data()[4..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn oct_norm_multiplicativity_example() {
        let p = HVec::oct([1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let q = HVec::oct([0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = oct_mul(&p, &q).unwrap();
        assert_abs_diff_eq!(norm(&r)[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(norm(&p)[0] * norm(&q)[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn oct_non_associativity_and_alternativity() {
        let e1 = basis_oct(1);
        let e2 = basis_oct(2);
        let e4 = basis_oct(4);
        let left = oct_mul(&oct_mul(&e1, &e2).unwrap(), &e4).unwrap();
        let right = oct_mul(&e1, &oct_mul(&e2, &e4).unwrap()).unwrap();
        assert_ne!(left, right);

        let p = HVec::oct([0.3, -0.8, 0.2, 1.4, -0.6, 0.9, -1.1, 0.5]);
        let q = HVec::oct([1.0, 0.4, -0.7, 0.1, 0.8, -0.2, 0.6, -0.9]);
        let pp_q = oct_mul(&oct_mul(&p, &p).unwrap(), &q).unwrap();
        let p_pq = oct_mul(&p, &oct_mul(&p, &q).unwrap()).unwrap();
        for (a, b) in pp_q.data().iter().zip(p_pq.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn unit_normalize_examples() {
        let v = HVec::quat(3.0, 4.0, 0.0, 0.0);
        let u = unit_normalize(&v);
        assert_abs_diff_eq!(u.data()[0], 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(u.data()[1], 0.8, epsilon = 1e-9);

        let again = unit_normalize(&u);
        for (a, b) in again.data().iter().zip(u.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }

        let z = HVec::zeros(Algebra::Quaternion, 3);
        assert_eq!(unit_normalize(&z), z);
    }

    #[test]
    fn conjugate_and_norm() {
        let v = HVec::quat(1.0, 2.0, 3.0, 4.0);
        assert_eq!(conjugate(&v).data(), &[1.0, -2.0, -3.0, -4.0]);
        let w = HVec::quat(3.0, 4.0, 0.0, 0.0);
        assert_eq!(norm(&w)[0], 5.0);
        assert_abs_diff_eq!(
            norm(&v)[0] * norm(&v)[0],
            quat_inner(&v, &v).unwrap(),
            epsilon = 1e-12
        );
        assert_eq!(quat_inner(&v, &v).unwrap(), 30.0);
    }

    #[test]
    fn shape_and_tag_errors() {
        let p = HVec::zeros(Algebra::Quaternion, 2);
        let q = HVec::zeros(Algebra::Quaternion, 3);
        assert!(matches!(quat_mul(&p, &q), Err(Error::Shape(_))));
        let o = HVec::zeros(Algebra::Octonion, 2);
        assert!(matches!(quat_mul(&p, &o), Err(Error::Algebra(_))));
        assert!(matches!(oct_mul(&p, &p), Err(Error::Algebra(_))));
        assert!(matches!(inner(&p, &q), Err(Error::Shape(_))));
    }

    #[test]
    fn inner_is_symmetric_and_bilinear() {
        let p = HVec::quat(0.2, -1.0, 0.5, 2.0);
        let q = HVec::quat(1.5, 0.3, -0.7, 0.9);
        let r = HVec::quat(-0.4, 0.8, 1.2, -2.2);
        assert_eq!(inner(&p, &q).unwrap(), inner(&q, &p).unwrap());
        let sum = HVec::from_data(
            Algebra::Quaternion,
            1,
            q.data().iter().zip(r.data()).map(|(a, b)| 2.0 * a + b).collect(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            inner(&p, &sum).unwrap(),
            2.0 * inner(&p, &q).unwrap() + inner(&p, &r).unwrap(),
            epsilon = 1e-12
        );
    }
}
