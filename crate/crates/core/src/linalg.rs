//! Small dense matrix routines for the scoring and conv-head hot paths.
//!
//! All routines partition work by output row, and each output element is
//! accumulated in a fixed sequential order, so results are bitwise identical
//! for any rayon thread count.

use rayon::prelude::*;

/// Row count below which a routine stays single-threaded.
const PAR_THRESHOLD: usize = 8;

/// `out[n][x] = Σ_k a[n][k] * b[x][k]` — dot products of `a` rows with `b` rows.
/// `a` is `n×k`, `b` is `x×k`, `out` is `n×x`.
pub fn matmul_nt(a: &[f64], b: &[f64], n: usize, k: usize, x: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), x * k);
    debug_assert_eq!(out.len(), n * x);
    let row = |(i, out_row): (usize, &mut [f64])| {
        let ar = &a[i * k..(i + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let br = &b[j * k..(j + 1) * k];
            *o = dot(ar, br);
        }
    };
    if n >= PAR_THRESHOLD {
        out.par_chunks_mut(x).enumerate().for_each(row);
    } else {
        out.chunks_mut(x).enumerate().for_each(row);
    }
}

/// `out[n][m] = Σ_k a[n][k] * b[k][m]` — plain row-major product.
/// `a` is `n×k`, `b` is `k×m`, `out` is `n×m`.
pub fn matmul_nn(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(out.len(), n * m);
    let row = |(i, out_row): (usize, &mut [f64])| {
        out_row.fill(0.0);
        let ar = &a[i * k..(i + 1) * k];
        for (kk, &av) in ar.iter().enumerate() {
            if av != 0.0 {
                let br = &b[kk * m..(kk + 1) * m];
                for (o, &bv) in out_row.iter_mut().zip(br) {
                    *o += av * bv;
                }
            }
        }
    };
    if n >= PAR_THRESHOLD {
        out.par_chunks_mut(m).enumerate().for_each(row);
    } else {
        out.chunks_mut(m).enumerate().for_each(row);
    }
}

/// `out[k][m] = Σ_n a[n][k] * b[n][m]` — transpose-first product.
/// `a` is `n×k`, `b` is `n×m`, `out` is `k×m`.
pub fn matmul_tn(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), n * m);
    debug_assert_eq!(out.len(), k * m);
    let row = |(kk, out_row): (usize, &mut [f64])| {
        out_row.fill(0.0);
        for i in 0..n {
            let av = a[i * k + kk];
            if av != 0.0 {
                let br = &b[i * m..(i + 1) * m];
                for (o, &bv) in out_row.iter_mut().zip(br) {
                    *o += av * bv;
                }
            }
        }
    };
    if k >= PAR_THRESHOLD {
        out.par_chunks_mut(m).enumerate().for_each(row);
    } else {
        out.chunks_mut(m).enumerate().for_each(row);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_products_agree_with_hand_results() {
        // a = [[1,2],[3,4]], b rows = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut out = [0.0; 4];
        matmul_nt(&a, &b, 2, 2, 2, &mut out);
        assert_eq!(out, [17.0, 23.0, 39.0, 53.0]);

        matmul_nn(&a, &b, 2, 2, 2, &mut out);
        assert_eq!(out, [19.0, 22.0, 43.0, 50.0]);

        matmul_tn(&a, &b, 2, 2, 2, &mut out);
        assert_eq!(out, [26.0, 30.0, 38.0, 44.0]);
    }

    #[test]
    fn routes_agree_on_random_data() {
        let n = 13;
        let k = 7;
        let m = 11;
        let a: Vec<f64> = (0..n * k).map(|i| ((i * 37 % 19) as f64) - 9.0).collect();
        let b: Vec<f64> = (0..k * m).map(|i| ((i * 53 % 23) as f64) - 11.0).collect();
        let mut nn = vec![0.0; n * m];
        matmul_nn(&a, &b, n, k, m, &mut nn);
        // Same product through matmul_nt with b transposed.
        let mut bt = vec![0.0; m * k];
        for i in 0..k {
            for j in 0..m {
                bt[j * k + i] = b[i * m + j];
            }
        }
        let mut nt = vec![0.0; n * m];
        matmul_nt(&a, &bt, n, k, m, &mut nt);
        for (x, y) in nn.iter().zip(&nt) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
