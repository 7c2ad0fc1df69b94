//! Finite-difference gradient checking.

/// Compare an analytic gradient against central finite differences of a
/// scalar function, returning the maximum relative error
/// `|g_a − g_fd| / max(1, |g_a|, |g_fd|)` over all coordinates.
pub fn grad_check<F>(mut f: F, params: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "grad_check: shape mismatch");
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + h;
        let plus = f(&work);
        work[i] = orig - h;
        let minus = f(&work);
        work[i] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let ga = analytic[i];
        let err = (ga - fd).abs() / 1.0f64.max(ga.abs()).max(fd.abs());
        if err > worst {
            worst = err;
        }
    }
    worst
}
