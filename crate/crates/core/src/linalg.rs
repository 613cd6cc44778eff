//! Small dense and banded helpers.

/// Solve a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused), `upper[i]`
/// multiplies `x[i+1]` (`upper[last]` unused). Returns `None` on a zero pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return None;
    }
    c[0] = if n > 1 { upper[0] / piv } else { 0.0 };
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Number of eigenvalues strictly below `shift` of the symmetric tridiagonal
/// matrix with diagonal `diag` and off-diagonal `off` (`off[i]` couples
/// `i` and `i+1`). Sylvester inertia via the LDLᵀ pivots.
pub fn sturm_count(diag: &[f64], off: &[f64], shift: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0_f64;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - shift - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + shift.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based) of a symmetric tridiagonal
/// matrix, by bisection on the Sturm count.
pub fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], k: usize, rel_tol: f64) -> f64 {
    // Gershgorin bounds.
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_direct_product() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut rhs = [0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += lower[i] * x_true[i - 1];
            }
            if i < 3 {
                rhs[i] += upper[i] * x_true[i + 1];
            }
        }
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..4 {
            assert!((x[i] - x_true[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn sturm_bisection_recovers_laplacian_spectrum() {
        // Dirichlet second difference: eigenvalues 2 - 2 cos(kπ/(N+1)).
        let n = 50;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        for k in [0usize, 3, 49] {
            let exact = 2.0 - 2.0 * ((k as f64 + 1.0) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            let got = tridiagonal_eigenvalue(&diag, &off, k, 1e-15);
            assert!((got - exact).abs() < 1e-12, "k={k}: {got} vs {exact}");
        }
        assert_eq!(sturm_count(&diag, &off, 0.0), 0);
        assert_eq!(sturm_count(&diag, &off, 4.1), n);
    }
}
