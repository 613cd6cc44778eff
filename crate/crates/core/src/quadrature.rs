//! Quadrature rules: Gauss-Legendre panels, adaptive Gauss-Kronrod,
//! Romberg, radial integrals over ℝⁿ and product rules on spheres.

use crate::error::{LabError, Result};
use std::f64::consts::PI;

/// Surface area of the unit sphere `S^{n-1} ⊂ ℝⁿ`.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / libm::tgamma(h)
}

/// Volume of the unit ball in ℝⁿ.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss rule for the weight `(1 - t²)^a` on `[-1, 1]` (Golub-Welsch).
pub fn gauss_gegenbauer(order: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    if a == 0.0 {
        return gauss_legendre(order);
    }
    let m = order;
    let mut jac = nalgebra::DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let kf = k as f64;
        let b = (kf * (kf + 2.0 * a) / (4.0 * (kf + a) * (kf + a) - 1.0)).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let mu0 = PI.sqrt() * libm::tgamma(a + 1.0) / libm::tgamma(a + 1.5);
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|j| (eig.eigenvalues[j], mu0 * eig.eigenvectors[(0, j)].powi(2)))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    // Symmetrize to remove eigen-solver noise.
    for j in 0..m / 2 {
        let (xa, wa) = pairs[j];
        let (xb, wb) = pairs[m - 1 - j];
        let xs = 0.5 * (xb - xa);
        let ws = 0.5 * (wa + wb);
        pairs[j] = (-xs, ws);
        pairs[m - 1 - j] = (xs, ws);
    }
    if m % 2 == 1 {
        pairs[m / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Composite Gauss-Legendre rule over consecutive panels `[b_k, b_{k+1}]`.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    pub fn new(breakpoints: &[f64], order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(breakpoints.len() * order);
        let mut weights = Vec::with_capacity(breakpoints.len() * order);
        for pair in breakpoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        PanelRule { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Globally adaptive Gauss-Kronrod integration of `f` on `[a, b]`.
///
/// Returns `(value, error_estimate)`; fails with [`LabError::Quadrature`]
/// when `max_intervals` is exhausted before `abs_tol + rel_tol·|I|` is met.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if parts.len() >= max_intervals {
            return Err(LabError::Quadrature { residual: err });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, pv, pe) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        if !(mid > lo && hi > mid) {
            return Err(LabError::Quadrature { residual: err });
        }
    }
    // Re-sum to shed the drift of the running updates.
    let total: f64 = parts.iter().map(|p| p.2).sum();
    let err: f64 = parts.iter().map(|p| p.3).sum();
    Ok((total, err))
}

/// Romberg integration: trapezoid sums on `2^k` intervals with Richardson
/// extrapolation. Returns `(value, error_estimate)`.
pub fn romberg<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_levels: usize) -> Result<(f64, f64)> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let h0 = b - a;
    let mut trap = 0.5 * h0 * (f(a) + f(b));
    rows.push(vec![trap]);
    for level in 1..=max_levels {
        let m = 1usize << (level - 1);
        let h = h0 / (2 * m) as f64;
        let mut s = 0.0;
        for i in 0..m {
            s += f(a + (2 * i + 1) as f64 * h);
        }
        trap = 0.5 * trap + h * s;
        let prev = rows.last().expect("row").clone();
        let mut row = vec![trap];
        let mut factor = 1.0;
        for (j, p) in prev.iter().enumerate() {
            factor *= 4.0;
            let r = row[j] + (row[j] - p) / (factor - 1.0);
            row.push(r);
        }
        let est = (row[level] - prev[level - 1]).abs();
        let val = row[level];
        rows.push(row);
        if level >= 4 && est <= tol * val.abs().max(1e-300) {
            return Ok((val, est));
        }
    }
    let last = rows.last().expect("row");
    let prev = &rows[rows.len() - 2];
    Err(LabError::Quadrature {
        residual: (last[last.len() - 1] - prev[prev.len() - 1]).abs(),
    })
}

/// `∫_{ℝⁿ} f(|x|) dx = |S^{n-1}| ∫_0^∞ f(r) r^{n-1} dr` for a radial
/// integrand, by adaptive Gauss-Kronrod on geometrically growing panels
/// `[0, s], [s, 2s], [2s, 4s], …`. The tail is truncated once a panel
/// contributes less than `1e-14` of the running total (twice in a row).
pub fn radial_integral<F: FnMut(f64) -> f64>(mut f: F, n: usize, scale: f64, rel_tol: f64) -> Result<f64> {
    let nf = n as f64;
    let mut g = |r: f64| f(r) * r.powf(nf - 1.0);
    let (mut total, _) = adaptive(&mut g, 0.0, scale, 0.0, rel_tol, 2000)?;
    let mut lo = scale;
    let mut small_runs = 0;
    for _ in 0..400 {
        let hi = 2.0 * lo;
        let (v, _) = adaptive(&mut g, lo, hi, 1e-300, rel_tol, 2000)?;
        total += v;
        lo = hi;
        if v.abs() < 1e-14 * total.abs() {
            small_runs += 1;
            if small_runs >= 2 {
                return Ok(sphere_area(n) * total);
            }
        } else {
            small_runs = 0;
        }
    }
    Err(LabError::Quadrature { residual: total.abs() })
}

/// Product quadrature on the unit sphere `S^{n-1} ⊂ ℝⁿ`: Gauss-Gegenbauer
/// in each polar angle and a uniform rule on the final circle. With
/// `order = m` it integrates polynomials of degree `2m - 1` exactly and
/// uses `2m · m^{n-2}` points.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    /// Flattened unit vectors, `dim` entries per point.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(dim: usize, order: usize) -> Self {
        assert!(dim >= 2 && order >= 1);
        let (points, weights) = Self::build(dim, order);
        SphereRule { dim, points, weights }
    }

    fn build(dim: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
        if dim == 2 {
            let k = 2 * order;
            let mut pts = Vec::with_capacity(2 * k);
            let w = 2.0 * PI / k as f64;
            for j in 0..k {
                // Offset by half a step so no point sits on an axis.
                let phi = 2.0 * PI * (j as f64 + 0.5) / k as f64;
                pts.push(phi.cos());
                pts.push(phi.sin());
            }
            return (pts, vec![w; k]);
        }
        let (sub_pts, sub_w) = Self::build(dim - 1, order);
        let (tx, tw) = gauss_gegenbauer(order, (dim as f64 - 3.0) / 2.0);
        let sub_count = sub_w.len();
        let mut pts = Vec::with_capacity(dim * sub_count * order);
        let mut wts = Vec::with_capacity(sub_count * order);
        for (t, wt) in tx.iter().zip(&tw) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for j in 0..sub_count {
                pts.push(*t);
                for k in 0..dim - 1 {
                    pts.push(s * sub_pts[j * (dim - 1) + k]);
                }
                wts.push(wt * sub_w[j]);
            }
        }
        (pts, wts)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}
