//! Unstable eigenpair `(μ₀, Z₀)` of `-Δ - pW^{p-1}` in the radial sector:
//! `-ΔZ₀ - pW^{p-1}Z₀ = -μ₀Z₀`, `‖Z₀‖_{L²} = 1`, `Z₀(0) > 0`.
//!
//! `μ₀` is computed twice, by shooting and by a Sturm-sequence bisection on
//! a finite-volume discretization, and the two must agree.

use super::{profile, Dimension};
use crate::error::{LabError, Result};
use crate::grid::RadialGrid;
use crate::interp::CubicSpline;
use crate::linalg::{sturm_count, tridiagonal_eigenvalue};
use crate::quadrature::sphere_area;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

/// Truncation radius of the eigenvalue problem.
pub const DEFAULT_R_MAX: f64 = 40.0;

const SHOOT_STEP: f64 = 1e-3;
const TABLE_STRIDE: usize = 10;
const CONSISTENCY_TOL: f64 = 1e-5;

#[derive(Serialize, Deserialize)]
struct SpectralFile {
    n: usize,
    mu0: f64,
    radii: Vec<f64>,
    values: Vec<f64>,
}

/// Tabulated ground state `Z₀` with its eigenvalue.
#[derive(Debug, Clone)]
pub struct SpectralData {
    dim: Dimension,
    mu0: f64,
    spline: CubicSpline,
    l2_norm: f64,
}

/// Both eigenvalue estimates and the number of negative eigenvalues of the
/// radial discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub mu_shooting: f64,
    pub mu_matrix: f64,
    pub negative_count: usize,
}

impl SpectralData {
    pub fn from_table(dim: Dimension, mu0: f64, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 4 {
            return Err(LabError::Parse("spectral table needs ≥ 4 matching radii and values".into()));
        }
        if radii[0] != 0.0 || !radii.windows(2).all(|w| w[1] > w[0]) {
            return Err(LabError::Parse("spectral radii must start at 0 and increase".into()));
        }
        if !(mu0 > 0.0) || !values.iter().all(|v| v.is_finite()) {
            return Err(LabError::Parse("spectral data must be finite with μ₀ > 0".into()));
        }
        let spline = CubicSpline::radial(radii, values);
        let l2_norm = table_l2_norm(&spline, dim);
        Ok(SpectralData { dim, mu0, spline, l2_norm })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    /// `‖Z₀‖_{L²(ℝⁿ)}` of the stored table.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    pub fn r_max(&self) -> f64 {
        *self.spline.knots().last().unwrap()
    }

    pub fn radii(&self) -> &[f64] {
        self.spline.knots()
    }

    pub fn values(&self) -> &[f64] {
        self.spline.values()
    }

    /// `Z₀(ρ)`, zero beyond the table.
    pub fn z0(&self, rho: f64) -> f64 {
        if rho > self.r_max() {
            0.0
        } else {
            self.spline.eval(rho)
        }
    }

    pub fn z0_derivative(&self, rho: f64) -> f64 {
        if rho > self.r_max() {
            0.0
        } else {
            self.spline.eval_with_derivative(rho).1
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SpectralFile {
            n: self.dim.n(),
            mu0: self.mu0,
            radii: self.radii().to_vec(),
            values: self.values().to_vec(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpectralFile = serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        SpectralData::from_table(Dimension::new(file.n)?, file.mu0, file.radii, file.values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn table_l2_norm(spline: &CubicSpline, dim: Dimension) -> f64 {
    let (x, w) = crate::quadrature::gauss_legendre(6);
    let knots = spline.knots();
    let mut s = 0.0;
    for k in knots.windows(2) {
        let (a, b) = (k[0], k[1]);
        let half = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            let r = a + half * (xi + 1.0);
            s += half * wi * spline.eval(r).powi(2) * r.powi(dim.n() as i32 - 1);
        }
    }
    (sphere_area(dim.n()) * s).sqrt()
}

// One RK4 step of Z' = P, P' = -(n-1)/r P + (μ - V) Z.
fn rk4_step(r: f64, z: f64, p: f64, h: f64, mu: f64, dim: Dimension) -> (f64, f64) {
    let nm1 = dim.nf() - 1.0;
    let rhs = |r: f64, z: f64, p: f64| (p, -nm1 / r * p + (mu - profile::potential(r, dim)) * z);
    let (k1z, k1p) = rhs(r, z, p);
    let (k2z, k2p) = rhs(r + 0.5 * h, z + 0.5 * h * k1z, p + 0.5 * h * k1p);
    let (k3z, k3p) = rhs(r + 0.5 * h, z + 0.5 * h * k2z, p + 0.5 * h * k2p);
    let (k4z, k4p) = rhs(r + h, z + h * k3z, p + h * k3p);
    (
        z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
        p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

// Regular solution with Z(0) = 1 from the series Z = 1 + c r², c = (μ-p)/(2n).
fn series_start(mu: f64, h: f64, dim: Dimension) -> (f64, f64) {
    let c = (mu - dim.p()) / (2.0 * dim.nf());
    (1.0 + c * h * h, 2.0 * c * h)
}

/// Outward shot; returns the samples `(Z, Z')` at `r = k h`, `k = 0..=steps`.
fn shoot(mu: f64, r_max: f64, h: f64, dim: Dimension, record: bool) -> (Vec<(f64, f64)>, (f64, f64)) {
    let steps = (r_max / h).round() as usize;
    let mut out = Vec::new();
    if record {
        out.reserve(steps + 1);
        out.push((1.0, 0.0));
    }
    let (mut z, mut p) = series_start(mu, h, dim);
    if record {
        out.push((z, p));
    }
    for k in 1..steps {
        let r = k as f64 * h;
        let (zn, pn) = rk4_step(r, z, p, h, mu, dim);
        z = zn;
        p = pn;
        // Rescale to keep growing modes finite.
        let s = z.abs().max(p.abs());
        if !record && s > 1e100 {
            z /= s;
            p /= s;
        }
        if record {
            out.push((z, p));
        }
    }
    (out, (z, p))
}

fn mismatch(mu: f64, r_max: f64, h: f64, dim: Dimension) -> f64 {
    let (_, (z, p)) = shoot(mu, r_max, h, dim, false);
    p + (mu.sqrt() + (dim.nf() - 1.0) / (2.0 * r_max)) * z
}

/// `μ₀` by shooting: bracket by scanning down from `p`, then bisection.
pub fn shooting_ground_state(dim: Dimension, r_max: f64, h: f64) -> Result<f64> {
    let mut hi = dim.p() * (1.0 - 1e-9);
    let mut f_hi = mismatch(hi, r_max, h, dim);
    let mut lo = hi;
    let mut found = false;
    for _ in 0..200 {
        lo = hi * 0.85;
        let f_lo = mismatch(lo, r_max, h, dim);
        if f_lo.signum() != f_hi.signum() {
            found = true;
            break;
        }
        hi = lo;
        f_hi = f_lo;
        if hi < 1e-6 {
            break;
        }
    }
    if !found {
        return Err(LabError::Bracket { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = mismatch(mid, r_max, h, dim);
        if f_mid.signum() == f_hi.signum() {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

// Symmetrized `-Δ_h - V` on a uniform grid with Dirichlet data at `r_max`.
fn radial_operator(dim: Dimension, r_max: f64, intervals: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = RadialGrid::uniform(dim.n(), r_max, intervals)?;
    let m = grid.len() - 1;
    let mut diag = Vec::with_capacity(m);
    let mut off = Vec::with_capacity(m.saturating_sub(1));
    for j in 0..m {
        let (_, d, up) = grid.laplacian_row(j);
        diag.push(-d - profile::potential(grid.nodes()[j], dim));
        if j + 1 < m {
            let (low_next, _, _) = grid.laplacian_row(j + 1);
            off.push(-(up * low_next).sqrt());
        }
    }
    Ok((diag, off))
}

/// `μ₀` from the lowest eigenvalue of the discretized operator at two
/// resolutions, Richardson-extrapolated; also the negative eigenvalue count.
pub fn matrix_ground_state(dim: Dimension, r_max: f64, intervals: usize) -> Result<(f64, usize)> {
    let (d1, o1) = radial_operator(dim, r_max, intervals)?;
    let (d2, o2) = radial_operator(dim, r_max, 2 * intervals)?;
    let e1 = tridiagonal_eigenvalue(&d1, &o1, 0, 1e-15);
    let e2 = tridiagonal_eigenvalue(&d2, &o2, 0, 1e-15);
    let negative = sturm_count(&d2, &o2, 0.0);
    Ok((-(4.0 * e2 - e1) / 3.0, negative))
}

/// Both eigenvalue estimates with the consistency check.
pub fn solve_spectrum(dim: Dimension) -> Result<SpectrumReport> {
    let mu_shooting = shooting_ground_state(dim, DEFAULT_R_MAX, SHOOT_STEP)?;
    let (mu_matrix, negative_count) = matrix_ground_state(dim, DEFAULT_R_MAX, 8000)?;
    let relative = (mu_shooting - mu_matrix).abs() / mu_shooting;
    if relative > CONSISTENCY_TOL {
        return Err(LabError::Consistency {
            shooting: mu_shooting,
            matrix: mu_matrix,
            relative,
        });
    }
    Ok(SpectrumReport {
        mu_shooting,
        mu_matrix,
        negative_count,
    })
}

/// Ground state `(μ₀, Z₀)` for `dim`, cached per dimension.
pub fn ground_state(dim: Dimension) -> Result<SpectralData> {
    static CACHE: OnceLock<Mutex<HashMap<usize, SpectralData>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(sd) = cache.lock().expect("spectral cache").get(&dim.n()) {
        return Ok(sd.clone());
    }
    let report = solve_spectrum(dim)?;
    let sd = build_profile(dim, report.mu_shooting, DEFAULT_R_MAX, SHOOT_STEP)?;
    cache.lock().expect("spectral cache").insert(dim.n(), sd.clone());
    Ok(sd)
}

// Outward shot to the matching radius, inward shot from `r_max` with the
// decaying asymptotics, glued continuously and normalized.
fn build_profile(dim: Dimension, mu: f64, r_max: f64, h: f64) -> Result<SpectralData> {
    let steps = (r_max / h).round() as usize;
    let (out, _) = shoot(mu, r_max, h, dim, true);
    let mut k_match = steps / 2;
    for (k, &(z, _)) in out.iter().enumerate().skip(1) {
        if z.abs() < 1e-3 || k >= steps / 2 {
            k_match = k;
            break;
        }
    }
    let sq = mu.sqrt();
    let nm1 = dim.nf() - 1.0;
    let mut z = vec![0.0; steps + 1];
    z[..=k_match].iter_mut().zip(&out).for_each(|(dst, src)| *dst = src.0);
    let mut zi = (-sq * r_max).exp() * r_max.powf(-nm1 / 2.0);
    let mut pi = -(sq + nm1 / (2.0 * r_max)) * zi;
    let mut inward = vec![0.0; steps + 1];
    inward[steps] = zi;
    for k in (k_match..steps).rev() {
        let r = (k + 1) as f64 * h;
        let (zn, pn) = rk4_step(r, zi, pi, -h, mu, dim);
        zi = zn;
        pi = pn;
        inward[k] = zi;
    }
    if inward[k_match] == 0.0 || !inward[k_match].is_finite() {
        return Err(LabError::Convergence("inward shot vanished at the matching radius".into()));
    }
    let scale = out[k_match].0 / inward[k_match];
    for k in k_match + 1..=steps {
        z[k] = scale * inward[k];
    }
    let radii: Vec<f64> = (0..=steps).step_by(TABLE_STRIDE).map(|k| k as f64 * h).collect();
    let values: Vec<f64> = (0..=steps).step_by(TABLE_STRIDE).map(|k| z[k]).collect();
    let raw = SpectralData::from_table(dim, mu, radii.clone(), values.clone())?;
    let norm = raw.l2_norm();
    SpectralData::from_table(dim, mu, radii, values.into_iter().map(|v| v / norm).collect())
}

/// `(∫|Z'|² - pW^{p-1}Z²) / ∫Z²` evaluated on the stored table.
pub fn rayleigh_quotient(sd: &SpectralData) -> f64 {
    let dim = sd.dim();
    let (x, w) = crate::quadrature::gauss_legendre(6);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in sd.radii().windows(2) {
        let half = 0.5 * (k[1] - k[0]);
        for (xi, wi) in x.iter().zip(&w) {
            let r = k[0] + half * (xi + 1.0);
            let (v, d) = sd.spline.eval_with_derivative(r);
            let jac = half * wi * r.powi(dim.n() as i32 - 1);
            num += jac * (d * d - profile::potential(r, dim) * v * v);
            den += jac * v * v;
        }
    }
    num / den
}

/// Sup norm of `(-Δ_h - pW^{p-1}) Z_{n+1}` on a uniform grid of `intervals`
/// cells over `[0, radius]`, excluding the boundary node.
pub fn zero_mode_residual(dim: Dimension, radius: f64, intervals: usize) -> Result<f64> {
    let grid = RadialGrid::uniform(dim.n(), radius, intervals)?;
    let z: Vec<f64> = grid.nodes().iter().map(|&r| profile::z_dilation(r, dim)).collect();
    let mut worst: f64 = 0.0;
    for j in 0..grid.len() - 1 {
        let (lo, d, up) = grid.laplacian_row(j);
        let lap = d * z[j] + up * z[j + 1] + if j > 0 { lo * z[j - 1] } else { 0.0 };
        let r = -lap - profile::potential(grid.nodes()[j], dim) * z[j];
        worst = worst.max(r.abs());
    }
    Ok(worst)
}
