//! Orthogonal decomposition `u = W_{ξ,λ} + a Z_{0,ξ,λ} + φ` with
//! `∫φ η_K((x-ξ)/λ) Z_{i,ξ,λ} = 0` for `i = 0..n+1`.
//!
//! In the variable `x = ξ + λy` the conditions read
//! `F_i = λ^{n/2}∫ũ φ_i - λ C^W_i - a C^Z_i = 0` with `ũ(y) = u(ξ+λy)`,
//! `φ_i = η(|y|/K) Z_i`, `C^W_i = ∫W φ_i` and `C^Z_i = ∫Z₀ φ_i`. All integrals
//! are radial quadratures of angular moments of `ũ`.

use super::FieldSampler;
use crate::error::{LabError, Result};
use crate::kernel::{profile, BubbleParams, Dimension, SpectralData};
use crate::quadrature::{gauss_gegenbauer, gauss_legendre, sphere_area, SphereRule};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const DEFAULT_K: f64 = 20.0;
pub const DEFAULT_TOL_ORTH: f64 = 1e-10;

/// Which conditions are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// All `n+2` conditions in `(a, ξ, λ)`.
    Full,
    /// `ξ` pinned at the sampler's symmetry center; conditions `0` and `n+1`
    /// in `(a, λ)`.
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub k: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// `None` picks `Radial` for PDE snapshots and `Full` otherwise.
    pub mode: Option<FitMode>,
    /// Order of the product sphere rule for samplers without a symmetry center.
    pub sphere_order: usize,
    /// Smallest accepted row ratio `1 / Σ_{j≠i}|J_ij|/√|J_ii J_jj|`.
    pub min_dominance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            k: DEFAULT_K,
            tol: DEFAULT_TOL_ORTH,
            max_iter: 50,
            mode: None,
            sphere_order: 4,
            min_dominance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusNorm {
    pub inner: f64,
    pub outer: f64,
    /// `λ^{(n-2)/2} sup |φ|` over sample points with `inner ≤ |y| ≤ outer`.
    pub weighted_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub params: BubbleParams,
    /// `F_0 … F_{n+1}` at `params`.
    pub residuals: Vec<f64>,
    pub error_field_norms: Vec<AnnulusNorm>,
    pub iterations: usize,
    pub converged: bool,
    pub mode: FitMode,
    /// Smallest row dominance ratio of the last Jacobian.
    pub dominance: f64,
    /// `max|F_i|` re-evaluated with an independent quadrature.
    pub certificate: f64,
    /// Size of the cancelling terms in `F`; tolerances apply to `max(1, scale)·tol`.
    pub scale: f64,
    pub failure: Option<String>,
}

impl DecompositionResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Certificate within `10·tol`, relative to `scale` when that exceeds one.
    pub fn certified(&self, tol: f64) -> bool {
        self.certificate <= 10.0 * tol * self.scale.max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RuleSet {
    Primary,
    Check,
}

struct RadialRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialRule {
    fn new(k: f64, n: usize, set: RuleSet) -> Self {
        let (base, order): (&[f64], usize) = match set {
            RuleSet::Primary => (
                &[0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 32.0, 36.0, 40.0],
                10,
            ),
            RuleSet::Check => (
                &[0.0, 0.35, 0.8, 1.5, 2.5, 3.5, 5.0, 7.0, 10.0, 14.0, 17.0, 20.0, 23.0, 27.0, 31.0, 35.5, 40.0],
                11,
            ),
        };
        let scale = k / DEFAULT_K;
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in base.windows(2) {
            let (lo, hi) = (w[0] * scale, w[1] * scale);
            let half = 0.5 * (hi - lo);
            for (x, wt) in gx.iter().zip(&gw) {
                let r = lo + half * (x + 1.0);
                nodes.push(r);
                weights.push(half * wt * r.powi(n as i32 - 1));
            }
        }
        RadialRule { nodes, weights }
    }
}

enum Angular {
    /// Field radial about the fit center: only `|S|ũ(ρ)`.
    Radial,
    /// Field radial about `center`; Gauss-Gegenbauer in `ω·ê`.
    Axis { center: Vec<f64>, t: Vec<f64>, w: Vec<f64> },
    Sphere(SphereRule),
}

/// Angular moments `∫ũ(ρω)dω`, `∫ũ ω dω`, `∫ũ ωωᵀ dω` at each radial node.
struct Moments {
    m0: Vec<f64>,
    m1: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
}

pub(crate) struct Context<'a> {
    sampler: &'a dyn FieldSampler,
    spectral: &'a SpectralData,
    dim: Dimension,
    k: f64,
    mode: FitMode,
    radial: RadialRule,
    angular: Angular,
    // C^W_i, C^Z_i for i = 0 and i = n+1.
    cw: [f64; 2],
    cz: [f64; 2],
}

fn eta(rho: f64, k: f64) -> (f64, f64) {
    let s = rho / k;
    if s <= 1.0 {
        return (1.0, 0.0);
    }
    if s >= 2.0 {
        return (0.0, 0.0);
    }
    let t = s - 1.0;
    let t2 = t * t;
    let v = 1.0 - t2 * t * (10.0 - 15.0 * t + 6.0 * t2);
    let d = -30.0 * t2 * (1.0 - t) * (1.0 - t) / k;
    (v, d)
}

/// Cutoff `η(|y|/K)`: `1` for `|y| ≤ K`, `0` for `|y| ≥ 2K`.
pub fn orthogonality_cutoff(rho: f64, k: f64) -> f64 {
    eta(rho, k).0
}

impl<'a> Context<'a> {
    pub(crate) fn new(
        sampler: &'a dyn FieldSampler,
        spectral: &'a SpectralData,
        k: f64,
        mode: FitMode,
        sphere_order: usize,
        set: RuleSet,
    ) -> Result<Self> {
        let dim = sampler.dim();
        if spectral.dim() != dim {
            return Err(LabError::Domain("spectral data belong to another dimension".into()));
        }
        if !(k > 0.0) {
            return Err(LabError::Domain(format!("cutoff radius must be positive, got {k}")));
        }
        let n = dim.n();
        let radial = RadialRule::new(k, n, set);
        let angular = match (mode, sampler.symmetry_center()) {
            (FitMode::Radial, Some(_)) => Angular::Radial,
            (FitMode::Radial, None) => {
                return Err(LabError::Domain("radial fits need a sampler with a symmetry center".into()))
            }
            (FitMode::Full, Some(center)) => {
                let order = if set == RuleSet::Primary { 48 } else { 41 };
                let (t, w) = gauss_gegenbauer(order, (dim.nf() - 3.0) / 2.0);
                Angular::Axis { center, t, w }
            }
            (FitMode::Full, None) => {
                let order = if set == RuleSet::Primary { sphere_order } else { sphere_order + 1 };
                Angular::Sphere(SphereRule::new(n, order))
            }
        };
        let area = sphere_area(n);
        let mut cw = [0.0; 2];
        let mut cz = [0.0; 2];
        for (&r, &w) in radial.nodes.iter().zip(&radial.weights) {
            let e = eta(r, k).0;
            let z0 = spectral.z0(r);
            let zd = profile::z_dilation(r, dim);
            let wv = profile::w(r, dim);
            cw[0] += area * w * wv * e * z0;
            cw[1] += area * w * wv * e * zd;
            cz[0] += area * w * z0 * e * z0;
            cz[1] += area * w * z0 * e * zd;
        }
        Ok(Context {
            sampler,
            spectral,
            dim,
            k,
            mode,
            radial,
            angular,
            cw,
            cz,
        })
    }

    fn moments(&self, xi: &[f64], lambda: f64) -> Result<Moments> {
        let n = self.dim.n();
        let nodes = &self.radial.nodes;
        let mut m0 = vec![0.0; nodes.len()];
        let mut m1 = vec![vec![0.0; n]; nodes.len()];
        let mut m2 = vec![vec![0.0; n * n]; nodes.len()];
        let mut x = vec![0.0; n];
        match &self.angular {
            Angular::Radial => {
                let area = sphere_area(n);
                for (k, &rho) in nodes.iter().enumerate() {
                    x.copy_from_slice(xi);
                    x[0] += lambda * rho;
                    let u = self.sampler.value(&x)?;
                    m0[k] = area * u;
                    for i in 0..n {
                        m2[k][i * n + i] = area * u / n as f64;
                    }
                }
            }
            Angular::Axis { center, t, w } => {
                let lower = sphere_area(n - 1);
                let diff: Vec<f64> = xi.iter().zip(center).map(|(a, b)| a - b).collect();
                let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
                let mut e = vec![0.0; n];
                if d > 0.0 {
                    e.iter_mut().zip(&diff).for_each(|(ek, dk)| *ek = dk / d);
                } else {
                    e[0] = 1.0;
                }
                // A unit vector orthogonal to e.
                let j = (0..n).min_by(|a, b| e[*a].abs().partial_cmp(&e[*b].abs()).unwrap()).unwrap();
                let mut perp = vec![0.0; n];
                perp[j] = 1.0;
                let dot = e[j];
                perp.iter_mut().zip(&e).for_each(|(pk, ek)| *pk -= dot * ek);
                let pn = perp.iter().map(|v| v * v).sum::<f64>().sqrt();
                perp.iter_mut().for_each(|v| *v /= pn);
                for (k, &rho) in nodes.iter().enumerate() {
                    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
                    let lr = lambda * rho;
                    for (&tt, &wt) in t.iter().zip(w) {
                        let along = d + lr * tt;
                        let across = lr * (1.0 - tt * tt).max(0.0).sqrt();
                        for i in 0..n {
                            x[i] = center[i] + along * e[i] + across * perp[i];
                        }
                        let u = self.sampler.value(&x)?;
                        s0 += wt * u;
                        s1 += wt * tt * u;
                        s2 += wt * tt * tt * u;
                    }
                    let (s0, s1, s2) = (lower * s0, lower * s1, lower * s2);
                    m0[k] = s0;
                    let a = (s0 - s2) / (n as f64 - 1.0);
                    for i in 0..n {
                        m1[k][i] = s1 * e[i];
                        for jj in 0..n {
                            m2[k][i * n + jj] = (s2 - a) * e[i] * e[jj] + if i == jj { a } else { 0.0 };
                        }
                    }
                }
            }
            Angular::Sphere(rule) => {
                let shells = crate::par::map(nodes, |&rho| -> Result<(f64, Vec<f64>, Vec<f64>)> {
                    let lr = lambda * rho;
                    let mut x = vec![0.0; n];
                    let (mut s0, mut s1, mut s2) = (0.0, vec![0.0; n], vec![0.0; n * n]);
                    for q in 0..rule.len() {
                        let om = rule.point(q);
                        for i in 0..n {
                            x[i] = xi[i] + lr * om[i];
                        }
                        let u = rule.weights[q] * self.sampler.value(&x)?;
                        s0 += u;
                        for i in 0..n {
                            s1[i] += u * om[i];
                            for jj in i..n {
                                s2[i * n + jj] += u * om[i] * om[jj];
                            }
                        }
                    }
                    for i in 0..n {
                        for jj in 0..i {
                            s2[i * n + jj] = s2[jj * n + i];
                        }
                    }
                    Ok((s0, s1, s2))
                });
                for (k, shell) in shells.into_iter().enumerate() {
                    let (s0, s1, s2) = shell?;
                    m0[k] = s0;
                    m1[k] = s1;
                    m2[k] = s2;
                }
            }
        }
        Ok(Moments { m0, m1, m2 })
    }

    /// Residual vector `F_0..F_{n+1}` and its Jacobian in `(a, ξ, λ)`.
    pub(crate) fn evaluate(&self, p: &BubbleParams) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let n = self.dim.n();
        let nf = self.dim.nf();
        let lam = p.lambda;
        let mom = self.moments(&p.xi, lam)?;
        // U_i, D^ξ_{i,j}, D^λ_i.
        let mut u = vec![0.0; n + 2];
        let mut dxi = DMatrix::<f64>::zeros(n + 2, n);
        let mut dlam = vec![0.0; n + 2];
        for (k, (&rho, &w)) in self.radial.nodes.iter().zip(&self.radial.weights).enumerate() {
            let (e, de) = eta(rho, self.k);
            if e == 0.0 && de == 0.0 {
                continue;
            }
            let z0 = self.spectral.z0(rho);
            let dz0 = self.spectral.z0_derivative(rho);
            let zd = profile::z_dilation(rho, self.dim);
            let dzd = profile::dz_dilation(rho, self.dim);
            let radial_modes = [(0usize, e * z0, de * z0 + e * dz0), (n + 1, e * zd, de * zd + e * dzd)];
            for (i, g, dg) in radial_modes {
                u[i] += w * g * mom.m0[k];
                dlam[i] += w * (0.5 * nf * g + rho * dg) * mom.m0[k];
                for j in 0..n {
                    dxi[(i, j)] += w * dg * mom.m1[k][j];
                }
            }
            let f = e * profile::dw(rho, self.dim);
            let df = de * profile::dw(rho, self.dim) + e * profile::d2w(rho, self.dim);
            let f_over_rho = -e * (1.0 + rho * rho / (nf * (nf - 2.0))).powf(-self.dim.alpha() - 1.0) / nf;
            for i in 0..n {
                u[i + 1] += w * f * mom.m1[k][i];
                dlam[i + 1] += w * (0.5 * nf * f + rho * df) * mom.m1[k][i];
                for j in 0..n {
                    let mut v = (df - f_over_rho) * mom.m2[k][i * n + j];
                    if i == j {
                        v += f_over_rho * mom.m0[k];
                    }
                    dxi[(i + 1, j)] += w * v;
                }
            }
        }
        let pref = lam.powf(nf / 2.0);
        let dpref = lam.powf(nf / 2.0 - 1.0);
        let mut f = vec![0.0; n + 2];
        let mut jac = DMatrix::<f64>::zeros(n + 2, n + 2);
        for i in 0..n + 2 {
            let (cw, cz) = if i == 0 {
                (self.cw[0], self.cz[0])
            } else if i == n + 1 {
                (self.cw[1], self.cz[1])
            } else {
                (0.0, 0.0)
            };
            f[i] = pref * u[i] - lam * cw - p.a * cz;
            jac[(i, 0)] = -cz;
            for j in 0..n {
                jac[(i, j + 1)] = -dpref * dxi[(i, j)];
            }
            jac[(i, n + 1)] = -dpref * dlam[i] - cw;
        }
        Ok((f, jac))
    }

    /// Size of the terms that cancel in `F`: `max_i |λ^{n/2}U_i| + |λC^W_i| + |aC^Z_i|`.
    fn magnitude(&self, p: &BubbleParams, f: &[f64], active: &[usize]) -> f64 {
        let n = self.dim.n();
        active
            .iter()
            .map(|&i| {
                let (cw, cz) = match i {
                    0 => (self.cw[0], self.cz[0]),
                    i if i == n + 1 => (self.cw[1], self.cz[1]),
                    _ => (0.0, 0.0),
                };
                let (w, z) = (p.lambda * cw, p.a * cz);
                (f[i] + w + z).abs() + w.abs() + z.abs()
            })
            .fold(0.0, f64::max)
    }

    fn active(&self) -> Vec<usize> {
        let n = self.dim.n();
        match self.mode {
            FitMode::Full => (0..n + 2).collect(),
            FitMode::Radial => vec![0, n + 1],
        }
    }

    fn error_norms(&self, p: &BubbleParams) -> Result<Vec<AnnulusNorm>> {
        let n = self.dim.n();
        let mut edges = vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0];
        edges.retain(|&r| r < 2.0 * self.k);
        edges.push(2.0 * self.k);
        let scale = p.lambda.powf(self.dim.alpha());
        let mut out = Vec::new();
        let mut x = vec![0.0; n];
        for w in edges.windows(2) {
            let mut worst: f64 = 0.0;
            for s in 0..5 {
                let rho = w[0] + (w[1] - w[0]) * s as f64 / 4.0;
                for dir in 0..2 * n {
                    x.copy_from_slice(&p.xi);
                    let sign = if dir % 2 == 0 { 1.0 } else { -1.0 };
                    x[dir / 2] += sign * p.lambda * rho;
                    let u = self.sampler.value(&x)?;
                    let model = crate::kernel::bubble_value(&x, p, self.dim)?
                        + p.a * p.lambda.powf(-self.dim.nf() / 2.0) * self.spectral.z0(rho);
                    worst = worst.max((u - model).abs());
                }
            }
            out.push(AnnulusNorm {
                inner: w[0],
                outer: w[1],
                weighted_sup: scale * worst,
            });
        }
        Ok(out)
    }
}

/// Row dominance of the symmetrically scaled Jacobian `|J_ij| / √|J_ii J_jj|`,
/// which does not depend on the units of the unknowns.
fn dominance(jac: &DMatrix<f64>, active: &[usize]) -> f64 {
    let mut worst = f64::INFINITY;
    for &i in active {
        let dii = jac[(i, i)].abs();
        if dii == 0.0 {
            return 0.0;
        }
        let off: f64 = active
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| {
                let djj = jac[(j, j)].abs();
                if djj == 0.0 {
                    f64::INFINITY
                } else {
                    jac[(i, j)].abs() / (dii * djj).sqrt()
                }
            })
            .sum();
        worst = worst.min(if off > 0.0 { 1.0 / off } else { f64::INFINITY });
    }
    worst
}

fn max_abs(f: &[f64], active: &[usize]) -> f64 {
    active.iter().fold(0.0, |m, &i| m.max(f[i].abs()))
}

/// Picks the fit mode for a sampler when none is requested.
pub fn default_mode(sampler: &dyn FieldSampler) -> FitMode {
    match (sampler.provenance(), sampler.symmetry_center()) {
        (super::Provenance::PdeSnapshot, Some(_)) => FitMode::Radial,
        _ => FitMode::Full,
    }
}

/// Damped Newton solve of the orthogonality conditions from `guess`.
///
/// Numerical failures (singular or insufficiently dominant Jacobian, no
/// residual decrease after eight halvings, iteration limit) are reported
/// through `converged = false` with the last iterate; `Err` is reserved for
/// invalid input.
pub fn fit_orthogonal(
    sampler: &dyn FieldSampler,
    guess: &BubbleParams,
    spectral: &SpectralData,
    opts: &FitOptions,
) -> Result<DecompositionResult> {
    let dim = sampler.dim();
    if guess.xi.len() != dim.n() || !(guess.lambda > 0.0) {
        return Err(LabError::Domain("initial guess needs a center in ℝⁿ and λ > 0".into()));
    }
    let mode = opts.mode.unwrap_or_else(|| default_mode(sampler));
    let ctx = Context::new(sampler, spectral, opts.k, mode, opts.sphere_order, RuleSet::Primary)?;
    let mut p = guess.clone();
    if mode == FitMode::Radial {
        p.xi = sampler.symmetry_center().expect("checked by Context::new");
    }
    let active = ctx.active();
    let n = dim.n();
    let (mut f, mut jac) = ctx.evaluate(&p)?;
    let mut res = max_abs(&f, &active);
    let mut iterations = 0;
    let mut failure = None;
    let mut dom = dominance(&jac, &active);
    let mut tol = opts.tol * ctx.magnitude(&p, &f, &active).max(1.0);
    while res > tol {
        if iterations >= opts.max_iter {
            failure = Some(format!("no convergence in {} iterations (residual {res:e})", opts.max_iter));
            break;
        }
        dom = dominance(&jac, &active);
        if dom < opts.min_dominance {
            failure = Some(format!("Jacobian not diagonally dominant (ratio {dom:.3})"));
            break;
        }
        let m = active.len();
        let sub = DMatrix::from_fn(m, m, |r, c| jac[(active[r], active[c])]);
        let rhs = DVector::from_iterator(m, active.iter().map(|&i| -f[i]));
        let Some(step) = sub.lu().solve(&rhs) else {
            failure = Some("singular Jacobian".into());
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=8 {
            let mut trial = p.clone();
            for (r, &i) in active.iter().enumerate() {
                let d = t * step[r];
                if i == 0 {
                    trial.a += d;
                } else if i == n + 1 {
                    trial.lambda += d;
                } else {
                    trial.xi[i - 1] += d;
                }
            }
            if trial.lambda > 0.0 {
                let (ft, jt) = ctx.evaluate(&trial)?;
                let rt = max_abs(&ft, &active);
                if rt < res {
                    tol = opts.tol * ctx.magnitude(&trial, &ft, &active).max(1.0);
                    p = trial;
                    f = ft;
                    jac = jt;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            failure = Some(format!("residual did not decrease (residual {res:e})"));
            break;
        }
    }
    let converged = res <= tol;
    let scale = ctx.magnitude(&p, &f, &active);
    let check = Context::new(sampler, spectral, opts.k, mode, opts.sphere_order, RuleSet::Check)?;
    let (fc, _) = check.evaluate(&p)?;
    let certificate = max_abs(&fc, &active);
    let residuals = (0..n + 2).map(|i| if active.contains(&i) { f[i] } else { 0.0 }).collect();
    Ok(DecompositionResult {
        error_field_norms: ctx.error_norms(&p)?,
        params: p,
        residuals,
        iterations,
        converged,
        mode,
        dominance: dom,
        certificate,
        scale,
        failure: if converged { None } else { failure },
    })
}

/// The conditions `F_0..F_{n+1}` at given parameters, by either quadrature.
pub fn orthogonality_residuals(
    sampler: &dyn FieldSampler,
    params: &BubbleParams,
    spectral: &SpectralData,
    opts: &FitOptions,
    independent: bool,
) -> Result<Vec<f64>> {
    let mode = opts.mode.unwrap_or_else(|| default_mode(sampler));
    let set = if independent { RuleSet::Check } else { RuleSet::Primary };
    let ctx = Context::new(sampler, spectral, opts.k, mode, opts.sphere_order, set)?;
    Ok(ctx.evaluate(params)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{AffineView, BubbleField, FnSampler, RadialSampler};
    use crate::grid::{RadialField, RadialGrid};
    use crate::kernel::{ground_state, scaled_kernel};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn dim7() -> Dimension {
        Dimension::new(7).unwrap()
    }

    fn spectral() -> Arc<SpectralData> {
        Arc::new(ground_state(dim7()).unwrap())
    }

    fn max_param_error(a: &BubbleParams, b: &BubbleParams) -> f64 {
        a.xi.iter()
            .zip(&b.xi)
            .map(|(x, y)| (x - y).abs())
            .fold((a.lambda - b.lambda).abs(), f64::max)
            .max((a.a - b.a).abs())
    }

    #[test]
    fn exact_bubble_is_a_root() {
        let d = dim7();
        let sd = spectral();
        let truth = BubbleParams::new(vec![0.3, 0.0, -0.2, 0.0, 0.0, 0.1, 0.0], 1.4, 0.0);
        let field = BubbleField::new(d, vec![truth.clone()], None).unwrap();
        let res = fit_orthogonal(&field, &truth, &sd, &FitOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 1);
        assert!(res.max_residual() < 1e-12 * res.scale.max(1.0));
        assert!(max_param_error(&res.params, &truth) < 1e-12);
    }

    #[test]
    fn recovers_a_bubble_with_negative_mode() {
        let d = dim7();
        let sd = spectral();
        let truth = BubbleParams::new(vec![0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.7, 0.01 * 0.7);
        let field = BubbleField::new(d, vec![truth.clone()], Some(sd.clone())).unwrap();
        let guess = BubbleParams::new(vec![0.31, 0.005, 0.0, 0.0, 0.0, 0.0, 0.0], 0.72, 0.0);
        let res = fit_orthogonal(&field, &guess, &sd, &FitOptions::default()).unwrap();
        assert!(res.converged, "{:?}", res.failure);
        assert!(max_param_error(&res.params, &truth) < 1e-8, "{:?}", res.params);
        assert!(res.certified(1e-10));
        assert!(res.dominance > FitOptions::default().min_dominance);
    }

    #[test]
    fn small_perturbation_moves_parameters_by_its_size() {
        let d = dim7();
        let sd = spectral();
        let delta = 1e-3;
        let c = [0.4, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0];
        let bump = move |x: &[f64]| (-x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp();
        let base = BubbleParams::standard(d);
        let w = BubbleField::new(d, vec![base.clone()], None).unwrap();
        let w2 = w.clone();
        let sampler = FnSampler::new(
            d,
            move |x| w.value(x).unwrap() + delta * bump(x),
            move |x| {
                let b = bump(x);
                w2.gradient(x).unwrap().iter().zip(x).zip(&c).map(|((g, xi), ci)| g - 2.0 * delta * b * (xi - ci)).collect()
            },
        );
        let opts = FitOptions {
            k: 5.0,
            sphere_order: 6,
            ..FitOptions::default()
        };
        let res = fit_orthogonal(&sampler, &base, &sd, &opts).unwrap();
        assert!(res.converged, "{:?}", res.failure);
        let moved = max_param_error(&res.params, &base);
        assert!(moved > 0.0 && moved < 20.0 * delta, "{moved}");
        // Re-integrate the conditions on φ with the independent rule.
        let again = orthogonality_residuals(&sampler, &res.params, &sd, &opts, true).unwrap();
        let worst = again.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-6 * res.scale.max(1.0), "{again:?}");
    }

    #[test]
    fn fit_commutes_with_translation_and_dilation() {
        let d = dim7();
        let sd = spectral();
        let truth = BubbleParams::new(vec![0.1, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0], 0.9, 0.02);
        let bf = BubbleField::new(d, vec![truth.clone()], Some(sd.clone())).unwrap();
        let center = truth.xi.clone();
        let bf2 = bf.clone();
        let (cv, cg) = (center.clone(), center.clone());
        let gauss = move |x: &[f64], c: &[f64]| (-x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp();
        let field = FnSampler::new(
            d,
            move |x| bf.value(x).unwrap() + 1e-3 * gauss(x, &cv),
            move |x| {
                let g = gauss(x, &cg);
                bf2.gradient(x).unwrap().iter().zip(x).zip(&cg).map(|((v, xi), ci)| v - 2e-3 * g * (xi - ci)).collect()
            },
        )
        .with_center(center);
        let opts = FitOptions::default();
        let guess = BubbleParams::new(truth.xi.clone(), truth.lambda, 0.0);
        let base = fit_orthogonal(&field, &guess, &sd, &opts).unwrap();
        assert!(base.converged);
        let (mu, shift) = (2.5, vec![-1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let moved = AffineView::new(field, shift.clone(), mu).unwrap();
        let g2 = BubbleParams::new(
            base.params.xi.iter().zip(&shift).map(|(x, v)| mu * x + v).collect(),
            mu * truth.lambda,
            0.0,
        );
        let res = fit_orthogonal(&moved, &g2, &sd, &opts).unwrap();
        assert!(res.converged);
        for (x, (b, v)) in res.params.xi.iter().zip(base.params.xi.iter().zip(&shift)) {
            assert!((x - (mu * b + v)).abs() < 1e-9);
        }
        assert!((res.params.lambda / (mu * base.params.lambda) - 1.0).abs() < 1e-9);
        assert!((res.params.a - mu * base.params.a).abs() < 1e-9 * mu * base.params.a.abs().max(1.0));
    }

    #[test]
    fn radial_snapshot_of_a_bubble() {
        let d = dim7();
        let sd = spectral();
        let grid = Arc::new(RadialGrid::graded(7, 24.0, 0.002, 1.02, 0.05).unwrap());
        let lam: f64 = 0.6;
        let f = RadialField::from_fn(grid, 0.0, |r| lam.powf(-d.alpha()) * profile::w(r / lam, d)).unwrap();
        let s = RadialSampler::new(f).unwrap();
        assert_eq!(default_mode(&s), FitMode::Radial);
        let opts = FitOptions { k: 10.0, ..FitOptions::default() };
        let res = fit_orthogonal(&s, &BubbleParams::centered(d, 0.55), &sd, &opts).unwrap();
        assert!(res.converged, "{:?}", res.failure);
        assert_eq!(res.mode, FitMode::Radial);
        assert!((res.params.lambda / lam - 1.0).abs() < 1e-6, "{}", res.params.lambda);
        assert!(res.params.a.abs() < 1e-5);
        assert!(res.error_field_norms.iter().all(|e| e.weighted_sup < 1e-5));
    }

    #[test]
    fn orthogonality_holds_against_each_kernel_by_direct_integration() {
        // Brute-force radial-angular integration of ∫φ η Z_{i,ξ,λ} for the
        // dilation and negative modes of a radial field.
        let d = dim7();
        let sd = spectral();
        let grid = Arc::new(RadialGrid::graded(7, 24.0, 0.002, 1.02, 0.05).unwrap());
        let f = RadialField::from_fn(grid, 0.0, |r| 1.05 * profile::w(r, d) + 0.01 * (-r * r).exp()).unwrap();
        let s = RadialSampler::new(f.clone()).unwrap();
        let opts = FitOptions { k: 10.0, ..FitOptions::default() };
        let res = fit_orthogonal(&s, &BubbleParams::centered(d, 1.0), &sd, &opts).unwrap();
        assert!(res.converged);
        let p = &res.params;
        let h = 1e-4;
        let upper = 2.0 * opts.k * p.lambda;
        let steps = (upper / h) as usize;
        let mut acc = [0.0f64; 2];
        let mut scale = [0.0f64; 2];
        for k in 0..steps {
            let r = (k as f64 + 0.5) * h;
            let mut x = vec![0.0; 7];
            x[0] = r;
            let model = crate::kernel::bubble_value(&x, p, d).unwrap() + p.a * scaled_kernel(0, &x, p, d, Some(&sd)).unwrap();
            let phi = f.value_at(r) - model;
            let e = orthogonality_cutoff(r / p.lambda, opts.k);
            let vol = crate::quadrature::sphere_area(7) * r.powi(6) * h;
            for (slot, i) in [0usize, 8].into_iter().enumerate() {
                let z = scaled_kernel(i, &x, p, d, Some(&sd)).unwrap();
                acc[slot] += phi * e * z * vol;
                scale[slot] += (f.value_at(r) * e * z * vol).abs();
            }
        }
        for k in 0..2 {
            assert!(acc[k].abs() < 1e-6 * scale[k], "mode {k}: {} vs {}", acc[k], scale[k]);
        }
    }

    #[test]
    fn failures_are_reported_not_raised() {
        let d = dim7();
        let sd = spectral();
        let field = BubbleField::new(d, vec![BubbleParams::standard(d)], None).unwrap();
        let off = BubbleParams::new(vec![0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.3, 0.0);
        let res = fit_orthogonal(&field, &off, &sd, &FitOptions { max_iter: 1, ..FitOptions::default() }).unwrap();
        assert!(!res.converged);
        assert!(res.failure.is_some());
        let bad = BubbleParams::new(vec![0.0; 7], -1.0, 0.0);
        assert!(fit_orthogonal(&field, &bad, &sd, &FitOptions::default()).is_err());
        let short = BubbleParams::new(vec![0.0; 3], 1.0, 0.0);
        assert!(fit_orthogonal(&field, &short, &sd, &FitOptions::default()).is_err());
        let plain = FnSampler::new(d, |_| 0.0, |x| vec![0.0; x.len()]);
        let radial = FitOptions { mode: Some(FitMode::Radial), ..FitOptions::default() };
        assert!(fit_orthogonal(&plain, &BubbleParams::standard(d), &sd, &radial).is_err());
        let other = ground_state(Dimension::new(8).unwrap()).unwrap();
        assert!(fit_orthogonal(&field, &BubbleParams::standard(d), &other, &FitOptions::default()).is_err());
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(orthogonality_cutoff(0.0, 20.0), 1.0);
        assert_eq!(orthogonality_cutoff(20.0, 20.0), 1.0);
        assert_eq!(orthogonality_cutoff(40.0, 20.0), 0.0);
        assert!((orthogonality_cutoff(30.0, 20.0) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = orthogonality_cutoff(20.0 + 0.2 * k as f64, 20.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn synthetic_round_trip(
            lam in 0.3f64..3.0,
            rel_a in -0.05f64..0.05,
            dir in proptest::collection::vec(-1.0f64..1.0, 7),
            rad in 0.0f64..1.0,
        ) {
            let d = dim7();
            let sd = spectral();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let xi: Vec<f64> = dir.iter().map(|v| v * rad / norm).collect();
            let truth = BubbleParams::new(xi.clone(), lam, rel_a * lam);
            let field = BubbleField::new(d, vec![truth.clone()], Some(sd.clone())).unwrap();
            let mut gx = xi.clone();
            gx[0] += 0.02 * lam;
            let guess = BubbleParams::new(gx, 1.03 * lam, 0.0);
            let res = fit_orthogonal(&field, &guess, &sd, &FitOptions::default()).unwrap();
            prop_assert!(res.converged);
            prop_assert!(res.certified(1e-10));
            prop_assert!(res.dominance > 0.5);
            prop_assert!(max_param_error(&res.params, &truth) < 1e-7);
        }
    }
}
