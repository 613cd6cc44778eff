//! Localized Giga-Kohn quantity
//! `Θ_s(x,t) = s^{(p+1)/(p-1)}∫[½|∇u|² - |u|^{p+1}/(p+1)]Gψ² + s^{2/(p-1)}/(2(p-1))∫u²Gψ² + Ce^{-c/s}`
//! with `u = u(·, t-s)`, `G = (4πs)^{-n/2}e^{-|y-x|²/(4s)}` and `ψ = ψ(y-x)`.

use super::CutoffSpec;
use crate::error::{LabError, Result};
use crate::grid::RadialField;
use crate::kernel::{bubble_energy, Dimension};
use crate::quadrature::{gauss_gegenbauer, gauss_legendre, sphere_area};
use crate::solver::{estimate_blowup_time, Mode, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSample {
    pub base_point: Vec<f64>,
    pub base_time: f64,
    pub s: f64,
    pub value: f64,
    pub cutoff_id: String,
}

/// How a radial field is continued beyond its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    /// Zero outside `B_R` (Dirichlet runs).
    Zero,
    /// Constant continuation of the boundary value (reaction-only runs).
    Flat,
}

impl Extension {
    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Full => Extension::Zero,
            Mode::ReactionOnly => Extension::Flat,
        }
    }
}

fn sample(field: &RadialField, ext: Extension, r: f64) -> (f64, f64) {
    let big_r = field.grid().radius();
    if r <= big_r {
        return field.value_and_slope(r);
    }
    match ext {
        Extension::Zero => (0.0, 0.0),
        Extension::Flat => (*field.values().last().unwrap(), 0.0),
    }
}

const GAUSS_CUT: f64 = 46.0;
const RADIAL_ORDER: usize = 5;
const ANGULAR_ORDER: usize = 64;

/// `Θ_s` at base point `x` for the frozen field `v = u(·, t-s)`.
pub fn theta_of_field(field: &RadialField, ext: Extension, x: &[f64], s: f64, cutoff: &CutoffSpec) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(LabError::Domain(format!("backward time offset must be positive, got {s}")));
    }
    let dim = Dimension::new(field.grid().dim())?;
    if x.len() != dim.n() {
        return Err(LabError::Domain(format!("base point has {} components in dimension {}", x.len(), dim.n())));
    }
    let n = dim.nf();
    let p = dim.p();
    let a_grad = s.powf((p + 1.0) / (p - 1.0));
    let a_mass = s.powf(2.0 / (p - 1.0)) / (2.0 * (p - 1.0));
    let density = |v: f64, vr: f64| a_grad * (0.5 * vr * vr - v.abs().powf(p + 1.0) / (p + 1.0)) + a_mass * v * v;
    let sq = s.sqrt();
    let psi = cutoff.profile;
    let mut rho_end = (4.0 * s * GAUSS_CUT).sqrt().min(psi.support());
    let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ext == Extension::Zero {
        rho_end = rho_end.min(field.grid().radius() + xnorm);
    }
    let mut breaks: Vec<f64> = Vec::new();
    let step = 0.25 * sq;
    let panels = (rho_end / step).ceil().max(1.0) as usize;
    breaks.extend((0..=panels).map(|k| (k as f64 * step).min(rho_end)));
    if let crate::diagnostics::CutoffProfile::Bump { radius } = psi {
        breaks.push(0.75 * radius);
    }
    if xnorm == 0.0 {
        breaks.extend(field.grid().nodes().iter().copied().filter(|&r| r < rho_end));
    } else {
        let fine = 0.1 * sq;
        let k = (rho_end / fine).ceil() as usize;
        breaks.extend((0..=k).map(|i| (i as f64 * fine).min(rho_end)));
    }
    breaks.retain(|&r| r <= rho_end);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * rho_end);
    let (gx, gw) = gauss_legendre(RADIAL_ORDER);
    let norm = (4.0 * std::f64::consts::PI * s).powf(-n / 2.0);
    let angular = if xnorm > 0.0 { Some(gauss_gegenbauer(ANGULAR_ORDER, (n - 3.0) / 2.0)) } else { None };
    let sphere_lower = sphere_area(dim.n() - 1);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        for (xi, wi) in gx.iter().zip(&gw) {
            let rho = lo + half * (xi + 1.0);
            let weight = half * wi * norm * (-rho * rho / (4.0 * s)).exp() * psi.value(rho).powi(2) * rho.powf(n - 1.0);
            if weight == 0.0 {
                continue;
            }
            let inner = match &angular {
                None => {
                    let (v, vr) = sample(field, ext, rho);
                    sphere_area(dim.n()) * density(v, vr)
                }
                Some((tx, tw)) => {
                    let mut acc = 0.0;
                    for (t, wt) in tx.iter().zip(tw) {
                        let r = (xnorm * xnorm + rho * rho + 2.0 * xnorm * rho * t).max(0.0).sqrt();
                        let (v, vr) = sample(field, ext, r);
                        acc += wt * density(v, vr);
                    }
                    sphere_lower * acc
                }
            };
            total += weight * inner;
        }
    }
    Ok(total + cutoff.correction(s))
}

/// `Θ_s(x, t)` on a trajectory, with the field at `t - s` interpolated
/// linearly in time.
pub fn theta(traj: &Trajectory, x: &[f64], t: f64, s: f64, cutoff: &CutoffSpec) -> Result<ThetaSample> {
    if !(s > 0.0) {
        return Err(LabError::Domain(format!("backward time offset must be positive, got {s}")));
    }
    let field = traj.field_at(t - s)?;
    let value = theta_of_field(&field, Extension::for_mode(traj.mode), x, s, cutoff)?;
    Ok(ThetaSample {
        base_point: x.to_vec(),
        base_time: t,
        s,
        value,
        cutoff_id: cutoff.id(),
    })
}

/// Adjacent pairs with `Θ_{s_{k+1}} < Θ_{s_k} - tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: Vec<ThetaSample>,
    /// `(k, Θ_{s_k}, Θ_{s_{k+1}})` for each violation.
    pub violations: Vec<(usize, f64, f64)>,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn theta_monotonicity_report(
    traj: &Trajectory,
    x: &[f64],
    t: f64,
    s_list: &[f64],
    cutoff: &CutoffSpec,
    tol: f64,
) -> Result<MonotonicityReport> {
    if s_list.len() < 3 || !s_list.windows(2).all(|w| w[1] > w[0]) {
        return Err(LabError::Domain("need at least three increasing s values".into()));
    }
    let samples = crate::par::map(s_list, |&s| theta(traj, x, t, s, cutoff))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from_samples(samples, tol))
}

pub(crate) fn report_from_samples(samples: Vec<ThetaSample>, tol: f64) -> MonotonicityReport {
    let violations = samples
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].value < w[0].value - tol)
        .map(|(k, w)| (k, w[0].value, w[1].value))
        .collect();
    MonotonicityReport { samples, violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Regular,
    TypeI,
    TypeII { bubbles: usize },
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub verdict: Verdict,
    pub theta_limit: f64,
    /// Change of the fitted `Θ` over one decade of `s`.
    pub band: f64,
    pub blowup_time: f64,
    pub samples: Vec<ThetaSample>,
}

/// Relative tolerance when matching a density value.
pub const DENSITY_TOL: f64 = 0.1;
/// Largest accepted change of `Θ` per decade of `s`, relative to the
/// larger of `|Θ_lim|` and the Type I density.
pub const SLOPE_TOL: f64 = 0.05;

/// Classifies `x` at the fitted blowup time of `traj`.
pub fn classify(traj: &Trajectory, x: &[f64], cutoff: &CutoffSpec) -> Result<ClassificationResult> {
    let fit = estimate_blowup_time(traj)?;
    classify_at(traj, x, fit.t_blowup, cutoff)
}

/// Classifies `x` at a given blowup time `t_blow ≥ t_end`: `Θ_s` is sampled
/// over the last resolved decade `s ∈ [s₀, 10s₀]`, `s₀ = 4(t_blow - t_end)`,
/// fitted linearly in `log₁₀ s` and extrapolated to `s₀`.
pub fn classify_at(traj: &Trajectory, x: &[f64], t_blow: f64, cutoff: &CutoffSpec) -> Result<ClassificationResult> {
    let dim = traj.dim();
    let t_end = traj.t_end();
    if !(t_blow >= t_end) {
        return Err(LabError::Domain(format!("blowup time {t_blow} precedes the end of the run {t_end}")));
    }
    let s_lo = (4.0 * (t_blow - t_end)).max(1e-300);
    let s_hi = 10.0 * s_lo;
    if t_blow - s_hi < traj.t_start() {
        return Err(LabError::Range {
            what: "classification window start",
            value: t_blow - s_hi,
            lo: traj.t_start(),
            hi: t_end,
        });
    }
    // Prefer snapshot times so that no temporal interpolation enters.
    let mut s_list: Vec<f64> = traj
        .times()
        .iter()
        .map(|t| t_blow - t)
        .filter(|s| *s >= s_lo && *s <= s_hi)
        .collect();
    s_list.reverse();
    if s_list.len() < 5 {
        s_list = (0..9).map(|k| s_lo * 10f64.powf(k as f64 / 8.0)).collect();
    }
    let samples = crate::par::map(&s_list, |&s| theta(traj, x, t_blow, s, cutoff))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = samples.iter().map(|q| q.s.log10()).collect();
    let ys: Vec<f64> = samples.iter().map(|q| q.value).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let theta_limit = my + slope * (s_lo.log10() - mx);
    let d1 = dim.type_one_density();
    let verdict = if !theta_limit.is_finite() || slope.abs() > SLOPE_TOL * theta_limit.abs().max(d1) {
        Verdict::Indeterminate
    } else {
        density_verdict(dim, theta_limit)?
    };
    Ok(ClassificationResult {
        verdict,
        theta_limit,
        band: slope.abs(),
        blowup_time: t_blow,
        samples,
    })
}

/// Matches a density value against `0`, the Type I density and the
/// Type II densities `NΛ n^{-1}(4π)^{-n/2}`.
pub fn density_verdict(dim: Dimension, theta_limit: f64) -> Result<Verdict> {
    let d1 = dim.type_one_density();
    if theta_limit < DENSITY_TOL * d1 {
        return Ok(Verdict::Regular);
    }
    if (theta_limit - d1).abs() <= DENSITY_TOL * d1 {
        return Ok(Verdict::TypeI);
    }
    let unit = dim.type_two_density(bubble_energy(dim)?, 1);
    let bubbles = (theta_limit / unit).round();
    if bubbles >= 1.0 {
        let target = bubbles * unit;
        if (theta_limit - target).abs() <= DENSITY_TOL * target {
            return Ok(Verdict::TypeII {
                bubbles: bubbles as usize,
            });
        }
    }
    Ok(Verdict::Indeterminate)
}

/// `true` iff `Θ_{r²}(x, t) ≤ ε*`.
pub fn epsilon_regularity_flag(
    traj: &Trajectory,
    x: &[f64],
    t: f64,
    r: f64,
    eps_star: f64,
    cutoff: &CutoffSpec,
) -> Result<bool> {
    if !(eps_star > 0.0) {
        return Err(LabError::Domain(format!("ε* must be positive, got {eps_star}")));
    }
    Ok(theta(traj, x, t, r * r, cutoff)?.value <= eps_star)
}

/// Default `ε*`: a tenth of the Type I density.
pub fn default_eps_star(dim: Dimension) -> f64 {
    0.1 * dim.type_one_density()
}
