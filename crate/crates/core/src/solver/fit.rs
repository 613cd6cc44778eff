//! Fit of `‖u(t)‖_∞ ≈ κ_fit (T - t)^{-β}` with `T` free.

use super::Trajectory;
use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub t_blowup: f64,
    /// `|T_full - T_upper|` between the full window and its upper half.
    pub uncertainty: f64,
    pub exponent: f64,
    pub kappa_fit: f64,
    pub rms_residual: f64,
    pub points: usize,
    /// Decades of sup-norm growth inside the fit window.
    pub decades: f64,
}

const WINDOW_DECADES: f64 = 4.0;
const MIN_DECADES: f64 = 3.0;

// Least squares of y = c - β x for x = log(T - t). Returns (sse, c, β).
fn linear_fit(ts: &[f64], ys: &[f64], t_blow: f64) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let xs: Vec<f64> = ts.iter().map(|t| (t_blow - t).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let c = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - c - slope * x).powi(2)).sum();
    (sse, c, -slope)
}

// Minimizes the profiled SSE over log(T - t_last).
fn fit_window(ts: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let t_last = *ts.last().unwrap();
    let span = t_last - ts[0];
    let lo = (1e-14 * t_last.abs().max(span)).max(f64::MIN_POSITIVE).ln();
    let hi = (10.0 * span).ln();
    let sse = |z: f64| linear_fit(ts, ys, t_last + z.exp()).0;
    let samples = 400;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=samples {
        let z = lo + (hi - lo) * k as f64 / samples as f64;
        let v = sse(z);
        if v < best.0 {
            best = (v, z);
        }
    }
    let step = (hi - lo) / samples as f64;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sse(d);
        }
        if (b - a).abs() < 1e-13 {
            break;
        }
    }
    let t_blow = t_last + (0.5 * (a + b)).exp();
    let (sse, c, beta) = linear_fit(ts, ys, t_blow);
    (t_blow, c, beta, sse)
}

/// Fits the blowup time, rate exponent and prefactor to the trailing part
/// of `sup_history` where `‖u‖_∞` lies within four decades of its final
/// value. Needs at least three decades of growth inside that window.
pub fn estimate_blowup_time(traj: &Trajectory) -> Result<BlowupFit> {
    let hist = &traj.sup_history;
    let u_end = hist.last().map(|s| s.sup).unwrap_or(0.0);
    if !(u_end > 0.0) {
        return Err(LabError::FitQuality("sup norm history is empty or zero".into()));
    }
    let floor = u_end * 10f64.powf(-WINDOW_DECADES);
    let mut start = hist.len() - 1;
    while start > 0 && hist[start - 1].sup >= floor {
        start -= 1;
    }
    let window = &hist[start..];
    let u_min = window.iter().map(|s| s.sup).fold(f64::INFINITY, f64::min);
    let decades = (u_end / u_min).log10();
    if decades < MIN_DECADES || window.len() < 8 {
        return Err(LabError::FitQuality(format!(
            "sup norm grows by only {decades:.2} decades over {} samples in the fit window",
            window.len()
        )));
    }
    if !window.windows(2).all(|w| w[1].t > w[0].t) {
        return Err(LabError::FitQuality("sup history times are not increasing".into()));
    }
    let ts: Vec<f64> = window.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = window.iter().map(|s| s.sup.ln()).collect();
    let (t_blow, c, beta, sse) = fit_window(&ts, &ys);
    let upper_floor = u_end * 10f64.powf(-WINDOW_DECADES / 2.0);
    let k = window.iter().position(|s| s.sup >= upper_floor).unwrap_or(0);
    let uncertainty = if window.len() - k >= 8 {
        let (t_half, ..) = fit_window(&ts[k..], &ys[k..]);
        (t_half - t_blow).abs()
    } else {
        f64::NAN
    };
    Ok(BlowupFit {
        t_blowup: t_blow,
        uncertainty,
        exponent: beta,
        kappa_fit: c.exp(),
        rms_residual: (sse / ts.len() as f64).sqrt(),
        points: ts.len(),
        decades,
    })
}
