//! Time series of orthogonal fits along a trajectory, checked against
//! `|λ'| ≤ C λ^{(n-4)/2}` and `|λ'| ≤ C (T-t)^{(n-10)/4} λ^{(n-4)/2}`.

use super::{fit_orthogonal, DecompositionResult, FitMode, FitOptions, RadialSampler};
use crate::error::Result;
use crate::kernel::{BubbleParams, SpectralData};
use crate::solver::Trajectory;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub t: f64,
    pub xi: Vec<f64>,
    pub lambda: f64,
    pub a: f64,
    pub converged: bool,
    /// Centered difference, `NaN` where a neighbour fit failed.
    pub dlambda_dt: f64,
    /// `|λ'| / λ^{(n-4)/2}`.
    pub lipschitz_ratio: f64,
    /// `|λ'| / ((T-t)^{(n-10)/4} λ^{(n-4)/2})`, `NaN` without a blowup time.
    pub normalized_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Lipschitz,
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub t: f64,
    pub bound: Bound,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterTrack {
    pub entries: Vec<TrackEntry>,
    /// Fitted constants: twice the largest ratio over the first half of the
    /// valid entries.
    pub c_lipschitz: f64,
    pub c_normalized: f64,
    pub violations: Vec<Violation>,
    pub fits: Vec<DecompositionResult>,
    /// Cutoff radius used for every fit.
    pub k: f64,
    pub blowup_time: Option<f64>,
}

impl ParameterTrack {
    pub fn valid(&self) -> impl Iterator<Item = &TrackEntry> {
        self.entries.iter().filter(|e| e.converged && e.dlambda_dt.is_finite())
    }

    /// Least-squares slope of `log ratio` against `log(T-t)` over the later
    /// half of the valid entries (`log λ` when no blowup time is known). A
    /// ratio growing like `(T-t)^{-β}` gives `-β`; a bounded one tends to zero.
    pub fn lipschitz_trend(&self) -> f64 {
        let valid: Vec<&TrackEntry> = self.valid().filter(|e| e.lipschitz_ratio > 0.0).collect();
        let late = &valid[valid.len() / 2..];
        let pts: Vec<(f64, f64)> = late
            .iter()
            .filter_map(|e| {
                let x = match self.blowup_time {
                    Some(tb) if tb > e.t => (tb - e.t).ln(),
                    Some(_) => return None,
                    None => e.lambda.ln(),
                };
                Some((x, e.lipschitz_ratio.ln()))
            })
            .collect();
        if pts.len() < 3 {
            return f64::NAN;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    }

    /// `max |a|/λ` over converged fits.
    pub fn max_relative_a(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.converged)
            .map(|e| (e.a / e.lambda).abs())
            .fold(0.0, f64::max)
    }
}

/// Options for [`track_parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOptions {
    pub fit: FitOptions,
    /// Only snapshots with `t ≤ t_stop` are fitted.
    pub t_stop: f64,
    /// Blowup time for the normalized bound.
    pub blowup_time: Option<f64>,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            fit: FitOptions {
                mode: Some(FitMode::Radial),
                ..FitOptions::default()
            },
            t_stop: f64::INFINITY,
            blowup_time: None,
        }
    }
}

/// Fits every snapshot up to `t_stop`, warm-starting from the previous
/// successful fit; the first guess comes from the maximum point,
/// `λ = u(0)^{-2/(n-2)}`, `a = 0`.
pub fn track_parameters(traj: &Trajectory, spectral: &SpectralData, opts: &TrackOptions) -> Result<ParameterTrack> {
    let dim = traj.dim();
    let n = dim.nf();
    let mut entries = Vec::new();
    let mut fits = Vec::new();
    let mut guess: Option<BubbleParams> = None;
    let max_point = |snap: &crate::grid::RadialField| {
        let peak = snap.values().iter().fold(0.0f64, |m, v| m.max(*v));
        BubbleParams::centered(dim, peak.max(1e-300).powf(-2.0 / (n - 2.0)))
    };
    // The cutoff support 2Kλ has to stay inside the grid; λ shrinks towards
    // blowup, so the first snapshot fixes K for the whole track.
    let mut fit_opts = opts.fit.clone();
    if let Some(first) = traj.snapshots.first() {
        let lambda0 = traj.snapshots.iter().map(|s| max_point(s).lambda).fold(0.0, f64::max);
        fit_opts.k = fit_opts.k.min(first.grid().radius() / (2.0 * lambda0));
    }
    for snap in traj.snapshots.iter().filter(|s| s.time() <= opts.t_stop) {
        let sampler = RadialSampler::new(snap.clone())?;
        let g = guess.clone().unwrap_or_else(|| max_point(snap));
        let res = fit_orthogonal(&sampler, &g, spectral, &fit_opts)?;
        if res.converged {
            guess = Some(res.params.clone());
        }
        entries.push(TrackEntry {
            t: snap.time(),
            xi: res.params.xi.clone(),
            lambda: res.params.lambda,
            a: res.params.a,
            converged: res.converged,
            dlambda_dt: f64::NAN,
            lipschitz_ratio: f64::NAN,
            normalized_ratio: f64::NAN,
        });
        fits.push(res);
    }
    let m = entries.len();
    for k in 0..m {
        let ok = |j: usize| entries[j].converged;
        if !ok(k) {
            continue;
        }
        let d = if k > 0 && k + 1 < m && ok(k - 1) && ok(k + 1) {
            let (t0, t1, t2) = (entries[k - 1].t, entries[k].t, entries[k + 1].t);
            let (l0, l1, l2) = (entries[k - 1].lambda, entries[k].lambda, entries[k + 1].lambda);
            let h0 = t1 - t0;
            let h1 = t2 - t1;
            // Second-order derivative on a non-uniform stencil.
            -h1 / (h0 * (h0 + h1)) * l0 + (h1 - h0) / (h0 * h1) * l1 + h0 / (h1 * (h0 + h1)) * l2
        } else {
            f64::NAN
        };
        let e = &mut entries[k];
        e.dlambda_dt = d;
        let base = e.lambda.powf((n - 4.0) / 2.0);
        e.lipschitz_ratio = d.abs() / base;
        if let Some(tb) = opts.blowup_time {
            e.normalized_ratio = d.abs() / ((tb - e.t).powf((n - 10.0) / 4.0) * base);
        }
    }
    let valid: Vec<usize> = (0..m).filter(|&k| entries[k].converged && entries[k].dlambda_dt.is_finite()).collect();
    let half = &valid[..valid.len().div_ceil(2)];
    let c_of = |f: &dyn Fn(&TrackEntry) -> f64| 2.0 * half.iter().map(|&k| f(&entries[k])).fold(0.0f64, f64::max);
    let c_lipschitz = c_of(&|e| e.lipschitz_ratio);
    let c_normalized = if opts.blowup_time.is_some() {
        c_of(&|e| e.normalized_ratio)
    } else {
        f64::NAN
    };
    let mut violations = Vec::new();
    for &k in &valid {
        let e = &entries[k];
        if e.lipschitz_ratio > c_lipschitz {
            violations.push(Violation {
                index: k,
                t: e.t,
                bound: Bound::Lipschitz,
                ratio: e.lipschitz_ratio,
            });
        }
        if c_normalized.is_finite() && e.normalized_ratio > c_normalized {
            violations.push(Violation {
                index: k,
                t: e.t,
                bound: Bound::Normalized,
                ratio: e.normalized_ratio,
            });
        }
    }
    Ok(ParameterTrack {
        entries,
        c_lipschitz,
        c_normalized,
        violations,
        fits,
        k: fit_opts.k,
        blowup_time: opts.blowup_time,
    })
}
