//! Parabolic rescalings `u_λ(y,t) = λ^{2/(p-1)} u(a + λy, T + λ²t)` and the
//! self-similar profile `w(y,t) = (T-t)^{1/(p-1)} u(a + y√(T-t), t)`.

use crate::error::{LabError, Result};
use crate::kernel::Dimension;
use crate::solver::Trajectory;
use serde::{Deserialize, Serialize};

/// Read-only rescaled view of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct RescaledView<'a> {
    traj: &'a Trajectory,
    base: &'a [f64],
    blowup_time: f64,
    lambda: f64,
    dim: Dimension,
}

pub fn rescale<'a>(traj: &'a Trajectory, a: &'a [f64], t_blow: f64, lambda: f64) -> Result<RescaledView<'a>> {
    let dim = traj.dim();
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(LabError::Domain(format!("rescaling factor must be positive, got {lambda}")));
    }
    if a.len() != dim.n() {
        return Err(LabError::Domain(format!("base point has {} components in dimension {}", a.len(), dim.n())));
    }
    Ok(RescaledView {
        traj,
        base: a,
        blowup_time: t_blow,
        lambda,
        dim,
    })
}

impl<'a> RescaledView<'a> {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    /// The rescaling of this view by `mu`, i.e. scale `λμ` about the same point.
    pub fn rescale(&self, mu: f64) -> Result<RescaledView<'a>> {
        rescale(self.traj, self.base, self.blowup_time, self.lambda * mu)
    }

    /// Backing time `T + λ²t` of rescaled time `t`.
    pub fn original_time(&self, t: f64) -> f64 {
        self.blowup_time + self.lambda * self.lambda * t
    }

    /// Range of rescaled times covered by the trajectory.
    pub fn time_window(&self) -> (f64, f64) {
        let l2 = self.lambda * self.lambda;
        (
            (self.traj.t_start() - self.blowup_time) / l2,
            (self.traj.t_end() - self.blowup_time) / l2,
        )
    }

    pub fn value(&self, y: &[f64], t: f64) -> Result<f64> {
        if y.len() != self.dim.n() {
            return Err(LabError::Domain(format!("point has {} components in dimension {}", y.len(), self.dim.n())));
        }
        let r = self
            .base
            .iter()
            .zip(y)
            .map(|(a, b)| (a + self.lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let u = self.traj.value_at(r, self.original_time(t))?;
        Ok(self.lambda.powf(self.dim.alpha()) * u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub base_point: Vec<f64>,
    pub blowup_time: f64,
    /// Signed coordinates `y = ρ e₁` of the sample line.
    pub y: Vec<f64>,
    pub times: Vec<f64>,
    /// `w[k][j]` at `times[k]`, `y[j]`.
    pub w: Vec<Vec<f64>>,
    /// `sup_{|y| ≤ Y}|w - κ|` per time.
    pub sup_deviation: Vec<f64>,
    /// The same with `T` shifted down and up by the blowup-time uncertainty.
    pub sup_deviation_band: Vec<(f64, f64)>,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileOptions {
    pub y_max: f64,
    pub points: usize,
    pub uncertainty: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            y_max: 5.0,
            points: 101,
            uncertainty: 0.0,
        }
    }
}

fn sample_line(traj: &Trajectory, a: &[f64], t_blow: f64, t: f64, ys: &[f64]) -> Result<Vec<f64>> {
    let tau = t_blow - t;
    if !(tau > 0.0) {
        return Err(LabError::Domain(format!("profile time {t} is not before the blowup time {t_blow}")));
    }
    let dim = traj.dim();
    let sq = tau.sqrt();
    let scale = tau.powf(dim.blowup_exponent());
    ys.iter()
        .map(|&y| {
            let mut x = a.to_vec();
            x[0] += y * sq;
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(scale * traj.value_at(r, t)?)
        })
        .collect()
}

/// Samples `w` on `|y| ≤ Y` along the first coordinate axis at each time.
pub fn self_similar_profile(
    traj: &Trajectory,
    a: &[f64],
    t_blow: f64,
    times: &[f64],
    opts: &ProfileOptions,
) -> Result<SelfSimilarProfile> {
    let dim = traj.dim();
    if a.len() != dim.n() {
        return Err(LabError::Domain(format!("base point has {} components in dimension {}", a.len(), dim.n())));
    }
    if opts.points < 2 || !(opts.y_max > 0.0) {
        return Err(LabError::Domain("profile needs ≥ 2 points and Y > 0".into()));
    }
    let ys: Vec<f64> = (0..opts.points)
        .map(|j| -opts.y_max + 2.0 * opts.y_max * j as f64 / (opts.points - 1) as f64)
        .collect();
    let kappa = dim.kappa();
    let dev = |w: &[f64]| w.iter().fold(0.0f64, |m, v| m.max((v - kappa).abs()));
    let mut w = Vec::with_capacity(times.len());
    let mut sup_deviation = Vec::with_capacity(times.len());
    let mut band = Vec::with_capacity(times.len());
    for &t in times {
        let row = sample_line(traj, a, t_blow, t, &ys)?;
        sup_deviation.push(dev(&row));
        let d = opts.uncertainty;
        let lo = if d > 0.0 && t_blow - d > t {
            dev(&sample_line(traj, a, t_blow - d, t, &ys)?)
        } else {
            f64::NAN
        };
        let hi = if d > 0.0 { dev(&sample_line(traj, a, t_blow + d, t, &ys)?) } else { f64::NAN };
        band.push((lo, hi));
        w.push(row);
    }
    Ok(SelfSimilarProfile {
        base_point: a.to_vec(),
        blowup_time: t_blow,
        y: ys,
        times: times.to_vec(),
        w,
        sup_deviation,
        sup_deviation_band: band,
        kappa,
    })
}

/// Sup distances of the latest profile to the Liouville alternatives `0`
/// and `κ`, as `(d_zero, d_kappa)`.
pub fn liouville_distance(profile: &SelfSimilarProfile) -> Result<(f64, f64)> {
    let last = profile
        .w
        .last()
        .ok_or_else(|| LabError::Domain("profile has no samples".into()))?;
    let d_zero = last.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d_kappa = last.iter().fold(0.0f64, |m, v| m.max((v - profile.kappa).abs()));
    Ok((d_zero, d_kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{RadialField, RadialGrid};
    use crate::kernel::profile;
    use crate::solver::{estimate_blowup_time, run_until_blowup, Mode, SolverConfig};
    use std::sync::Arc;

    fn frozen_bubble() -> Trajectory {
        let d = Dimension::new(7).unwrap();
        let grid = Arc::new(RadialGrid::uniform(7, 10.0, 2000).unwrap());
        let f = RadialField::from_fn(grid, 0.0, |r| profile::w(r, d)).unwrap();
        Trajectory::from_snapshots(vec![f.clone(), f.with_time(1.0)], Mode::Full).unwrap()
    }

    #[test]
    fn rescaling_a_steady_bubble_gives_a_bubble() {
        let d = Dimension::new(7).unwrap();
        let traj = frozen_bubble();
        let a = [0.0; 7];
        let lam = 0.25;
        let view = rescale(&traj, &a, 1.0, lam).unwrap();
        let mut y = [0.0; 7];
        for rho in [0.0, 1.0, 3.0, 20.0] {
            y[2] = rho;
            let expected = lam.powf(d.alpha()) * profile::w(lam * rho, d);
            assert!((view.value(&y, -4.0).unwrap() - expected).abs() < 1e-9);
        }
        assert_eq!(view.time_window(), (-16.0, 0.0));
        assert_eq!(view.original_time(-16.0), 0.0);
    }

    #[test]
    fn rescalings_compose() {
        let traj = frozen_bubble();
        let a = [0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let v = rescale(&traj, &a, 1.0, 0.5).unwrap().rescale(0.4).unwrap();
        let w = rescale(&traj, &a, 1.0, 0.2).unwrap();
        assert_eq!(v.lambda(), w.lambda());
        let y = [1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(v.value(&y, -1.0).unwrap(), w.value(&y, -1.0).unwrap());
        assert!(rescale(&traj, &a, 1.0, 0.0).is_err());
        assert!(rescale(&traj, &[0.0; 2], 1.0, 1.0).is_err());
        assert!(w.value(&y, 1.0).is_err());
    }

    #[test]
    fn ode_blowup_profile_is_kappa() {
        let d = Dimension::new(7).unwrap();
        let grid = Arc::new(RadialGrid::uniform(7, 1.0, 16).unwrap());
        let u0 = RadialField::from_fn(grid, 0.0, |_| 1.0).unwrap();
        let cfg = SolverConfig {
            mode: Mode::ReactionOnly,
            ..Default::default()
        };
        let traj = run_until_blowup(&u0, &cfg).unwrap();
        let fit = estimate_blowup_time(&traj).unwrap();
        let times: Vec<f64> = traj.times().into_iter().filter(|t| fit.t_blowup - t < 1e-2).collect();
        let prof = self_similar_profile(&traj, &[0.0; 7], fit.t_blowup, &times, &ProfileOptions::default()).unwrap();
        assert_eq!(prof.kappa, d.kappa());
        assert!(prof.sup_deviation.iter().all(|v| *v < 1e-4), "{:?}", prof.sup_deviation);
        let (d_zero, d_kappa) = liouville_distance(&prof).unwrap();
        assert!(d_kappa < 1e-4 && (d_zero - d.kappa()).abs() < 1e-4);
        assert!(prof.sup_deviation_band.iter().all(|(lo, hi)| lo.is_nan() && hi.is_nan()));
    }

    #[test]
    fn profile_arguments_are_checked() {
        let traj = frozen_bubble();
        let opts = ProfileOptions::default();
        assert!(self_similar_profile(&traj, &[0.0; 7], 0.5, &[0.6], &opts).is_err());
        assert!(self_similar_profile(&traj, &[0.0; 7], 2.0, &[0.5], &ProfileOptions { points: 1, ..opts }).is_err());
        let empty = self_similar_profile(&traj, &[0.0; 7], 2.0, &[], &opts).unwrap();
        assert!(liouville_distance(&empty).is_err());
    }
}
