//! Radial method-of-lines integrator for `∂ₜu = Δu + |u|^{p-1}u` on a ball
//! with Dirichlet data, adaptive in time, tracking the approach to blowup.

mod energy;
mod fit;
mod io;
mod stepper;

pub use energy::{energy_identity_residual, localized_energy, EnergyResidual};
pub use fit::{estimate_blowup_time, BlowupFit};
pub use io::{load_snapshot, load_trajectory, save_trajectory};
pub use stepper::{discrete_laplacian, StepResult, Stepper};

use crate::error::{LabError, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::kernel::Dimension;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `Full` solves the PDE; `ReactionOnly` integrates `u' = |u|^{p-1}u`
/// pointwise with no diffusion and no boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    ReactionOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Implicit diffusion, explicit reaction.
    #[default]
    Imex,
    /// Bogacki-Shampine 3(2); needs `dt ≲ h_min²`.
    Explicit,
}

/// When snapshots are kept. The first and last states are always kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPolicy {
    pub every_n_steps: Option<usize>,
    /// Keep a snapshot once the sup norm changed by this factor.
    pub sup_factor: f64,
    /// Keep a snapshot at least this often in time.
    pub max_time_gap: f64,
}

impl Default for OutputPolicy {
    fn default() -> Self {
        OutputPolicy {
            every_n_steps: None,
            sup_factor: 1.05,
            max_time_gap: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub mode: Mode,
    pub scheme: Scheme,
    pub rtol: f64,
    pub atol: f64,
    pub u_max: f64,
    pub t_max: f64,
    pub c_safe: f64,
    pub dt_initial: f64,
    pub max_steps: usize,
    pub output: OutputPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::Full,
            scheme: Scheme::Imex,
            rtol: 1e-6,
            atol: 1e-9,
            u_max: 1e8,
            t_max: 50.0,
            c_safe: 0.1,
            dt_initial: 1e-6,
            max_steps: 2_000_000,
            output: OutputPolicy::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("u_max", self.u_max),
            ("t_max", self.t_max),
            ("c_safe", self.c_safe),
            ("dt_initial", self.dt_initial),
            ("output.sup_factor", self.output.sup_factor - 1.0),
            ("output.max_time_gap", self.output.max_time_gap),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(LabError::Domain(format!("{name} out of range")));
            }
        }
        if !(self.atol >= 0.0) {
            return Err(LabError::Domain("atol must be non-negative".into()));
        }
        if self.output.every_n_steps == Some(0) {
            return Err(LabError::Domain("output.every_n_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// `‖u‖_∞ ≥ U_max`.
    Blowup,
    TimeLimit,
    StepLimit,
    /// Non-finite values or step-size collapse; the trajectory is partial.
    Aborted { reason: String },
}

/// One accepted step: time after the step, sup norm there, and the step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupSample {
    pub t: f64,
    pub sup: f64,
    pub dt: f64,
}

/// Discrete `∫₀ᵗ∫|∂ₜu|²` from per-step increments `‖u_{k+1} - u_k‖²_{L²}/dt`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeDerivativeBudget {
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl TimeDerivativeBudget {
    pub fn push(&mut self, t: f64, increment: f64) {
        let total = self.total() + increment;
        self.times.push(t);
        self.increments.push(increment);
        self.cumulative.push(total);
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Cumulative value up to time `t`.
    pub fn total_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Cumulative value once `‖u‖_∞` first reached `level` in `history`.
    pub fn total_at_sup(&self, history: &[SupSample], level: f64) -> Option<f64> {
        history.iter().find(|s| s.sup >= level).map(|s| self.total_at(s.t))
    }
}

/// Output of [`run_until_blowup`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<RadialField>,
    pub sup_history: Vec<SupSample>,
    pub budget: TimeDerivativeBudget,
    pub termination: Termination,
    pub mode: Mode,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.snapshots[0].grid()
    }

    pub fn dim(&self) -> Dimension {
        Dimension::new(self.grid().dim()).expect("trajectory grids have n ≥ 3")
    }

    pub fn t_start(&self) -> f64 {
        self.snapshots[0].time()
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().unwrap().time()
    }

    pub fn last(&self) -> &RadialField {
        self.snapshots.last().unwrap()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.termination, Termination::Aborted { .. })
    }

    /// Field at time `t`, linear in time between snapshots.
    pub fn field_at(&self, t: f64) -> Result<RadialField> {
        let (t0, t1) = (self.t_start(), self.t_end());
        if !(t >= t0 && t <= t1) {
            return Err(LabError::Range {
                what: "time",
                value: t,
                lo: t0,
                hi: t1,
            });
        }
        let k = self.snapshots.partition_point(|s| s.time() <= t);
        if k == 0 {
            return Ok(self.snapshots[0].clone());
        }
        let a = &self.snapshots[k - 1];
        if a.time() == t || k == self.snapshots.len() {
            return Ok(a.clone());
        }
        let b = &self.snapshots[k];
        let theta = (t - a.time()) / (b.time() - a.time());
        Ok(a.lerp(b, theta)?.with_time(t))
    }

    /// `u(r, t)`: cubic in space, linear in time between snapshots. Outside
    /// the grid the field is zero in full mode and continued by its boundary
    /// value in reaction-only mode.
    pub fn value_at(&self, r: f64, t: f64) -> Result<f64> {
        let (t0, t1) = (self.t_start(), self.t_end());
        if !(t >= t0 && t <= t1) {
            return Err(LabError::Range {
                what: "time",
                value: t,
                lo: t0,
                hi: t1,
            });
        }
        let eval = |s: &RadialField| {
            if r <= s.grid().radius() {
                s.value_at(r)
            } else if self.mode == Mode::ReactionOnly {
                *s.values().last().unwrap()
            } else {
                0.0
            }
        };
        let k = self.snapshots.partition_point(|s| s.time() <= t);
        if k == 0 {
            return Ok(eval(&self.snapshots[0]));
        }
        let a = &self.snapshots[k - 1];
        if a.time() == t || k == self.snapshots.len() {
            return Ok(eval(a));
        }
        let b = &self.snapshots[k];
        let theta = (t - a.time()) / (b.time() - a.time());
        Ok((1.0 - theta) * eval(a) + theta * eval(b))
    }

    /// `∂ₜu = Δ_h u + |u|^{p-1}u` of a field on this trajectory's grid.
    pub fn time_derivative(&self, field: &RadialField) -> Result<Vec<f64>> {
        let stepper = Stepper::new(Arc::clone(field.grid()), self.mode, Scheme::Imex)?;
        Ok(stepper.rhs(field.values()))
    }

    /// Frozen trajectory built from given fields, for diagnostics on
    /// prescribed data. Times must increase.
    pub fn from_snapshots(snapshots: Vec<RadialField>, mode: Mode) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(LabError::Domain("trajectory needs at least one snapshot".into()));
        }
        if !snapshots.windows(2).all(|w| w[1].time() > w[0].time()) {
            return Err(LabError::Domain("snapshot times must increase".into()));
        }
        let sup_history = snapshots
            .iter()
            .map(|s| SupSample {
                t: s.time(),
                sup: s.sup_norm(),
                dt: 0.0,
            })
            .collect();
        Ok(Trajectory {
            snapshots,
            sup_history,
            budget: TimeDerivativeBudget::default(),
            termination: Termination::TimeLimit,
            mode,
            steps: 0,
            rejected: 0,
        })
    }
}

fn error_norm(err: &[f64], a: &[f64], b: &[f64], cfg: &SolverConfig) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..err.len() {
        let scale = cfg.atol + cfg.rtol * a[j].abs().max(b[j].abs());
        worst = worst.max(err[j].abs() / scale);
    }
    worst
}

fn squared_increment(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    grid.integrate(&d)
}

/// Integrates from `u0` until `‖u‖_∞ ≥ U_max`, `t ≥ t_max`, or failure.
///
/// `dt = min(error-controlled dt, c_safe ‖u‖_∞^{-(p-1)})`. In full mode the
/// boundary value of `u0` is overwritten by the Dirichlet datum 0.
pub fn run_until_blowup(u0: &RadialField, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let stepper = Stepper::new(Arc::clone(u0.grid()), cfg.mode, cfg.scheme)?;
    let dim = Dimension::new(u0.grid().dim())?;
    let pm1 = dim.p() - 1.0;
    let mut u = u0.clone();
    if cfg.mode == Mode::Full {
        let mut v = u.values().to_vec();
        *v.last_mut().unwrap() = 0.0;
        u = RadialField::new(Arc::clone(u0.grid()), v, u0.time())?;
    }
    let t_end = u.time() + cfg.t_max;
    let mut traj = Trajectory {
        snapshots: vec![u.clone()],
        sup_history: vec![SupSample {
            t: u.time(),
            sup: u.sup_norm(),
            dt: 0.0,
        }],
        budget: TimeDerivativeBudget::default(),
        termination: Termination::TimeLimit,
        mode: cfg.mode,
        steps: 0,
        rejected: 0,
    };
    let mut dt = cfg.dt_initial;
    let mut last_snap_sup = u.sup_norm();
    let mut last_snap_t = u.time();
    // Both schemes estimate a local error of size O(dt³).
    let order = 3.0;
    loop {
        let sup = u.sup_norm();
        if sup >= cfg.u_max {
            traj.termination = Termination::Blowup;
            break;
        }
        if u.time() >= t_end * (1.0 - 1e-15) {
            traj.termination = Termination::TimeLimit;
            break;
        }
        if traj.steps >= cfg.max_steps {
            traj.termination = Termination::StepLimit;
            break;
        }
        let cap = if sup > 0.0 { cfg.c_safe * sup.powf(-pm1) } else { f64::INFINITY };
        dt = dt.min(cap).min(t_end - u.time());
        if !(dt > f64::EPSILON * u.time().abs().max(1e-300)) {
            traj.termination = Termination::Aborted {
                reason: format!("time step collapsed to {dt:e} at t={}", u.time()),
            };
            break;
        }
        let attempt = stepper.step(&u, dt);
        let (next, err) = match attempt {
            Ok(res) => {
                let e = error_norm(&res.error, u.values(), res.field.values(), cfg);
                (Some(res.field), e)
            }
            Err(_) => (None, f64::INFINITY),
        };
        if err.is_nan() {
            traj.termination = Termination::Aborted {
                reason: format!("NaN error estimate at t={}", u.time()),
            };
            break;
        }
        if err > 1.0 || next.is_none() {
            traj.rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-1.0 / order)).clamp(0.2, 0.9) } else { 0.25 };
            dt *= factor;
            if traj.rejected > 100 + 10 * traj.steps.max(1000) {
                traj.termination = Termination::Aborted {
                    reason: "too many rejected steps".into(),
                };
                break;
            }
            continue;
        }
        let next = next.unwrap();
        traj.steps += 1;
        let inc = squared_increment(u.grid(), u.values(), next.values()) / dt;
        traj.budget.push(next.time(), inc);
        let new_sup = next.sup_norm();
        traj.sup_history.push(SupSample {
            t: next.time(),
            sup: new_sup,
            dt,
        });
        let ratio = if last_snap_sup > 0.0 { new_sup / last_snap_sup } else { f64::INFINITY };
        let keep = cfg.output.every_n_steps.is_some_and(|k| traj.steps.is_multiple_of(k))
            || ratio >= cfg.output.sup_factor
            || ratio <= 1.0 / cfg.output.sup_factor
            || next.time() - last_snap_t >= cfg.output.max_time_gap;
        u = next;
        if keep {
            traj.snapshots.push(u.clone());
            last_snap_sup = new_sup;
            last_snap_t = u.time();
        }
        let grow = if err > 0.0 { (0.9 * err.powf(-1.0 / order)).clamp(0.2, 5.0) } else { 5.0 };
        dt *= grow;
    }
    if traj.snapshots.last().unwrap().time() < u.time() {
        traj.snapshots.push(u);
    }
    Ok(traj)
}

/// Convenience: a grid of radius `radius` built from `spec`, with `f` sampled.
pub fn sample_initial<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, f: F) -> Result<RadialField> {
    RadialField::from_fn(grid, 0.0, f)
}
