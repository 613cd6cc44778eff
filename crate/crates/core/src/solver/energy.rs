//! Localized energy identity
//! `d/dt ∫[½|∇u|² - |u|^{p+1}/(p+1)]η² = -∫|∂ₜu|²η² - 2∫η ∂ₜu ∇u·∇η`.

use super::Trajectory;
use crate::diagnostics::CutoffProfile;
use crate::error::Result;
use crate::grid::RadialField;
use crate::quadrature::sphere_area;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyResidual {
    pub t0: f64,
    pub t1: f64,
    /// `E(t1) - E(t0)`.
    pub energy_change: f64,
    /// Trapezoid rule of the right-hand side over `[t0, t1]`.
    pub dissipation: f64,
    pub residual: f64,
}

/// `∫[½|∇u|² - |u|^{p+1}/(p+1)]η²`; gradient term by the midpoint rule on
/// each cell, potential term on dual cells.
pub fn localized_energy(field: &RadialField, eta: &CutoffProfile) -> f64 {
    let grid = field.grid();
    let n = grid.dim();
    let p = (n as f64 + 2.0) / (n as f64 - 2.0);
    let r = grid.nodes();
    let u = field.values();
    let mut grad = 0.0;
    for j in 0..r.len() - 1 {
        let h = r[j + 1] - r[j];
        let mid = 0.5 * (r[j] + r[j + 1]);
        let slope = (u[j + 1] - u[j]) / h;
        grad += 0.5 * slope * slope * eta.value(mid).powi(2) * mid.powi(n as i32 - 1) * h;
    }
    let pot: Vec<f64> = r
        .iter()
        .zip(u)
        .map(|(&rj, v)| v.abs().powf(p + 1.0) / (p + 1.0) * eta.value(rj).powi(2))
        .collect();
    sphere_area(n) * grad - grid.integrate(&pot)
}

fn dissipation_rate(traj: &Trajectory, field: &RadialField, eta: &CutoffProfile) -> Result<f64> {
    let ut = traj.time_derivative(field)?;
    let grid = field.grid();
    let vals: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&ut)
        .map(|(&r, &w)| {
            let e = eta.value(r);
            let ur = field.value_and_slope(r).1;
            -w * w * e * e - 2.0 * e * w * ur * eta.derivative(r)
        })
        .collect();
    Ok(grid.integrate(&vals))
}

/// Residual of the localized energy identity on each interval between
/// consecutive snapshots.
pub fn energy_identity_residual(traj: &Trajectory, eta: &CutoffProfile) -> Result<Vec<EnergyResidual>> {
    let mut out = Vec::with_capacity(traj.snapshots.len().saturating_sub(1));
    let mut e_prev = localized_energy(&traj.snapshots[0], eta);
    let mut d_prev = dissipation_rate(traj, &traj.snapshots[0], eta)?;
    for w in traj.snapshots.windows(2) {
        let e = localized_energy(&w[1], eta);
        let d = dissipation_rate(traj, &w[1], eta)?;
        let dt = w[1].time() - w[0].time();
        let change = e - e_prev;
        let diss = 0.5 * dt * (d + d_prev);
        out.push(EnergyResidual {
            t0: w[0].time(),
            t1: w[1].time(),
            energy_change: change,
            dissipation: diss,
            residual: change - diss,
        });
        e_prev = e;
        d_prev = d;
    }
    Ok(out)
}
