//! Pohozaev invariant
//! `P_v(r) = ∫_{∂B_r}[|∇v|²/2 - (∂_r v)² - ((n-2)/(2r)) v ∂_r v]`.

use crate::decomposition::FieldSampler;
use crate::error::{LabError, Result};
use crate::grid::RadialField;
use crate::kernel::Dimension;
use crate::quadrature::{gauss_legendre, sphere_area, SphereRule};
use crate::solver::Trajectory;
use serde::{Deserialize, Serialize};

/// `|∂B_r|[-(v_r)²/2 - ((n-2)/(2r)) v v_r]`, the invariant of a radial function.
pub fn pohozaev_radial(v: f64, v_r: f64, r: f64, n: usize) -> f64 {
    let nf = n as f64;
    sphere_area(n) * r.powf(nf - 1.0) * (-0.5 * v_r * v_r - (nf - 2.0) / (2.0 * r) * v * v_r)
}

fn check_radius(field: &RadialField, r: f64) -> Result<()> {
    let big_r = field.grid().radius();
    if !(r > 0.0 && r <= big_r) {
        return Err(LabError::Range {
            what: "Pohozaev radius",
            value: r,
            lo: 0.0,
            hi: big_r,
        });
    }
    Ok(())
}

/// `P_v(r)` of a radial field, from its cubic interpolant.
pub fn pohozaev(field: &RadialField, r: f64) -> Result<f64> {
    check_radius(field, r)?;
    let (v, vr) = field.value_and_slope(r);
    Ok(pohozaev_radial(v, vr, r, field.grid().dim()))
}

/// `P_v(r)` on the sphere of radius `r` about `center`, for a general sampler.
pub fn pohozaev_sampler(sampler: &dyn FieldSampler, center: &[f64], r: f64, order: usize) -> Result<f64> {
    let n = sampler.dim().n();
    if !(r > 0.0) || center.len() != n {
        return Err(LabError::Domain("Pohozaev sphere needs r > 0 and a center in ℝⁿ".into()));
    }
    let rule = SphereRule::new(n, order);
    let nf = n as f64;
    let mut acc = 0.0;
    let mut x = vec![0.0; n];
    for i in 0..rule.len() {
        let w = rule.point(i);
        for k in 0..n {
            x[k] = center[k] + r * w[k];
        }
        let v = sampler.value(&x)?;
        let g = sampler.gradient(&x)?;
        let g2: f64 = g.iter().map(|c| c * c).sum();
        let gr: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
        acc += rule.weights[i] * (0.5 * g2 - gr * gr - (nf - 2.0) / (2.0 * r) * v * gr);
    }
    Ok(acc * r.powf(nf - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResidual {
    pub t: f64,
    pub r: f64,
    /// `P_u(r) - ∫_{∂B_r}|u|^{p+1}/(p+1)`.
    pub lhs: f64,
    /// `-(1/r)∫_{B_r} ∂ₜu (x·∇u + ((n-2)/2)u)`.
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of the Pohozaev identity at `(t, r)`, with `∂ₜu` taken from
/// the scheme's right-hand side.
pub fn pohozaev_identity_residual(traj: &Trajectory, t: f64, r: f64) -> Result<PohozaevResidual> {
    let field = traj.field_at(t)?;
    check_radius(&field, r)?;
    let dim = Dimension::new(field.grid().dim())?;
    let n = dim.n();
    let p = dim.p();
    let (v, _) = field.value_and_slope(r);
    let lhs = pohozaev(&field, r)? - sphere_area(n) * r.powi(n as i32 - 1) * v.abs().powf(p + 1.0) / (p + 1.0);
    let ut = RadialField::new(field.grid().clone(), traj.time_derivative(&field)?, t)?;
    let alpha = dim.alpha();
    let mut breaks: Vec<f64> = field.grid().nodes().iter().copied().filter(|&x| x < r).collect();
    breaks.push(r);
    let (gx, gw) = gauss_legendre(4);
    let mut integral = 0.0;
    for w in breaks.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        for (xi, wi) in gx.iter().zip(&gw) {
            let rho = w[0] + half * (xi + 1.0);
            let (u, ur) = field.value_and_slope(rho);
            integral += half * wi * ut.value_at(rho) * (rho * ur + alpha * u) * rho.powi(n as i32 - 1);
        }
    }
    let rhs = -sphere_area(n) * integral / r;
    Ok(PohozaevResidual {
        t,
        r,
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}
