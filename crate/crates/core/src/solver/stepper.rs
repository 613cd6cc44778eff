//! Single time steps: IMEX ARS(2,2,2) with step-doubling error control,
//! and explicit Bogacki-Shampine 3(2) for cross-validation.

use super::{Mode, Scheme};
use crate::error::{LabError, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::kernel::Dimension;
use crate::linalg::solve_tridiagonal;
use std::sync::Arc;

/// Outcome of one step attempt.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub field: RadialField,
    /// Nodal local error estimate.
    pub error: Vec<f64>,
}

/// Right-hand side `Δ_h u + |u|^{p-1}u` on a grid, with Dirichlet data at
/// the last node in [`Mode::Full`].
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Arc<RadialGrid>,
    dim: Dimension,
    mode: Mode,
    scheme: Scheme,
}

const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

impl Stepper {
    pub fn new(grid: Arc<RadialGrid>, mode: Mode, scheme: Scheme) -> Result<Self> {
        let dim = Dimension::new(grid.dim())?;
        Ok(Stepper { grid, dim, mode, scheme })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn last(&self) -> usize {
        self.grid.len() - 1
    }

    fn reaction(&self, u: &[f64], out: &mut [f64]) {
        let pm1 = self.dim.p() - 1.0;
        for (o, &v) in out.iter_mut().zip(u) {
            *o = v.abs().powf(pm1) * v;
        }
        if self.mode == Mode::Full {
            out[self.last()] = 0.0;
        }
    }

    fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        if self.mode == Mode::ReactionOnly {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        apply_laplacian(&self.grid, u, out);
    }

    /// `∂ₜu` as seen by the scheme.
    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let mut l = vec![0.0; u.len()];
        let mut f = vec![0.0; u.len()];
        self.laplacian(u, &mut l);
        self.reaction(u, &mut f);
        l.iter().zip(&f).map(|(a, b)| a + b).collect()
    }

    // Solve (I - c L) x = rhs, honoring the Dirichlet row.
    fn implicit_solve(&self, c: f64, rhs: &mut [f64]) -> Result<Vec<f64>> {
        if self.mode == Mode::ReactionOnly || c == 0.0 {
            return Ok(rhs.to_vec());
        }
        let (lo, di, up) = self.grid.laplacian_bands();
        let m = rhs.len();
        let lower: Vec<f64> = lo.iter().map(|v| -c * v).collect();
        let mut diag: Vec<f64> = di.iter().map(|v| 1.0 - c * v).collect();
        let upper: Vec<f64> = up.iter().map(|v| -c * v).collect();
        diag[m - 1] = 1.0;
        rhs[m - 1] = 0.0;
        let mut lower = lower;
        lower[m - 1] = 0.0;
        solve_tridiagonal(&lower, &diag, &upper, rhs)
            .ok_or_else(|| LabError::Convergence("singular implicit system".into()))
    }

    fn imex(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        let m = u.len();
        let delta = 1.0 - 1.0 / (2.0 * GAMMA);
        let mut n1 = vec![0.0; m];
        self.reaction(u, &mut n1);
        let mut rhs: Vec<f64> = u.iter().zip(&n1).map(|(a, b)| a + dt * GAMMA * b).collect();
        let u2 = self.implicit_solve(dt * GAMMA, &mut rhs)?;
        let mut n2 = vec![0.0; m];
        let mut l2 = vec![0.0; m];
        self.reaction(&u2, &mut n2);
        self.laplacian(&u2, &mut l2);
        let mut rhs: Vec<f64> = (0..m)
            .map(|j| u[j] + dt * (delta * n1[j] + (1.0 - delta) * n2[j]) + dt * (1.0 - GAMMA) * l2[j])
            .collect();
        self.implicit_solve(dt * GAMMA, &mut rhs)
    }

    fn bogacki_shampine(&self, u: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        let m = u.len();
        let axpy = |k: &[f64], c: f64| -> Vec<f64> { (0..m).map(|j| u[j] + c * k[j]).collect() };
        let k1 = self.rhs(u);
        let k2 = self.rhs(&axpy(&k1, 0.5 * dt));
        let k3 = self.rhs(&axpy(&k2, 0.75 * dt));
        let y: Vec<f64> = (0..m)
            .map(|j| u[j] + dt * (2.0 / 9.0 * k1[j] + 1.0 / 3.0 * k2[j] + 4.0 / 9.0 * k3[j]))
            .collect();
        let k4 = self.rhs(&y);
        let err: Vec<f64> = (0..m)
            .map(|j| {
                dt * ((2.0 / 9.0 - 7.0 / 24.0) * k1[j]
                    + (1.0 / 3.0 - 0.25) * k2[j]
                    + (4.0 / 9.0 - 1.0 / 3.0) * k3[j]
                    - 0.125 * k4[j])
            })
            .collect();
        (y, err)
    }

    /// One step of size `dt` from `field`. `dt = 0` returns the field unchanged.
    pub fn step(&self, field: &RadialField, dt: f64) -> Result<StepResult> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(LabError::Domain(format!("time step must be non-negative, got {dt}")));
        }
        let u = field.values();
        if dt == 0.0 {
            return Ok(StepResult {
                field: field.clone(),
                error: vec![0.0; u.len()],
            });
        }
        let (values, error) = match self.scheme {
            Scheme::Imex => {
                let coarse = self.imex(u, dt)?;
                let half = self.imex(u, 0.5 * dt)?;
                let fine = self.imex(&half, 0.5 * dt)?;
                let error: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (f - c) / 3.0).collect();
                let values: Vec<f64> = fine.iter().zip(&error).map(|(f, e)| f + e).collect();
                (values, error)
            }
            Scheme::Explicit => {
                let (mut y, e) = self.bogacki_shampine(u, dt);
                if self.mode == Mode::Full {
                    let last = self.last();
                    y[last] = 0.0;
                }
                (y, e)
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Convergence(format!("non-finite values after step dt={dt:e}")));
        }
        Ok(StepResult {
            field: RadialField::new(Arc::clone(&self.grid), values, field.time() + dt)?,
            error,
        })
    }
}

pub(crate) fn apply_laplacian(grid: &RadialGrid, u: &[f64], out: &mut [f64]) {
    let (lo, di, up) = grid.laplacian_bands();
    let m = u.len();
    for j in 0..m - 1 {
        let mut v = di[j] * u[j] + up[j] * u[j + 1];
        if j > 0 {
            v += lo[j] * u[j - 1];
        }
        out[j] = v;
    }
    out[m - 1] = 0.0;
}

/// Finite-volume radial Laplacian of `field`. Interior stencils are exact on
/// `r²`; the origin uses the symmetric ghost-node limit `Δu(0) = n u_rr(0)`.
/// The boundary node carries no stencil and is set to zero.
pub fn discrete_laplacian(field: &RadialField) -> RadialField {
    let grid = field.grid();
    let mut out = vec![0.0; grid.len()];
    apply_laplacian(grid, field.values(), &mut out);
    RadialField::new(Arc::clone(grid), out, field.time()).expect("Laplacian of finite data is finite")
}
