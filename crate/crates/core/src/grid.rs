//! Radial meshes on `[0, R]` and nodal fields living on them.

use crate::error::{LabError, Result};
use crate::interp::CubicSpline;
use crate::quadrature::sphere_area;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

/// Minimum number of intervals in a [`RadialGrid`].
pub const MIN_INTERVALS: usize = 16;

/// How nodes are distributed on `[0, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// `intervals` equal cells.
    Uniform { intervals: usize },
    /// Spacing `h_min · ratio^k`, capped at `h_max`, starting from the origin.
    Graded { h_min: f64, ratio: f64, h_max: f64 },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Graded {
            h_min: 2e-5,
            ratio: 1.02,
            h_max: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingPolicy {
    Uniform,
    Graded,
    Custom,
}

/// A radial mesh `0 = r_0 < r_1 < … < r_M = R` for dimension `n`, with the
/// finite-volume radial Laplacian precomputed.
///
/// The Laplacian is the flux form
/// `(Δu)_j = [A_{j+½}(u_{j+1}-u_j)/h_j - A_{j-½}(u_j-u_{j-1})/h_{j-1}] / V_j`
/// with `A = m^{n-1}` at cell midpoints `m` and exact dual volumes
/// `V_j = (m_{j+½}ⁿ - m_{j-½}ⁿ)/n`. It is exact on `r²` and reduces to the
/// ghost-node stencil `2n(u_1-u_0)/h²` at the origin.
#[derive(Debug)]
pub struct RadialGrid {
    dim: usize,
    nodes: Vec<f64>,
    policy: SpacingPolicy,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    volumes: Vec<f64>,
}

fn pow_diff(a: f64, b: f64, n: usize) -> f64 {
    // aⁿ - bⁿ = (a - b) Σ a^k b^{n-1-k}, stable for a ≈ b.
    let mut s = 0.0;
    let mut ak = 1.0;
    for k in 0..n {
        s += ak * b.powi((n - 1 - k) as i32);
        ak *= a;
    }
    (a - b) * s
}

impl RadialGrid {
    pub fn from_nodes(dim: usize, nodes: Vec<f64>, policy: SpacingPolicy) -> Result<Self> {
        if dim < 1 {
            return Err(LabError::Grid("dimension must be positive".into()));
        }
        if nodes.len() < MIN_INTERVALS + 1 {
            return Err(LabError::Grid(format!(
                "need at least {} intervals, got {}",
                MIN_INTERVALS,
                nodes.len().saturating_sub(1)
            )));
        }
        if nodes[0] != 0.0 {
            return Err(LabError::Grid("first node must be exactly 0".into()));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) || !nodes.iter().all(|r| r.is_finite()) {
            return Err(LabError::Grid("nodes must be finite and strictly increasing".into()));
        }
        let m = nodes.len();
        let nf = dim as f64;
        let mid: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut volumes = vec![0.0; m];
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for j in 0..m {
            let right = if j + 1 < m { mid[j] } else { nodes[m - 1] };
            let left = if j == 0 { 0.0 } else { mid[j - 1] };
            volumes[j] = pow_diff(right, left, dim) / nf;
        }
        for j in 0..m - 1 {
            let a_right = mid[j].powi(dim as i32 - 1) / (nodes[j + 1] - nodes[j]);
            let a_left = if j == 0 {
                0.0
            } else {
                mid[j - 1].powi(dim as i32 - 1) / (nodes[j] - nodes[j - 1])
            };
            lower[j] = a_left / volumes[j];
            upper[j] = a_right / volumes[j];
            diag[j] = -(a_left + a_right) / volumes[j];
        }
        Ok(RadialGrid {
            dim,
            nodes,
            policy,
            lower,
            diag,
            upper,
            volumes,
        })
    }

    pub fn uniform(dim: usize, radius: f64, intervals: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(LabError::Grid(format!("radius must be positive, got {radius}")));
        }
        let nodes = (0..=intervals)
            .map(|i| if i == intervals { radius } else { radius * i as f64 / intervals as f64 })
            .collect();
        Self::from_nodes(dim, nodes, SpacingPolicy::Uniform)
    }

    pub fn graded(dim: usize, radius: f64, h_min: f64, ratio: f64, h_max: f64) -> Result<Self> {
        if !(radius > 0.0 && h_min > 0.0 && ratio >= 1.0 && h_max >= h_min) {
            return Err(LabError::Grid(format!(
                "graded grid needs R > 0, h_min > 0, ratio ≥ 1, h_max ≥ h_min (R={radius}, h_min={h_min}, ratio={ratio}, h_max={h_max})"
            )));
        }
        let mut nodes = vec![0.0];
        let mut h = h_min;
        let mut r = 0.0;
        while r + h < radius {
            r += h;
            nodes.push(r);
            h = (h * ratio).min(h_max);
            if nodes.len() > 50_000_000 {
                return Err(LabError::Grid("graded grid too large".into()));
            }
        }
        let last_gap = radius - r;
        if nodes.len() > 1 && last_gap < 0.5 * h {
            nodes.pop();
        }
        nodes.push(radius);
        Self::from_nodes(dim, nodes, SpacingPolicy::Graded)
    }

    pub fn from_spec(dim: usize, radius: f64, spec: &GridSpec) -> Result<Self> {
        match *spec {
            GridSpec::Uniform { intervals } => Self::uniform(dim, radius, intervals),
            GridSpec::Graded { h_min, ratio, h_max } => Self::graded(dim, radius, h_min, ratio, h_max),
        }
    }

    /// The same node pattern scaled by `factor` (used for scaling checks).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_nodes(self.dim, self.nodes.iter().map(|r| r * factor).collect(), self.policy)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn radius(&self) -> f64 {
        *self.nodes.last().expect("non-empty grid")
    }

    pub fn policy(&self) -> SpacingPolicy {
        self.policy
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Dual-cell volumes `V_j` (without the sphere-area factor).
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Laplacian coefficients `(lower, diag, upper)` of row `j`. The last
    /// row is left at zero; callers impose a boundary condition there.
    pub fn laplacian_row(&self, j: usize) -> (f64, f64, f64) {
        (self.lower[j], self.diag[j], self.upper[j])
    }

    pub(crate) fn laplacian_bands(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.lower, &self.diag, &self.upper)
    }

    /// `∫_{B_R} f dx` for nodal values `f`, using the dual-cell rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        sphere_area(self.dim) * values.iter().zip(&self.volumes).map(|(v, w)| v * w).sum::<f64>()
    }

    /// Index of the interval containing `r` (clamped).
    pub fn locate(&self, r: f64) -> usize {
        let k = self.nodes.partition_point(|&x| x <= r);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }
}

/// Nodal values of a radial function at one instant.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    time: f64,
    spline: OnceLock<Arc<CubicSpline>>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::Grid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::Domain(format!("non-finite value at node {i}")));
        }
        Ok(RadialField {
            grid,
            values,
            time,
            spline: OnceLock::new(),
        })
    }

    /// Samples `f(r)` at the grid nodes.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, time: f64, f: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values, time)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cubic spline through the nodal values with zero slope at the origin.
    pub fn spline(&self) -> &CubicSpline {
        self.spline
            .get_or_init(|| Arc::new(CubicSpline::radial(self.grid.nodes().to_vec(), self.values.clone())))
    }

    /// Interpolated value at radius `r` (zero outside the grid).
    pub fn value_at(&self, r: f64) -> f64 {
        if r > self.grid.radius() {
            0.0
        } else {
            self.spline().eval(r)
        }
    }

    /// Interpolated `(u, ∂_r u)` at radius `r` (zero outside the grid).
    pub fn value_and_slope(&self, r: f64) -> (f64, f64) {
        if r > self.grid.radius() {
            (0.0, 0.0)
        } else {
            self.spline().eval_with_derivative(r)
        }
    }

    /// Pointwise linear combination `(1-θ)·self + θ·other` on a common grid.
    pub fn lerp(&self, other: &RadialField, theta: f64) -> Result<RadialField> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid.nodes() != other.grid.nodes() {
            return Err(LabError::Grid("cannot interpolate fields on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        RadialField::new(
            self.grid.clone(),
            values,
            (1.0 - theta) * self.time + theta * other.time,
        )
    }
}
