//! Cubic spline interpolation on strictly increasing abscissae.

use crate::linalg::solve_tridiagonal;

/// Boundary condition at one end of a [`CubicSpline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplineEnd {
    /// Prescribed first derivative.
    Clamped(f64),
    /// Zero second derivative.
    Natural,
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Builds the spline. Panics if fewer than two knots are given or the
    /// knots are not strictly increasing.
    pub fn new(x: Vec<f64>, y: Vec<f64>, left: SplineEnd, right: SplineEnd) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "spline needs ≥ 2 matching knots");
        assert!(x.windows(2).all(|w| w[1] > w[0]), "spline knots must increase");
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            lower[i] = h0;
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        let h_first = x[1] - x[0];
        match left {
            SplineEnd::Natural => diag[0] = 1.0,
            SplineEnd::Clamped(d) => {
                diag[0] = 2.0 * h_first;
                upper[0] = h_first;
                rhs[0] = 6.0 * ((y[1] - y[0]) / h_first - d);
            }
        }
        let h_last = x[n - 1] - x[n - 2];
        match right {
            SplineEnd::Natural => diag[n - 1] = 1.0,
            SplineEnd::Clamped(d) => {
                lower[n - 1] = h_last;
                diag[n - 1] = 2.0 * h_last;
                rhs[n - 1] = 6.0 * (d - (y[n - 1] - y[n - 2]) / h_last);
            }
        }
        let m = solve_tridiagonal(&lower, &diag, &upper, &rhs).expect("spline system is diagonally dominant");
        CubicSpline { x, y, m }
    }

    /// Spline for an even radial profile: zero slope at the first knot.
    pub fn radial(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self::new(x, y, SplineEnd::Clamped(0.0), SplineEnd::Natural)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        let k = self.x.partition_point(|&v| v <= t);
        k.saturating_sub(1).min(n - 2)
    }

    /// Value, first and second derivative at `t` (cubic extrapolation
    /// outside the knot range).
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64) {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h + h * (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_all(t).0
    }

    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let (v, d, _) = self.eval_all(t);
        (v, d)
    }
}
