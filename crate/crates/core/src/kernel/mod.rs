//! Aubin-Talenti bubbles `W_{ξ,λ}(x) = (λ / (λ² + |x-ξ|²/(n(n-2))))^{(n-2)/2}`,
//! the kernel of the linearized operator `-Δ - pW^{p-1}` and the bubble
//! energy `Λ = ∫|∇W|² = ∫W^{p+1}`.

mod spectrum;

pub use spectrum::{
    ground_state, matrix_ground_state, rayleigh_quotient, shooting_ground_state, solve_spectrum,
    zero_mode_residual, SpectralData, SpectrumReport, DEFAULT_R_MAX,
};

use crate::error::{LabError, Result};
use crate::quadrature::{radial_integral, romberg, sphere_area};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Spatial dimension together with the derived exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl TryFrom<usize> for Dimension {
    type Error = LabError;
    fn try_from(n: usize) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(LabError::Domain(format!("dimension must be ≥ 3, got {n}")));
        }
        Ok(Dimension(n))
    }

    pub fn n(self) -> usize {
        self.0
    }

    pub fn nf(self) -> f64 {
        self.0 as f64
    }

    /// Critical exponent `(n+2)/(n-2)`.
    pub fn p(self) -> f64 {
        (self.nf() + 2.0) / (self.nf() - 2.0)
    }

    /// `(n-2)/2`, the scaling weight of `u`.
    pub fn alpha(self) -> f64 {
        (self.nf() - 2.0) / 2.0
    }

    /// `(p-1)^{-1/(p-1)}`, the constant of the ODE blowup profile.
    pub fn kappa(self) -> f64 {
        let pm1 = self.p() - 1.0;
        pm1.powf(-1.0 / pm1)
    }

    /// Self-similar rate `1/(p-1) = (n-2)/4`.
    pub fn blowup_exponent(self) -> f64 {
        1.0 / (self.p() - 1.0)
    }

    /// Main theorems are stated for `n ≥ 7`; smaller `n` runs are outside
    /// the classified regime.
    pub fn in_classified_regime(self) -> bool {
        self.0 >= 7
    }

    /// Density of a Type I point: `n^{-1}((n-2)/4)^{n/2}`.
    pub fn type_one_density(self) -> f64 {
        ((self.nf() - 2.0) / 4.0).powf(self.nf() / 2.0) / self.nf()
    }

    /// Density of a Type II point with `bubbles` bubbles: `n^{-1}(4π)^{-n/2} N Λ`.
    pub fn type_two_density(self, bubble_energy: f64, bubbles: usize) -> f64 {
        (4.0 * std::f64::consts::PI).powf(-self.nf() / 2.0) * bubbles as f64 * bubble_energy / self.nf()
    }
}

/// Center `xi`, scale `lambda > 0` and negative-mode amplitude `a` of a bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub xi: Vec<f64>,
    pub lambda: f64,
    pub a: f64,
}

impl BubbleParams {
    pub fn new(xi: Vec<f64>, lambda: f64, a: f64) -> Self {
        BubbleParams { xi, lambda, a }
    }

    /// Unit bubble centered at the origin of ℝⁿ.
    pub fn standard(dim: Dimension) -> Self {
        BubbleParams::new(vec![0.0; dim.n()], 1.0, 0.0)
    }

    pub fn centered(dim: Dimension, lambda: f64) -> Self {
        BubbleParams::new(vec![0.0; dim.n()], lambda, 0.0)
    }

    fn check(&self, dim: Dimension) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(LabError::Domain(format!("bubble scale must be positive, got {}", self.lambda)));
        }
        if self.xi.len() != dim.n() {
            return Err(LabError::Domain(format!(
                "center has {} components in dimension {}",
                self.xi.len(),
                dim.n()
            )));
        }
        Ok(())
    }
}

fn dist2(x: &[f64], xi: &[f64]) -> f64 {
    x.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_point(x: &[f64], dim: Dimension) -> Result<()> {
    if x.len() != dim.n() {
        return Err(LabError::Domain(format!("point has {} components in dimension {}", x.len(), dim.n())));
    }
    Ok(())
}

/// Radial profile of the unit bubble and its derivatives in `ρ = |y|`.
///
/// These closed forms are shared by the fitter and the diagnostics.
pub mod profile {
    use super::Dimension;

    fn q(rho: f64, dim: Dimension) -> f64 {
        1.0 + rho * rho / (dim.nf() * (dim.nf() - 2.0))
    }

    pub fn w(rho: f64, dim: Dimension) -> f64 {
        q(rho, dim).powf(-dim.alpha())
    }

    /// `W'(ρ) = -(ρ/n) q^{-α-1}`.
    pub fn dw(rho: f64, dim: Dimension) -> f64 {
        -(rho / dim.nf()) * q(rho, dim).powf(-dim.alpha() - 1.0)
    }

    pub fn d2w(rho: f64, dim: Dimension) -> f64 {
        let n = dim.nf();
        let a = dim.alpha();
        let qq = q(rho, dim);
        -qq.powf(-a - 1.0) / n + 2.0 * (a + 1.0) * rho * rho / (n * n * (n - 2.0)) * qq.powf(-a - 2.0)
    }

    pub fn d3w(rho: f64, dim: Dimension) -> f64 {
        let n = dim.nf();
        let a = dim.alpha();
        let qq = q(rho, dim);
        let c = 2.0 / (n * (n - 2.0));
        // d/dρ of the two terms of W''.
        (a + 1.0) * c * rho * qq.powf(-a - 2.0) / n
            + 2.0 * (a + 1.0) / (n * n * (n - 2.0))
                * (2.0 * rho * qq.powf(-a - 2.0) - (a + 2.0) * c * rho.powi(3) * qq.powf(-a - 3.0))
    }

    /// Dilation mode `Z_{n+1}(ρ) = αW + ρW'`.
    pub fn z_dilation(rho: f64, dim: Dimension) -> f64 {
        dim.alpha() * w(rho, dim) + rho * dw(rho, dim)
    }

    pub fn dz_dilation(rho: f64, dim: Dimension) -> f64 {
        (dim.alpha() + 1.0) * dw(rho, dim) + rho * d2w(rho, dim)
    }

    /// `pW^{p-1} = p q^{-2}`, the linearized potential.
    pub fn potential(rho: f64, dim: Dimension) -> f64 {
        dim.p() * q(rho, dim).powi(-2)
    }
}

/// `W_{ξ,λ}(x)`.
pub fn bubble_value(x: &[f64], params: &BubbleParams, dim: Dimension) -> Result<f64> {
    params.check(dim)?;
    check_point(x, dim)?;
    let l = params.lambda;
    let q = l * l + dist2(x, &params.xi) / (dim.nf() * (dim.nf() - 2.0));
    Ok((l / q).powf(dim.alpha()))
}

/// `∇W_{ξ,λ}(x) = -(λ^α/n) q^{-α-1} (x - ξ)`, `q = λ² + |x-ξ|²/(n(n-2))`.
pub fn bubble_gradient(x: &[f64], params: &BubbleParams, dim: Dimension) -> Result<Vec<f64>> {
    params.check(dim)?;
    check_point(x, dim)?;
    let l = params.lambda;
    let a = dim.alpha();
    let q = l * l + dist2(x, &params.xi) / (dim.nf() * (dim.nf() - 2.0));
    let c = -l.powf(a) * q.powf(-a - 1.0) / dim.nf();
    Ok(x.iter().zip(&params.xi).map(|(xi, c0)| c * (xi - c0)).collect())
}

/// `ΔW_{ξ,λ}(x)` from the closed-form second derivatives.
pub fn bubble_laplacian(x: &[f64], params: &BubbleParams, dim: Dimension) -> Result<f64> {
    params.check(dim)?;
    check_point(x, dim)?;
    let l = params.lambda;
    let a = dim.alpha();
    let n = dim.nf();
    let r2 = dist2(x, &params.xi);
    let q = l * l + r2 / (n * (n - 2.0));
    Ok(-(l.powf(a) / n) * (n * q.powf(-a - 1.0) - (a + 1.0) * q.powf(-a - 2.0) * 2.0 * r2 / (n * (n - 2.0))))
}

/// `-ΔW - W^p` at `x`; vanishes for every bubble.
pub fn stationary_residual(x: &[f64], params: &BubbleParams, dim: Dimension) -> Result<f64> {
    let w = bubble_value(x, params, dim)?;
    Ok(-bubble_laplacian(x, params, dim)? - w.powf(dim.p()))
}

/// Zero modes of the unit bubble: `Z_i = ∂W/∂y_i` for `1 ≤ i ≤ n` and
/// `Z_{n+1} = αW + y·∇W`.
pub fn kernel_z(i: usize, y: &[f64], dim: Dimension) -> Result<f64> {
    check_point(y, dim)?;
    let n = dim.n();
    if i == 0 || i > n + 1 {
        return Err(LabError::IndexOutOfRange { index: i, max: n + 1 });
    }
    let rho = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if i == n + 1 {
        return Ok(profile::z_dilation(rho, dim));
    }
    let q = 1.0 + rho * rho / (dim.nf() * (dim.nf() - 2.0));
    Ok(-q.powf(-dim.alpha() - 1.0) * y[i - 1] / dim.nf())
}

/// `Z_{i,ξ,λ}(x) = λ^{-n/2} Z_i((x-ξ)/λ)` for `0 ≤ i ≤ n+1`; `i = 0` needs
/// the tabulated negative mode.
pub fn scaled_kernel(
    i: usize,
    x: &[f64],
    params: &BubbleParams,
    dim: Dimension,
    spectral: Option<&SpectralData>,
) -> Result<f64> {
    params.check(dim)?;
    check_point(x, dim)?;
    let l = params.lambda;
    let scale = l.powf(-dim.nf() / 2.0);
    let y: Vec<f64> = x.iter().zip(&params.xi).map(|(a, b)| (a - b) / l).collect();
    if i == 0 {
        let sd = spectral.ok_or(LabError::MissingSpectralData)?;
        let rho = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        return Ok(scale * sd.z0(rho));
    }
    Ok(scale * kernel_z(i, &y, dim)?)
}

/// `Λ = ∫|∇W|²`, computed once per dimension by adaptive radial quadrature.
pub fn bubble_energy(dim: Dimension) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("energy cache").get(&dim.n()) {
        return Ok(*v);
    }
    let v = dirichlet_energy(dim)?;
    cache.lock().expect("energy cache").insert(dim.n(), v);
    Ok(v)
}

/// `∫|∇W|²` by Gauss-Kronrod on geometric panels.
pub fn dirichlet_energy(dim: Dimension) -> Result<f64> {
    radial_integral(|r| profile::dw(r, dim).powi(2), dim.n(), 1.0, 1e-13)
}

/// `∫W^{p+1}` by Gauss-Kronrod on geometric panels.
pub fn potential_energy(dim: Dimension) -> Result<f64> {
    radial_integral(|r| profile::w(r, dim).powf(dim.p() + 1.0), dim.n(), 1.0, 1e-13)
}

/// `∫|∇W|²` by Romberg extrapolation of trapezoid sums after mapping
/// `r = t/(1-t)` onto `[0, 1]`.
pub fn dirichlet_energy_romberg(dim: Dimension) -> Result<f64> {
    let n = dim.n() as i32;
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let r = t / (1.0 - t);
        let jac = 1.0 / ((1.0 - t) * (1.0 - t));
        profile::dw(r, dim).powi(2) * r.powi(n - 1) * jac
    };
    let (v, _) = romberg(g, 0.0, 1.0, 1e-12, 26)?;
    Ok(sphere_area(dim.n()) * v)
}

/// `∫ |∇W_{0,λ}|²` over ℝⁿ, for scale-invariance checks.
pub fn scaled_dirichlet_energy(dim: Dimension, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(LabError::Domain(format!("bubble scale must be positive, got {lambda}")));
    }
    let a = dim.alpha();
    radial_integral(
        |r| (lambda.powf(-a - 1.0) * profile::dw(r / lambda, dim)).powi(2),
        dim.n(),
        lambda,
        1e-13,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d7() -> Dimension {
        Dimension::new(7).unwrap()
    }

    #[test]
    fn dimension_constants() {
        let d = d7();
        assert!((d.p() - 1.8).abs() < 1e-15);
        assert!((d.blowup_exponent() - 1.25).abs() < 1e-15);
        // κ²/(2(p+1)) equals the Type I density.
        let k = d.kappa();
        assert!((k * k / (2.0 * (d.p() + 1.0)) - d.type_one_density()).abs() < 1e-14);
        assert!(Dimension::new(2).is_err());
        assert!(!Dimension::new(5).unwrap().in_classified_regime());
    }

    #[test]
    fn bubble_peak_values() {
        let d = d7();
        let v = bubble_value(&[0.0; 7], &BubbleParams::standard(d), d).unwrap();
        assert_eq!(v, 1.0);
        let v = bubble_value(&[0.0; 7], &BubbleParams::centered(d, 0.5), d).unwrap();
        assert!((v - 0.5f64.powf(-2.5)).abs() < 1e-12);
        assert!((v - 5.656854249492381).abs() < 1e-12);
        assert!(matches!(
            bubble_value(&[0.0; 7], &BubbleParams::centered(d, 0.0), d),
            Err(LabError::Domain(_))
        ));
        assert!(bubble_value(&[0.0; 7], &BubbleParams::centered(d, -1.0), d).is_err());
    }

    #[test]
    fn scaling_identity_at_random_points() {
        let d = d7();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lam: f64 = rng.random_range(0.1..4.0);
            let lx: Vec<f64> = x.iter().map(|v| lam * v).collect();
            let lhs = bubble_value(&lx, &BubbleParams::centered(d, lam), d).unwrap();
            let rhs = lam.powf(-2.5) * bubble_value(&x, &BubbleParams::standard(d), d).unwrap();
            assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs());
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let d = d7();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = BubbleParams::new(vec![0.2, -0.1, 0.0, 0.3, 0.0, 0.1, -0.4], 0.7, 0.0);
        assert!(bubble_gradient(&params.xi, &params, d).unwrap().iter().all(|g| *g == 0.0));
        for _ in 0..10 {
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = bubble_gradient(&x, &params, d).unwrap();
            for k in 0..7 {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (bubble_value(&xp, &params, d).unwrap() - bubble_value(&xm, &params, d).unwrap()) / (2.0 * h);
                let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((fd - g[k]).abs() <= 1e-8 * gn.max(1e-300), "k={k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn gradient_decays_like_r_to_one_minus_n() {
        let d = d7();
        let p = BubbleParams::standard(d);
        let mut x = vec![0.0; 7];
        x[0] = 1e3;
        let g1: f64 = bubble_gradient(&x, &p, d).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt();
        x[0] = 2e3;
        let g2: f64 = bubble_gradient(&x, &p, d).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt();
        // Asymptote: (n-2)·(n(n-2))^{α} r^{1-n}.
        let c = 5.0 * 35f64.powf(2.5);
        assert!((g1 * 1e3f64.powi(6) / c - 1.0).abs() < 1e-3);
        assert!(((g1 / g2).log2() - 6.0).abs() < 1e-3);
    }

    #[test]
    fn stationary_residual_vanishes() {
        let d = d7();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let lam: f64 = rng.random_range(0.2..3.0);
            let xi: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let params = BubbleParams::new(xi, lam, 0.0);
            let r = stationary_residual(&x, &params, d).unwrap();
            assert!(r.abs() <= 1e-10, "{r}");
        }
    }

    #[test]
    fn kernel_values_at_origin_and_range_errors() {
        let d = d7();
        let o = [0.0; 7];
        assert!((kernel_z(8, &o, d).unwrap() - 2.5).abs() < 1e-15);
        for i in 1..=7 {
            assert_eq!(kernel_z(i, &o, d).unwrap(), 0.0);
        }
        assert!(matches!(kernel_z(0, &o, d), Err(LabError::IndexOutOfRange { .. })));
        assert!(matches!(kernel_z(9, &o, d), Err(LabError::IndexOutOfRange { .. })));
        assert!(matches!(
            scaled_kernel(0, &o, &BubbleParams::standard(d), d, None),
            Err(LabError::MissingSpectralData)
        ));
    }

    #[test]
    fn kernel_decay_rates_are_bounded() {
        let d = d7();
        let mut lo1 = f64::INFINITY;
        let mut hi1: f64 = 0.0;
        let mut lo8 = f64::INFINITY;
        let mut hi8: f64 = 0.0;
        for k in 0..=40 {
            let r = 10f64.powf(2.0 + 2.0 * k as f64 / 40.0);
            let mut y = vec![0.0; 7];
            y[0] = r;
            let a = kernel_z(1, &y, d).unwrap().abs() * r.powi(6);
            let b = kernel_z(8, &y, d).unwrap().abs() * r.powi(5);
            lo1 = lo1.min(a);
            hi1 = hi1.max(a);
            lo8 = lo8.min(b);
            hi8 = hi8.max(b);
        }
        assert!(hi1 / lo1 < 1.05 && hi1 < 1e5);
        assert!(hi8 / lo8 < 1.05 && hi8 < 1e5);
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let d = d7();
        for &r in &[0.3, 1.0, 4.0, 12.0] {
            let h = 1e-5;
            let fd2 = (profile::dw(r + h, d) - profile::dw(r - h, d)) / (2.0 * h);
            let fd3 = (profile::d2w(r + h, d) - profile::d2w(r - h, d)) / (2.0 * h);
            let fdz = (profile::z_dilation(r + h, d) - profile::z_dilation(r - h, d)) / (2.0 * h);
            assert!((fd2 - profile::d2w(r, d)).abs() < 1e-8);
            assert!((fd3 - profile::d3w(r, d)).abs() < 1e-8);
            assert!((fdz - profile::dz_dilation(r, d)).abs() < 1e-8);
        }
    }

    #[test]
    fn energy_identities_and_dual_quadrature() {
        for n in [7usize, 8, 9] {
            let d = Dimension::new(n).unwrap();
            let grad = dirichlet_energy(d).unwrap();
            let pot = potential_energy(d).unwrap();
            assert!((grad / pot - 1.0).abs() < 1e-6, "n={n}: {grad} vs {pot}");
            let rom = dirichlet_energy_romberg(d).unwrap();
            assert!((grad / rom - 1.0).abs() < 1e-6, "n={n}: {grad} vs {rom}");
        }
        let d = d7();
        let lam = scaled_dirichlet_energy(d, 0.37).unwrap();
        assert!((lam / bubble_energy(d).unwrap() - 1.0).abs() < 1e-9);
        // Sobolev constant oracle: Λ = S^{n/2}, S = πn(n-2)(Γ(n/2)/Γ(n))^{2/n}.
        let nf = 7.0f64;
        let s = std::f64::consts::PI * nf * (nf - 2.0) * (libm::tgamma(nf / 2.0) / libm::tgamma(nf)).powf(2.0 / nf);
        assert!((bubble_energy(d).unwrap() / s.powf(nf / 2.0) - 1.0).abs() < 1e-9);
    }
}
