use crate::error::{LabError, Result};
use crate::grid::RadialField;
use crate::kernel::{bubble_gradient, bubble_value, BubbleParams, Dimension, SpectralData};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PdeSnapshot,
    Synthetic,
    Analytic,
}

/// Pointwise access to a field on ℝⁿ.
pub trait FieldSampler: Send + Sync {
    fn dim(&self) -> Dimension;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Point about which the field is radially symmetric, if any.
    fn symmetry_center(&self) -> Option<Vec<f64>> {
        None
    }
    fn provenance(&self) -> Provenance;
}

fn check_len(x: &[f64], dim: Dimension) -> Result<()> {
    if x.len() != dim.n() {
        return Err(LabError::Domain(format!("point has {} components in dimension {}", x.len(), dim.n())));
    }
    Ok(())
}

/// A radial snapshot `u(|x|)`, extended by zero outside its grid.
#[derive(Debug, Clone)]
pub struct RadialSampler {
    field: RadialField,
    dim: Dimension,
}

impl RadialSampler {
    pub fn new(field: RadialField) -> Result<Self> {
        let dim = Dimension::new(field.grid().dim())?;
        Ok(RadialSampler { field, dim })
    }

    pub fn field(&self) -> &RadialField {
        &self.field
    }
}

impl FieldSampler for RadialSampler {
    fn dim(&self) -> Dimension {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(x, self.dim)?;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(self.field.value_at(r))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.dim)?;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let (_, slope) = self.field.value_and_slope(r);
        Ok(x.iter().map(|v| slope * v / r).collect())
    }

    fn symmetry_center(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim.n()])
    }

    fn provenance(&self) -> Provenance {
        Provenance::PdeSnapshot
    }
}

/// `Σ_j W_{ξ_j,λ_j} + a_j Z_{0,ξ_j,λ_j}`.
#[derive(Debug, Clone)]
pub struct BubbleField {
    dim: Dimension,
    terms: Vec<BubbleParams>,
    spectral: Option<Arc<SpectralData>>,
}

impl BubbleField {
    /// Terms with `a ≠ 0` need `spectral`.
    pub fn new(dim: Dimension, terms: Vec<BubbleParams>, spectral: Option<Arc<SpectralData>>) -> Result<Self> {
        for t in &terms {
            bubble_value(&t.xi, t, dim)?;
            if t.a != 0.0 && spectral.is_none() {
                return Err(LabError::MissingSpectralData);
            }
        }
        Ok(BubbleField { dim, terms, spectral })
    }

    pub fn terms(&self) -> &[BubbleParams] {
        &self.terms
    }
}

impl FieldSampler for BubbleField {
    fn dim(&self) -> Dimension {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(x, self.dim)?;
        let mut v = 0.0;
        for t in &self.terms {
            v += bubble_value(x, t, self.dim)?;
            if t.a != 0.0 {
                let sd = self.spectral.as_ref().ok_or(LabError::MissingSpectralData)?;
                let rho = x.iter().zip(&t.xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / t.lambda;
                v += t.a * t.lambda.powf(-self.dim.nf() / 2.0) * sd.z0(rho);
            }
        }
        Ok(v)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.dim)?;
        let mut g = vec![0.0; x.len()];
        for t in &self.terms {
            for (gk, bk) in g.iter_mut().zip(bubble_gradient(x, t, self.dim)?) {
                *gk += bk;
            }
            if t.a != 0.0 {
                let sd = self.spectral.as_ref().ok_or(LabError::MissingSpectralData)?;
                let d: Vec<f64> = x.iter().zip(&t.xi).map(|(a, b)| a - b).collect();
                let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r > 0.0 {
                    let c = t.a * t.lambda.powf(-self.dim.nf() / 2.0 - 1.0) * sd.z0_derivative(r / t.lambda) / r;
                    for (gk, dk) in g.iter_mut().zip(&d) {
                        *gk += c * dk;
                    }
                }
            }
        }
        Ok(g)
    }

    fn symmetry_center(&self) -> Option<Vec<f64>> {
        match self.terms.as_slice() {
            [one] => Some(one.xi.clone()),
            _ => None,
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::Synthetic
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Closed-form field given by closures.
#[derive(Clone)]
pub struct FnSampler {
    dim: Dimension,
    value: Arc<ValueFn>,
    gradient: Arc<GradFn>,
    center: Option<Vec<f64>>,
}

impl std::fmt::Debug for FnSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnSampler").field("dim", &self.dim).field("center", &self.center).finish()
    }
}

impl FnSampler {
    pub fn new<V, G>(dim: Dimension, value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        FnSampler {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            center: None,
        }
    }

    /// Declares the field radially symmetric about `center`.
    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = Some(center);
        self
    }
}

impl FieldSampler for FnSampler {
    fn dim(&self) -> Dimension {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(x, self.dim)?;
        let v = (self.value)(x);
        if !v.is_finite() {
            return Err(LabError::Domain("sampler returned a non-finite value".into()));
        }
        Ok(v)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.dim)?;
        Ok((self.gradient)(x))
    }

    fn symmetry_center(&self) -> Option<Vec<f64>> {
        self.center.clone()
    }

    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
}

/// `μ^{-(n-2)/2} u((x - v)/μ)`: the critical rescaling of `inner` by `μ`
/// followed by a translation by `v`.
pub struct AffineView<S: FieldSampler> {
    inner: S,
    shift: Vec<f64>,
    scale: f64,
}

impl<S: FieldSampler> AffineView<S> {
    pub fn new(inner: S, shift: Vec<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || shift.len() != inner.dim().n() {
            return Err(LabError::Domain("affine view needs μ > 0 and a shift in ℝⁿ".into()));
        }
        Ok(AffineView { inner, shift, scale })
    }

    fn pull_back(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(a, b)| (a - b) / self.scale).collect()
    }
}

impl<S: FieldSampler> FieldSampler for AffineView<S> {
    fn dim(&self) -> Dimension {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(x, self.dim())?;
        Ok(self.scale.powf(-self.dim().alpha()) * self.inner.value(&self.pull_back(x))?)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.dim())?;
        let c = self.scale.powf(-self.dim().alpha() - 1.0);
        Ok(self.inner.gradient(&self.pull_back(x))?.into_iter().map(|g| c * g).collect())
    }

    fn symmetry_center(&self) -> Option<Vec<f64>> {
        self.inner
            .symmetry_center()
            .map(|c| c.iter().zip(&self.shift).map(|(a, b)| self.scale * a + b).collect())
    }

    fn provenance(&self) -> Provenance {
        self.inner.provenance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::kernel::{ground_state, profile};

    fn fd_gradient(s: &dyn FieldSampler, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|k| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[k] += h;
                b[k] -= h;
                (s.value(&a).unwrap() - s.value(&b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn bubble_field_gradient_matches_differences() {
        let d = Dimension::new(7).unwrap();
        let sd = Arc::new(ground_state(d).unwrap());
        let terms = vec![
            BubbleParams::new(vec![0.1, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0], 0.7, 0.03),
            BubbleParams::new(vec![-1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0], 0.3, 0.0),
        ];
        let f = BubbleField::new(d, terms, Some(sd)).unwrap();
        assert!(f.symmetry_center().is_none());
        let x = [0.4, -0.3, 0.1, 0.2, 0.0, -0.1, 0.3];
        for (a, b) in f.gradient(&x).unwrap().iter().zip(fd_gradient(&f, &x)) {
            assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn negative_mode_terms_need_spectral_data() {
        let d = Dimension::new(7).unwrap();
        let t = BubbleParams::new(vec![0.0; 7], 1.0, 0.1);
        assert!(matches!(BubbleField::new(d, vec![t], None), Err(LabError::MissingSpectralData)));
    }

    #[test]
    fn radial_sampler_follows_the_field() {
        let d = Dimension::new(7).unwrap();
        let grid = Arc::new(RadialGrid::uniform(7, 5.0, 500).unwrap());
        let f = RadialField::from_fn(grid, 0.0, |r| profile::w(r, d)).unwrap();
        let s = RadialSampler::new(f).unwrap();
        let x = [0.3, 0.4, 0.0, 0.0, 0.0, 0.0, 1.2];
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((s.value(&x).unwrap() - profile::w(r, d)).abs() < 1e-8);
        for (a, b) in s.gradient(&x).unwrap().iter().zip(fd_gradient(&s, &x)) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(s.value(&[6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(s.value(&[0.0; 3]).is_err());
        assert_eq!(s.provenance(), Provenance::PdeSnapshot);
    }

    #[test]
    fn affine_view_rescales_bubbles_to_bubbles() {
        let d = Dimension::new(7).unwrap();
        let p = BubbleParams::new(vec![0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.8, 0.0);
        let f = BubbleField::new(d, vec![p], None).unwrap();
        let (mu, v) = (0.3, vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let view = AffineView::new(f, v.clone(), mu).unwrap();
        let q = BubbleParams::new(
            vec![0.2 * mu + 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.5],
            0.8 * mu,
            0.0,
        );
        let direct = BubbleField::new(d, vec![q.clone()], None).unwrap();
        for x in [[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.5], [1.3, -0.8, 0.1, 0.0, 0.2, 0.0, 0.4]] {
            assert!((view.value(&x).unwrap() / direct.value(&x).unwrap() - 1.0).abs() < 1e-13);
            for (a, b) in view.gradient(&x).unwrap().iter().zip(direct.gradient(&x).unwrap()) {
                assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()));
            }
        }
        assert_eq!(view.symmetry_center().unwrap(), q.xi);
        assert!(AffineView::new(direct, vec![0.0; 7], 0.0).is_err());
    }
}
