//! Cross-module invariants on the public API.

use blowup_core::decomposition::{BubbleField, FieldSampler};
use blowup_core::diagnostics::{classify, pohozaev, pohozaev_sampler, theta_of_field, CutoffSpec, Extension};
use blowup_core::kernel::{bubble_energy, profile};
use blowup_core::solver::{load_trajectory, run_until_blowup, save_trajectory, Mode, SolverConfig};
use blowup_core::{BubbleParams, Dimension, RadialField, RadialGrid};
use proptest::prelude::*;
use std::sync::Arc;

fn scaled_bubble(grid: Arc<RadialGrid>, lam: f64, d: Dimension) -> RadialField {
    RadialField::from_fn(grid, 0.0, |r| lam.powf(-d.alpha()) * profile::w(r / lam, d)).unwrap()
}

#[test]
fn saved_trajectories_classify_identically() {
    let grid = Arc::new(RadialGrid::uniform(7, 1.0, 16).unwrap());
    let u0 = RadialField::from_fn(grid, 0.0, |_| 1.5).unwrap();
    let cfg = SolverConfig {
        mode: Mode::ReactionOnly,
        ..SolverConfig::default()
    };
    let traj = run_until_blowup(&u0, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_trajectory(&traj, dir.path()).unwrap();
    let back = load_trajectory(dir.path()).unwrap();
    let a = classify(&traj, &[0.0; 7], &CutoffSpec::bare()).unwrap();
    let b = classify(&back, &[0.0; 7], &CutoffSpec::bare()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// `Θ_s` is invariant under `u ↦ μ^α u(μ·)`, `s ↦ s/μ²` for the bare cutoff.
    #[test]
    fn theta_is_scale_invariant(mu in 0.3f64..3.0, s in 1e-3f64..1.0) {
        let d = Dimension::new(7).unwrap();
        let base = Arc::new(RadialGrid::graded(7, 20.0, 1e-3, 1.02, 0.05).unwrap());
        let u = scaled_bubble(base.clone(), 1.0, d);
        let scaled_grid = Arc::new(base.scaled(1.0 / mu).unwrap());
        let v = scaled_bubble(scaled_grid, 1.0 / mu, d);
        let cutoff = CutoffSpec::bare();
        let a = theta_of_field(&u, Extension::Zero, &[0.0; 7], s, &cutoff).unwrap();
        let b = theta_of_field(&v, Extension::Zero, &[0.0; 7], s / (mu * mu), &cutoff).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-3), "{a} vs {b}");
    }

    /// Grid and sampler forms of `P_v(r)` agree on a centred bubble.
    #[test]
    fn radial_and_sampled_pohozaev_agree(lam in 0.3f64..3.0, r in 0.2f64..4.0) {
        let d = Dimension::new(7).unwrap();
        let grid = Arc::new(RadialGrid::uniform(7, 8.0, 8000).unwrap());
        let field = scaled_bubble(grid, lam, d);
        let sampler = BubbleField::new(d, vec![BubbleParams::centered(d, lam)], None).unwrap();
        let radial = pohozaev(&field, r).unwrap();
        let sampled = pohozaev_sampler(&sampler, &[0.0; 7], r, 3).unwrap();
        prop_assert!((radial - sampled).abs() <= 1e-6 * sampled.abs().max(1e-6), "{radial} vs {sampled}");
    }

    /// A bubble's value is `λ^{-α}W(|x-ξ|/λ)` for any centre.
    #[test]
    fn bubble_field_matches_the_profile(
        lam in 0.1f64..5.0,
        xi in proptest::collection::vec(-2.0f64..2.0, 7),
        x in proptest::collection::vec(-3.0f64..3.0, 7),
    ) {
        let d = Dimension::new(7).unwrap();
        let field = BubbleField::new(d, vec![BubbleParams::new(xi.clone(), lam, 0.0)], None).unwrap();
        let r = x.iter().zip(&xi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let expected = lam.powf(-d.alpha()) * profile::w(r / lam, d);
        prop_assert!((field.value(&x).unwrap() - expected).abs() <= 1e-14 * expected);
    }
}

#[test]
fn bubble_energy_is_the_sobolev_constant_power() {
    // Λ = S^{n/2} with S = (1/4)n(n-2)|S^n|^{2/n}.
    for n in [7usize, 8, 9] {
        let d = Dimension::new(n).unwrap();
        let nf = n as f64;
        let sphere = 2.0 * std::f64::consts::PI.powf((nf + 1.0) / 2.0) / libm::tgamma((nf + 1.0) / 2.0);
        let s = 0.25 * nf * (nf - 2.0) * sphere.powf(2.0 / nf);
        let lambda = bubble_energy(d).unwrap();
        assert!((lambda / s.powf(nf / 2.0) - 1.0).abs() < 1e-10, "n={n}: {lambda}");
    }
}
