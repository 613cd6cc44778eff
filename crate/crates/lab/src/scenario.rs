//! Scenario files: TOML with strict keys.
//!
//! ```toml
//! n = 7
//! radius = 20.0
//!
//! [initial]
//! kind = "scaled_bubble"   # or "gaussian", "constant", "custom_table"
//! amplitude = 1.2
//! lambda = 1.0
//! ```
//!
//! Every other section is optional: `[grid]` (a [`GridSpec`]), `[solver]`
//! (a [`SolverConfig`], with `[solver.output]`), `[diagnostics]` (a
//! [`DiagnosticPlan`], with `[diagnostics.cutoff]`, `[diagnostics.fit]` and
//! `[diagnostics.profile]`), plus top-level `name` and `seed`.

use blowup_core::decomposition::{FitMode, FitOptions};
use blowup_core::diagnostics::CutoffSpec;
use blowup_core::solver::{load_snapshot, sample_initial, Mode, SolverConfig};
use blowup_core::{kernel, Dimension, GridSpec, LabError, RadialField, RadialGrid, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `A · W_{0,λ}`.
    ScaledBubble { amplitude: f64, lambda: f64 },
    /// `A e^{-r²/(2σ²)}`.
    Gaussian { amplitude: f64, sigma: f64 },
    /// `u ≡ A`, meant for reaction-only runs.
    Constant { amplitude: f64 },
    /// Two-column CSV `(r, u)`, resampled onto the run grid. Relative paths
    /// are resolved against the scenario file.
    CustomTable { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfilePlan {
    pub enabled: bool,
    pub y_max: f64,
    pub points: usize,
    /// Snapshots with `T - t` below this enter the profile.
    pub window: f64,
}

impl Default for ProfilePlan {
    fn default() -> Self {
        ProfilePlan {
            enabled: true,
            y_max: 5.0,
            points: 101,
            window: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticPlan {
    /// Density classification and Θ monotonicity at each point.
    pub classify: bool,
    /// Base points; empty means the origin.
    pub points: Vec<Vec<f64>>,
    pub cutoff: CutoffSpec,
    /// Backward offsets `s` for the monotonicity scan; empty means four per
    /// decade from `4(T - t_end)` up to the start of the run.
    pub theta_s: Vec<f64>,
    pub theta_tol: f64,
    /// Empty means `R/40`, `R/20` and `R/4`.
    pub pohozaev_radii: Vec<f64>,
    /// Relative tolerance on the evolving Pohozaev identity.
    pub pohozaev_tol: f64,
    pub track: bool,
    pub fit: FitOptions,
    pub tree: bool,
    pub profile: ProfilePlan,
}

impl Default for DiagnosticPlan {
    fn default() -> Self {
        DiagnosticPlan {
            classify: true,
            points: Vec::new(),
            cutoff: CutoffSpec::default(),
            theta_s: Vec::new(),
            theta_tol: 1e-4,
            pohozaev_radii: Vec::new(),
            pohozaev_tol: 1e-2,
            track: true,
            fit: FitOptions {
                mode: Some(FitMode::Radial),
                ..FitOptions::default()
            },
            tree: false,
            profile: ProfilePlan::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub radius: f64,
    #[serde(default)]
    pub grid: GridSpec,
    pub initial: InitialData,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticPlan,
    /// Seed for randomized steps (bubble-tree seeds). Stored as a TOML
    /// integer, so at most `i64::MAX`.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    0x5eed
}

impl Scenario {
    pub fn dim(&self) -> Result<Dimension> {
        Dimension::new(self.n)
    }

    /// Checks the invariants serde cannot express.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim()?;
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(LabError::Domain(format!("radius must be positive, got {}", self.radius)));
        }
        self.solver.validate()?;
        match &self.initial {
            InitialData::ScaledBubble { amplitude, lambda } => {
                finite("initial.amplitude", *amplitude)?;
                positive("initial.lambda", *lambda)?;
            }
            InitialData::Gaussian { amplitude, sigma } => {
                finite("initial.amplitude", *amplitude)?;
                positive("initial.sigma", *sigma)?;
            }
            InitialData::Constant { amplitude } => finite("initial.amplitude", *amplitude)?,
            InitialData::CustomTable { path } => {
                if !path.is_file() {
                    return Err(LabError::Io(format!("initial table {} does not exist", path.display())));
                }
            }
        }
        let d = &self.diagnostics;
        for p in &d.points {
            if p.len() != dim.n() {
                return Err(LabError::Domain(format!("diagnostic point has {} components in dimension {}", p.len(), dim.n())));
            }
        }
        if d.theta_s.iter().any(|s| !(*s > 0.0)) || !d.theta_s.windows(2).all(|w| w[1] > w[0]) {
            return Err(LabError::Domain("diagnostics.theta_s must be positive and increasing".into()));
        }
        for r in &d.pohozaev_radii {
            if !(*r > 0.0 && *r < self.radius) {
                return Err(LabError::Domain(format!("Pohozaev radius {r} outside (0, {})", self.radius)));
            }
        }
        positive("diagnostics.theta_tol", d.theta_tol)?;
        positive("diagnostics.pohozaev_tol", d.pohozaev_tol)?;
        positive("diagnostics.profile.y_max", d.profile.y_max)?;
        positive("diagnostics.profile.window", d.profile.window)?;
        if d.profile.points < 2 {
            return Err(LabError::Domain("diagnostics.profile.points must be at least 2".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(LabError::Domain("seed must fit in a signed 64-bit integer".into()));
        }
        self.grid()?;
        Ok(())
    }

    /// Non-fatal remarks about the scenario.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(d) = self.dim() {
            if !d.in_classified_regime() {
                out.push(format!("n = {} is below 7, outside the regime where the Type I classification applies", d.n()));
            }
        }
        if self.solver.mode == Mode::ReactionOnly && !matches!(self.initial, InitialData::Constant { .. }) {
            out.push("reaction-only mode with non-constant data: every node is an independent ODE".into());
        }
        out
    }

    pub fn pohozaev_radii(&self) -> Vec<f64> {
        if self.diagnostics.pohozaev_radii.is_empty() {
            vec![self.radius / 40.0, self.radius / 20.0, self.radius / 4.0]
        } else {
            self.diagnostics.pohozaev_radii.clone()
        }
    }

    pub fn grid(&self) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::from_spec(self.n, self.radius, &self.grid)?))
    }

    pub fn initial_field(&self) -> Result<RadialField> {
        let grid = self.grid()?;
        let dim = self.dim()?;
        match &self.initial {
            InitialData::ScaledBubble { amplitude, lambda } => {
                let (a, l) = (*amplitude, *lambda);
                sample_initial(grid, |r| a * l.powf(-dim.alpha()) * kernel::profile::w(r / l, dim))
            }
            InitialData::Gaussian { amplitude, sigma } => {
                let (a, s) = (*amplitude, *sigma);
                sample_initial(grid, |r| a * (-r * r / (2.0 * s * s)).exp())
            }
            InitialData::Constant { amplitude } => {
                let a = *amplitude;
                sample_initial(grid, |_| a)
            }
            InitialData::CustomTable { path } => {
                let table = load_snapshot(path, self.n)?;
                let edge = table.grid().radius();
                sample_initial(grid, |r| if r <= edge { table.value_at(r) } else { 0.0 })
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Parse(e.to_string()))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(LabError::Domain(format!("{name} must be finite")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::Domain(format!("{name} must be positive, got {v}")))
    }
}

/// Parses scenario text; relative table paths are resolved against `base`.
pub fn parse_scenario(text: &str, base: &Path) -> Result<Scenario> {
    let mut sc: Scenario = toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
    if let InitialData::CustomTable { path } = &mut sc.initial {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    sc.validate()?;
    Ok(sc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut sc = parse_scenario(&text, base).map_err(|e| match e {
        LabError::Parse(m) => LabError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if sc.name.is_none() {
        sc.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "n = 7\nradius = 20.0\n[initial]\nkind = \"scaled_bubble\"\namplitude = 1.2\nlambda = 1.0\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let sc = parse_scenario(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(sc.n, 7);
        assert_eq!(sc.grid, GridSpec::default());
        assert_eq!(sc.solver, SolverConfig::default());
        assert_eq!(sc.diagnostics, DiagnosticPlan::default());
        assert_eq!(sc.seed, 0x5eed);
        assert!(sc.warnings().is_empty());
        assert_eq!(
            sc.initial,
            InitialData::ScaledBubble {
                amplitude: 1.2,
                lambda: 1.0
            }
        );
    }

    #[test]
    fn bad_files_are_rejected() {
        let low = MINIMAL.replace("n = 7", "n = 2");
        assert!(parse_scenario(&low, Path::new(".")).is_err());
        let unknown = format!("{MINIMAL}colour = 3\n");
        assert!(matches!(parse_scenario(&unknown, Path::new(".")), Err(LabError::Parse(_))));
        let nested = MINIMAL.replace("lambda = 1.0", "lambda = 1.0\nwidth = 2.0");
        assert!(parse_scenario(&nested, Path::new(".")).is_err());
        let solver = format!("{MINIMAL}[solver]\nrtol = -1.0\n");
        assert!(parse_scenario(&solver, Path::new(".")).is_err());
        let table = MINIMAL
            .replace("kind = \"scaled_bubble\"", "kind = \"custom_table\"\npath = \"missing.csv\"")
            .replace("amplitude = 1.2\nlambda = 1.0\n", "");
        assert!(matches!(parse_scenario(&table, Path::new("/nonexistent")), Err(LabError::Io(_))));
        let radius = format!("{MINIMAL}[diagnostics]\npohozaev_radii = [25.0]\n");
        assert!(parse_scenario(&radius, Path::new(".")).is_err());
    }

    #[test]
    fn low_dimension_is_flagged() {
        let sc = parse_scenario(&MINIMAL.replace("n = 7", "n = 5"), Path::new(".")).unwrap();
        assert_eq!(sc.warnings().len(), 1);
    }

    #[test]
    fn initial_data_families() {
        let mut sc = parse_scenario(MINIMAL, Path::new(".")).unwrap();
        let d = sc.dim().unwrap();
        let u = sc.initial_field().unwrap();
        assert!((u.values()[0] - 1.2).abs() < 1e-15);
        assert!((u.value_at(1.0) - 1.2 * kernel::profile::w(1.0, d)).abs() < 1e-9);
        assert!((u.values().last().unwrap() - 1.2 * kernel::profile::w(20.0, d)).abs() < 1e-15);
        sc.initial = InitialData::Gaussian {
            amplitude: 2.0,
            sigma: 0.5,
        };
        let g = sc.initial_field().unwrap();
        assert!((g.value_at(0.5) - 2.0 * (-0.5f64).exp()).abs() < 1e-9);

        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("u0.csv");
        let mut body = String::from("r,u\n");
        for k in 0..=40 {
            let r = 0.25 * k as f64;
            body.push_str(&format!("{r},{}\n", 1.0 - r * r / 100.0));
        }
        fs::write(&table, body).unwrap();
        let text = MINIMAL
            .replace("kind = \"scaled_bubble\"", "kind = \"custom_table\"\npath = \"u0.csv\"")
            .replace("amplitude = 1.2\nlambda = 1.0\n", "");
        let sc = parse_scenario(&text, dir.path()).unwrap();
        let t = sc.initial_field().unwrap();
        assert!((t.value_at(3.0) - 0.91).abs() < 1e-9);
        assert!(t.value_at(15.0).abs() < 1e-12);
    }

    #[test]
    fn loading_fills_the_name_from_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("near_bubble.toml");
        fs::write(&path, MINIMAL).unwrap();
        assert_eq!(load_scenario(&path).unwrap().name.as_deref(), Some("near_bubble"));
        assert!(load_scenario(&dir.path().join("absent.toml")).is_err());
    }

    fn initial_strategy() -> impl Strategy<Value = InitialData> {
        prop_oneof![
            (-5.0f64..5.0, 0.1f64..5.0).prop_map(|(amplitude, lambda)| InitialData::ScaledBubble { amplitude, lambda }),
            (-5.0f64..5.0, 0.1f64..5.0).prop_map(|(amplitude, sigma)| InitialData::Gaussian { amplitude, sigma }),
            (-5.0f64..5.0).prop_map(|amplitude| InitialData::Constant { amplitude }),
        ]
    }

    fn scenario_strategy() -> impl Strategy<Value = Scenario> {
        (
            3usize..12,
            1.0f64..50.0,
            prop_oneof![
                (16usize..4000).prop_map(|intervals| GridSpec::Uniform { intervals }),
                (1e-5f64..1e-3, 1.001f64..1.1, 0.01f64..0.5)
                    .prop_map(|(h_min, ratio, h_max)| GridSpec::Graded { h_min, ratio, h_max }),
            ],
            initial_strategy(),
            (1e-9f64..1e-3, 1e3f64..1e10, proptest::option::of(1usize..100), any::<bool>()),
            (any::<bool>(), any::<bool>(), proptest::collection::vec(0.01f64..0.9, 0..4), 0u64..i64::MAX as u64),
            proptest::option::of("[a-z_]{1,12}"),
        )
            .prop_map(|(n, radius, grid, initial, (rtol, u_max, every, reaction), (classify, track, radii, seed), name)| {
                let mut sc = Scenario {
                    name,
                    n,
                    radius,
                    grid,
                    initial,
                    solver: SolverConfig::default(),
                    diagnostics: DiagnosticPlan::default(),
                    seed,
                };
                sc.solver.rtol = rtol;
                sc.solver.u_max = u_max;
                sc.solver.output.every_n_steps = every;
                if reaction {
                    sc.solver.mode = Mode::ReactionOnly;
                }
                sc.diagnostics.classify = classify;
                sc.diagnostics.track = track;
                sc.diagnostics.pohozaev_radii = radii.iter().map(|f| f * radius).collect();
                sc
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn serialization_round_trips(sc in scenario_strategy()) {
            let text = sc.to_toml().unwrap();
            let back = parse_scenario(&text, Path::new(".")).unwrap();
            prop_assert_eq!(&back, &sc);
            prop_assert_eq!(back.to_toml().unwrap(), text);
        }
    }
}
