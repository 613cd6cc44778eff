//! One scenario end to end: solve, then every enabled diagnostic, with each
//! stage's outputs written next to the trajectory.
//!
//! Layout of a run directory:
//!
//! * `trajectory/`: snapshots, grid, sup history and time-derivative budget
//! * `theta.csv`: `point, s, theta` for each monotonicity scan
//! * `pohozaev.csv`: `t, r, lhs, rhs, residual`
//! * `track.csv`: one row per tracked snapshot
//! * `profile.csv`: `t, gap, sup_deviation, band_lo, band_hi`
//! * `manifest.json`

use crate::manifest::{inventory, PointReport, ProfileSummary, RunManifest, RunStatus, TrackSummary, TreeSummary};
use crate::scenario::Scenario;
use blowup_core::decomposition::{bubble_tree, default_c2, track_parameters, Domain, RadialSampler, TrackOptions, TreeOptions};
use blowup_core::diagnostics::{classify_at, pohozaev_identity_residual, theta_monotonicity_report, Verdict};
use blowup_core::kernel::{ground_state, SpectralData};
use blowup_core::solver::{estimate_blowup_time, run_until_blowup, save_trajectory, BlowupFit, Termination, Trajectory};
use blowup_core::tangent::{liouville_distance, self_similar_profile, ProfileOptions};
use blowup_core::{LabError, Result};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LabError::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| LabError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| LabError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `scenario` into `out`. Stage failures are recorded in the manifest;
/// only failures to write the manifest itself are returned as errors.
pub fn run(scenario: &Scenario, out: &Path, spectral: Option<&SpectralData>) -> Result<RunManifest> {
    let start = Instant::now();
    let mut manifest = RunManifest::new(scenario.clone());
    manifest.write(out)?;
    let mut files = Vec::new();
    let mut stages = Stages {
        scenario,
        out,
        spectral,
        manifest: &mut manifest,
        files: &mut files,
    };
    if let Err(e) = stages.all() {
        stages.manifest.errors.push(e.to_string());
    }
    match inventory(out, &files) {
        Ok(entries) => manifest.files = entries,
        Err(e) => manifest.errors.push(format!("inventory: {e}")),
    }
    manifest.status = RunStatus::Complete;
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(manifest)
}

struct Stages<'a> {
    scenario: &'a Scenario,
    out: &'a Path,
    spectral: Option<&'a SpectralData>,
    manifest: &'a mut RunManifest,
    files: &'a mut Vec<PathBuf>,
}

impl Stages<'_> {
    fn attempt<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Option<T> {
        match f(self) {
            Ok(v) => Some(v),
            Err(e) => {
                self.manifest.errors.push(format!("{stage}: {e}"));
                None
            }
        }
    }

    fn all(&mut self) -> Result<()> {
        let u0 = self.scenario.initial_field()?;
        let traj = run_until_blowup(&u0, &self.scenario.solver)?;
        self.manifest.termination = Some(traj.termination.clone());
        self.manifest.steps = traj.steps;
        self.manifest.rejected = traj.rejected;
        self.manifest.check(
            "solver_finished",
            !traj.is_aborted(),
            format!("{:?} after {} steps", traj.termination, traj.steps),
        );
        let written = save_trajectory(&traj, &self.out.join("trajectory"))?;
        self.files.extend(written);

        let radii = self.scenario.pohozaev_radii();
        if !radii.is_empty() {
            self.attempt("pohozaev", |s| s.pohozaev(&traj, &radii));
        }
        let fit = if traj.termination == Termination::Blowup {
            self.attempt("blowup fit", |_| estimate_blowup_time(&traj))
        } else {
            None
        };
        self.manifest.blowup = fit;
        let Some(fit) = fit else {
            return Ok(());
        };
        let plan = &self.scenario.diagnostics;
        if plan.classify {
            self.attempt("classification", |s| s.classify(&traj, &fit));
        }
        if plan.track {
            self.attempt("tracking", |s| s.track(&traj, &fit));
        }
        if plan.profile.enabled {
            self.attempt("profile", |s| s.profile(&traj, &fit));
        }
        if plan.tree {
            self.attempt("bubble tree", |s| s.tree(&traj));
        }
        Ok(())
    }

    /// Evolving identity at the snapshot closest to the middle of the run.
    fn pohozaev(&mut self, traj: &Trajectory, radii: &[f64]) -> Result<()> {
        let mid = 0.5 * (traj.t_start() + traj.t_end());
        let t = traj
            .times()
            .into_iter()
            .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
            .unwrap_or(mid);
        let tol = self.scenario.diagnostics.pohozaev_tol;
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for &r in radii {
            let res = pohozaev_identity_residual(traj, t, r)?;
            let scale = res.lhs.abs().max(res.rhs.abs());
            ok &= res.residual <= tol * scale || res.residual <= 1e-10;
            worst = worst.max(if scale > 0.0 { res.residual / scale } else { 0.0 });
            rows.push(vec![fmt17(res.t), fmt17(r), fmt17(res.lhs), fmt17(res.rhs), fmt17(res.residual)]);
            self.manifest.pohozaev.push(res);
        }
        let path = self.out.join("pohozaev.csv");
        write_csv(&path, &["t", "r", "lhs", "rhs", "residual"], &rows)?;
        self.files.push(path);
        self.manifest
            .check("pohozaev_identity", ok, format!("worst relative residual {worst:.3e} at t = {t}"));
        Ok(())
    }

    fn classify(&mut self, traj: &Trajectory, fit: &BlowupFit) -> Result<()> {
        let plan = &self.scenario.diagnostics;
        let dim = traj.dim();
        let tb = fit.t_blowup;
        let points = if plan.points.is_empty() {
            vec![vec![0.0; dim.n()]]
        } else {
            plan.points.clone()
        };
        let s_list = if plan.theta_s.is_empty() {
            let s0 = 4.0 * (tb - traj.t_end());
            (0..)
                .map(|k| s0 * 10f64.powf(0.25 * k as f64))
                .take_while(|s| *s < tb - traj.t_start())
                .collect()
        } else {
            plan.theta_s.clone()
        };
        let mut rows = Vec::new();
        for (i, x) in points.iter().enumerate() {
            let c = classify_at(traj, x, tb, &plan.cutoff)?;
            let mono = theta_monotonicity_report(traj, x, tb, &s_list, &plan.cutoff, plan.theta_tol)?;
            for q in &mono.samples {
                rows.push(vec![i.to_string(), fmt17(q.s), fmt17(q.value)]);
            }
            self.manifest.points.push(PointReport {
                point: x.clone(),
                verdict: c.verdict,
                theta_limit: c.theta_limit,
                band: c.band,
                monotonicity_violations: mono.violations,
            });
        }
        let path = self.out.join("theta.csv");
        write_csv(&path, &["point", "s", "theta"], &rows)?;
        self.files.push(path);
        let violations: usize = self.manifest.points.iter().map(|p| p.monotonicity_violations.len()).sum();
        self.manifest.check(
            "theta_monotone",
            violations == 0,
            format!("{violations} violations over {} values of s", s_list.len()),
        );
        if dim.in_classified_regime() {
            let type_two = self.manifest.points.iter().filter(|p| matches!(p.verdict, Verdict::TypeII { .. })).count();
            self.manifest
                .check("no_type_two", type_two == 0, format!("{type_two} points classified as Type II"));
        }
        Ok(())
    }

    fn track(&mut self, traj: &Trajectory, fit: &BlowupFit) -> Result<()> {
        let owned;
        let spectral = match self.spectral {
            Some(s) if s.dim() == traj.dim() => s,
            _ => {
                owned = ground_state(traj.dim())?;
                &owned
            }
        };
        let opts = TrackOptions {
            fit: self.scenario.diagnostics.fit.clone(),
            blowup_time: Some(fit.t_blowup),
            ..TrackOptions::default()
        };
        let track = track_parameters(traj, spectral, &opts)?;
        let rows: Vec<Vec<String>> = track
            .entries
            .iter()
            .map(|e| {
                vec![
                    fmt17(e.t),
                    fmt17(e.lambda),
                    fmt17(e.a),
                    e.converged.to_string(),
                    fmt17(e.dlambda_dt),
                    fmt17(e.lipschitz_ratio),
                    fmt17(e.normalized_ratio),
                ]
            })
            .collect();
        let path = self.out.join("track.csv");
        write_csv(
            &path,
            &["t", "lambda", "a", "converged", "dlambda_dt", "lipschitz_ratio", "normalized_ratio"],
            &rows,
        )?;
        self.files.push(path);
        let summary = TrackSummary {
            snapshots: track.entries.len(),
            converged: track.entries.iter().filter(|e| e.converged).count(),
            k: track.k,
            c_lipschitz: track.c_lipschitz,
            c_normalized: track.c_normalized,
            lipschitz_trend: track.lipschitz_trend(),
            max_relative_a: track.max_relative_a(),
            violations: track.violations.clone(),
        };
        self.manifest.check(
            "parameter_bounds",
            summary.violations.is_empty(),
            format!("{} violations, C = {:.4e}", summary.violations.len(), summary.c_lipschitz),
        );
        self.manifest.track = Some(summary);
        Ok(())
    }

    fn profile(&mut self, traj: &Trajectory, fit: &BlowupFit) -> Result<()> {
        let plan = &self.scenario.diagnostics.profile;
        let tb = fit.t_blowup;
        let times: Vec<f64> = traj.times().into_iter().filter(|t| tb - t < plan.window).collect();
        if times.is_empty() {
            self.manifest
                .warnings
                .push(format!("no snapshot within {} of the blowup time; profile skipped", plan.window));
            return Ok(());
        }
        let opts = ProfileOptions {
            y_max: plan.y_max,
            points: plan.points,
            uncertainty: fit.uncertainty,
        };
        let dim = traj.dim();
        let prof = self_similar_profile(traj, &vec![0.0; dim.n()], tb, &times, &opts)?;
        let rows: Vec<Vec<String>> = prof
            .times
            .iter()
            .zip(&prof.sup_deviation)
            .zip(&prof.sup_deviation_band)
            .map(|((t, d), (lo, hi))| vec![fmt17(*t), fmt17(tb - t), fmt17(*d), fmt17(*lo), fmt17(*hi)])
            .collect();
        let path = self.out.join("profile.csv");
        write_csv(&path, &["t", "gap", "sup_deviation", "band_lo", "band_hi"], &rows)?;
        self.files.push(path);
        let (d_zero, d_kappa) = liouville_distance(&prof)?;
        self.manifest.profile = Some(ProfileSummary {
            times: prof.times.len(),
            last_gap: tb - prof.times.last().copied().unwrap_or(tb),
            last_sup_deviation: prof.sup_deviation.last().copied().unwrap_or(f64::NAN),
            d_zero,
            d_kappa,
        });
        Ok(())
    }

    fn tree(&mut self, traj: &Trajectory) -> Result<()> {
        let dim = traj.dim();
        let sampler = RadialSampler::new(traj.last().clone())?;
        let domain = Domain {
            center: vec![0.0; dim.n()],
            radius: 0.5 * self.scenario.radius,
        };
        let opts = TreeOptions {
            seed: self.scenario.seed,
            ..TreeOptions::default()
        };
        let tree = bubble_tree(&sampler, &domain, default_c2(dim), &opts)?;
        self.manifest.tree = Some(TreeSummary {
            nodes: tree.len(),
            centers: tree.nodes.iter().map(|n| n.center.clone()).collect(),
            lambdas: tree.nodes.iter().map(|n| n.lambda).collect(),
            truncated: tree.truncated,
        });
        Ok(())
    }
}

/// Runs a scenario into `out`, computing the spectral data it needs.
pub fn run_scenario(scenario: &Scenario, out: &Path) -> Result<RunManifest> {
    fs::create_dir_all(out)?;
    run(scenario, out, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::verify_inventory;
    use crate::scenario::parse_scenario;
    use blowup_core::Dimension;

    fn scenario(body: &str) -> Scenario {
        parse_scenario(body, Path::new(".")).unwrap()
    }

    #[test]
    fn reaction_only_run_recovers_the_ode_blowup_time() {
        let sc = scenario(
            "n = 7\nradius = 1.0\n[grid]\nkind = \"uniform\"\nintervals = 16\n\
             [initial]\nkind = \"constant\"\namplitude = 1.0\n\
             [solver]\nmode = \"reaction_only\"\n\
             [diagnostics]\ntrack = false\npohozaev_radii = [0.5]\n[diagnostics.cutoff]\nprofile = { kind = \"unit\" }\nc_mono = 0.0\n",
        );
        let dir = tempfile::tempdir().unwrap();
        let m = run_scenario(&sc, dir.path()).unwrap();
        assert!(m.errors.is_empty(), "{:?}", m.errors);
        let d = Dimension::new(7).unwrap();
        let p = d.p();
        let exact = 1.0 / (p - 1.0);
        let fit = m.blowup.unwrap();
        assert!((fit.t_blowup / exact - 1.0).abs() < 1e-4);
        assert_eq!(m.points[0].verdict, Verdict::TypeI);
        assert!(m.profile.as_ref().unwrap().d_kappa < 1e-3);
        assert!(m.passed(), "{:?}", m.checks);
        verify_inventory(dir.path(), &m).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), m);
    }

    #[test]
    fn subcritical_data_does_not_blow_up() {
        let sc = scenario(
            "n = 7\nradius = 10.0\n[grid]\nkind = \"uniform\"\nintervals = 200\n\
             [initial]\nkind = \"scaled_bubble\"\namplitude = 0.5\nlambda = 1.0\n[solver]\nt_max = 5.0\n",
        );
        let dir = tempfile::tempdir().unwrap();
        let m = run_scenario(&sc, dir.path()).unwrap();
        assert_eq!(m.termination, Some(Termination::TimeLimit));
        assert!(m.blowup.is_none() && m.points.is_empty() && m.track.is_none());
        assert_eq!(m.pohozaev.len(), 3);
        assert!(m.passed(), "{:?} {:?}", m.checks, m.errors);
    }

    #[test]
    fn stage_failures_are_recorded() {
        let mut sc = scenario(
            "n = 7\nradius = 10.0\n[grid]\nkind = \"uniform\"\nintervals = 200\n\
             [initial]\nkind = \"scaled_bubble\"\namplitude = 0.5\nlambda = 1.0\n[solver]\nt_max = 0.5\n",
        );
        // Bypasses validation: a radius outside the grid fails at run time.
        sc.diagnostics.pohozaev_radii = vec![20.0];
        let dir = tempfile::tempdir().unwrap();
        let m = run_scenario(&sc, dir.path()).unwrap();
        assert_eq!(m.status, RunStatus::Complete);
        assert_eq!(m.errors.len(), 1, "{:?}", m.errors);
        assert!(m.errors[0].starts_with("pohozaev"));
        assert!(!m.passed());
        assert!(!m.files.is_empty());
    }
}
