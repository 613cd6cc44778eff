//! Many scenarios at once. Runs share nothing but the read-only spectral
//! data; results are collected in input order, so the summary does not
//! depend on the number of workers.

use crate::manifest::RunManifest;
use crate::pipeline;
use crate::scenario::{load_scenario, Scenario};
use blowup_core::kernel::{ground_state, SpectralData};
use blowup_core::solver::Termination;
use blowup_core::{LabError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub passed: bool,
    pub termination: String,
    pub t_blowup: Option<f64>,
    pub exponent: Option<f64>,
    pub verdicts: String,
    pub monotonicity_violations: usize,
    pub parameter_violations: usize,
    pub failed_checks: String,
    pub error: String,
}

impl SummaryRow {
    fn from_manifest(name: String, m: &RunManifest) -> Self {
        SummaryRow {
            scenario: name,
            passed: m.passed(),
            termination: match &m.termination {
                Some(Termination::Blowup) => "blowup".into(),
                Some(Termination::TimeLimit) => "time_limit".into(),
                Some(Termination::StepLimit) => "step_limit".into(),
                Some(Termination::Aborted { .. }) => "aborted".into(),
                None => "none".into(),
            },
            t_blowup: m.blowup.map(|f| f.t_blowup),
            exponent: m.blowup.map(|f| f.exponent),
            verdicts: m
                .points
                .iter()
                .map(|p| serde_json::to_value(p.verdict).ok().and_then(|v| v["kind"].as_str().map(String::from)).unwrap_or_default())
                .collect::<Vec<_>>()
                .join(";"),
            monotonicity_violations: m.points.iter().map(|p| p.monotonicity_violations.len()).sum(),
            parameter_violations: m.track.as_ref().map_or(0, |t| t.violations.len()),
            failed_checks: m.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect::<Vec<_>>().join(";"),
            error: m.errors.join("; "),
        }
    }

    fn failed(name: String, e: &LabError) -> Self {
        SummaryRow {
            scenario: name,
            passed: false,
            termination: "none".into(),
            t_blowup: None,
            exponent: None,
            verdicts: String::new(),
            monotonicity_violations: 0,
            parameter_violations: 0,
            failed_checks: String::new(),
            error: e.to_string(),
        }
    }
}

/// `*.toml` files directly inside `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into())
}

/// Runs every scenario into `out_root/<file stem>` on `parallelism` workers
/// (`0` = one per core) and writes `out_root/summary.csv`.
pub fn batch(paths: &[PathBuf], parallelism: usize, out_root: &Path) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(out_root)?;
    let loaded: Vec<(String, Result<Scenario>)> = paths.iter().map(|p| (stem(p), load_scenario(p))).collect();
    let mut dims: Vec<usize> = loaded
        .iter()
        .filter_map(|(_, s)| s.as_ref().ok())
        .filter(|s| s.diagnostics.track)
        .map(|s| s.n)
        .collect();
    dims.sort_unstable();
    dims.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| LabError::Domain(e.to_string()))?;
    let rows = pool.install(|| {
        let spectral: BTreeMap<usize, SpectralData> = dims
            .par_iter()
            .filter_map(|&n| {
                let d = blowup_core::Dimension::new(n).ok()?;
                ground_state(d).ok().map(|s| (n, s))
            })
            .collect();
        loaded
            .par_iter()
            .map(|(name, sc)| match sc {
                Ok(sc) => {
                    let out = out_root.join(name);
                    match pipeline::run(sc, &out, spectral.get(&sc.n)) {
                        Ok(m) => SummaryRow::from_manifest(name.clone(), &m),
                        Err(e) => SummaryRow::failed(name.clone(), &e),
                    }
                }
                Err(e) => SummaryRow::failed(name.clone(), e),
            })
            .collect::<Vec<_>>()
    });
    write_summary(&out_root.join(SUMMARY_FILE), &rows)?;
    Ok(rows)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let io = |e: csv::Error| LabError::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "scenario",
        "passed",
        "termination",
        "t_blowup",
        "exponent",
        "verdicts",
        "monotonicity_violations",
        "parameter_violations",
        "failed_checks",
        "error",
    ])
    .map_err(io)?;
    let num = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.passed.to_string(),
            r.termination.clone(),
            num(r.t_blowup),
            num(r.exponent),
            r.verdicts.clone(),
            r.monotonicity_violations.to_string(),
            r.parameter_violations.to_string(),
            r.failed_checks.clone(),
            r.error.clone(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
