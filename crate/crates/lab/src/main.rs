#![allow(clippy::neg_cmp_op_on_partial_ord)]

use blowup_core::decomposition::{fit_orthogonal, FitMode, FitOptions, RadialSampler};
use blowup_core::diagnostics::{theta_monotonicity_report, CutoffSpec};
use blowup_core::kernel::{ground_state, solve_spectrum};
use blowup_core::solver::{estimate_blowup_time, load_snapshot, load_trajectory, Termination};
use blowup_core::{BubbleParams, Dimension, LabError};
use blowup_lab::{batch, load_scenario, run_scenario, scenario_files};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "blowup-lab", version, about = "Radial blowup experiments for u_t - Δu = |u|^{p-1}u")]
struct Cli {
    /// Root directory for run outputs.
    #[arg(long, global = true, env = "BLOWUP_LAB_OUT", default_value = "runs")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario into <out>/<scenario name>.
    Run { scenario: PathBuf },
    /// Run every *.toml in a directory and write <out>/summary.csv.
    Batch {
        dir: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, short, default_value_t = 0)]
        jobs: usize,
    },
    /// Negative eigenpair of the linearized operator; writes <out>/spectrum_n<N>.json.
    Spectrum {
        #[arg(long)]
        n: usize,
    },
    /// Orthogonal bubble fit of a radial snapshot CSV (r, u).
    Fit {
        snapshot: PathBuf,
        #[arg(long, default_value_t = 7)]
        n: usize,
        /// Cutoff radius in units of λ.
        #[arg(long)]
        k: Option<f64>,
    },
    /// Θ_s over a log-spaced range of s at a point of a saved trajectory.
    Theta {
        trajectory: PathBuf,
        /// Base point, comma separated (default: origin).
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        /// s_min,s_max[,count]
        #[arg(long = "s-range", value_delimiter = ',', required = true)]
        s_range: Vec<f64>,
        /// Reference time (default: fitted blowup time, or the end of the run).
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool, LabError> {
    match &cli.command {
        Command::Run { scenario } => {
            let sc = load_scenario(scenario)?;
            for w in sc.warnings() {
                eprintln!("warning: {w}");
            }
            let name = sc.name.clone().unwrap_or_else(|| "run".into());
            let out = cli.out.join(&name);
            let m = run_scenario(&sc, &out)?;
            for c in &m.checks {
                println!("{:<18} {} {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.detail);
            }
            for e in &m.errors {
                println!("error: {e}");
            }
            if let Some(f) = m.blowup {
                println!("blowup time {:.12} ± {:.1e}, exponent {:.6}", f.t_blowup, f.uncertainty, f.exponent);
            }
            for p in &m.points {
                println!("point {:?}: {:?}, theta {:.6}", p.point, p.verdict, p.theta_limit);
            }
            println!("manifest: {}", out.join("manifest.json").display());
            Ok(m.passed())
        }
        Command::Batch { dir, jobs } => {
            let paths = scenario_files(dir)?;
            let rows = batch(&paths, *jobs, &cli.out)?;
            for r in &rows {
                println!("{:<24} {:<5} {} {}", r.scenario, r.passed, r.termination, r.error);
            }
            println!("summary: {}", cli.out.join(blowup_lab::batch::SUMMARY_FILE).display());
            Ok(rows.iter().all(|r| r.passed))
        }
        Command::Spectrum { n } => {
            let d = Dimension::new(*n)?;
            let report = solve_spectrum(d)?;
            let sd = ground_state(d)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join(format!("spectrum_n{n}.json"));
            sd.save(&path)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            println!("saved {}", path.display());
            Ok(report.negative_count == 1)
        }
        Command::Fit { snapshot, n, k } => fit(snapshot, *n, *k),
        Command::Theta {
            trajectory,
            x,
            s_range,
            t,
            tol,
        } => theta(trajectory, x, s_range, *t, *tol),
    }
}

fn fit(snapshot: &Path, n: usize, k: Option<f64>) -> Result<bool, LabError> {
    let d = Dimension::new(n)?;
    let field = load_snapshot(snapshot, n)?;
    let peak = field.values().iter().fold(0.0f64, |m, v| m.max(*v));
    if !(peak > 0.0) {
        return Err(LabError::Domain("snapshot has no positive values to fit".into()));
    }
    let guess = BubbleParams::centered(d, peak.powf(-2.0 / (d.nf() - 2.0)));
    let mut opts = FitOptions {
        mode: Some(FitMode::Radial),
        ..FitOptions::default()
    };
    // Keep the cutoff support inside the table.
    opts.k = k.unwrap_or(opts.k.min(field.grid().radius() / (2.0 * guess.lambda)));
    let sd = ground_state(d)?;
    let res = fit_orthogonal(&RadialSampler::new(field)?, &guess, &sd, &opts)?;
    println!("{}", serde_json::to_string_pretty(&res)?);
    Ok(res.converged)
}

fn theta(dir: &Path, x: &[f64], s_range: &[f64], t: Option<f64>, tol: f64) -> Result<bool, LabError> {
    let traj = load_trajectory(dir)?;
    let n = traj.dim().n();
    let x = if x.is_empty() { vec![0.0; n] } else { x.to_vec() };
    let t = match t {
        Some(t) => t,
        None if traj.termination == Termination::Blowup => estimate_blowup_time(&traj)?.t_blowup,
        None => traj.t_end(),
    };
    if !(2..=3).contains(&s_range.len()) {
        return Err(LabError::Domain("--s-range takes s_min,s_max[,count]".into()));
    }
    let (lo, hi) = (s_range[0], s_range[1]);
    let count = s_range.get(2).map_or(9, |c| *c as usize).max(3);
    if !(lo > 0.0 && hi > lo) {
        return Err(LabError::Domain(format!("need 0 < s_min < s_max, got {lo}, {hi}")));
    }
    let s_list: Vec<f64> = (0..count)
        .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect();
    let report = theta_monotonicity_report(&traj, &x, t, &s_list, &CutoffSpec::default(), tol)?;
    println!("s,theta");
    for q in &report.samples {
        println!("{:.16e},{:.16e}", q.s, q.value);
    }
    eprintln!("{} monotonicity violations at tol {tol:e}", report.violations.len());
    Ok(report.is_monotone())
}
