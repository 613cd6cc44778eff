//! Trajectory directories: `trajectory.json`, `grid.csv`, `sup_history.csv`,
//! `time_derivative_budget.csv` and `snapshots/snapshot_NNNNN.csv` (r, u).

use super::{Mode, SupSample, Termination, TimeDerivativeBudget, Trajectory};
use crate::error::{LabError, Result};
use crate::grid::{RadialField, RadialGrid, SpacingPolicy};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Serialize, Deserialize)]
struct SnapshotEntry {
    file: String,
    time: f64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryHeader {
    dim: usize,
    policy: SpacingPolicy,
    mode: Mode,
    termination: Termination,
    steps: usize,
    rejected: usize,
    snapshots: Vec<SnapshotEntry>,
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt17(*v)))?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != width {
            return Err(LabError::Parse(format!("{}: expected {width} columns", path.display())));
        }
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| LabError::Parse(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

/// Writes `traj` under `dir` and returns the paths written.
pub fn save_trajectory(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("snapshots"))?;
    let grid = traj.grid();
    let mut written = Vec::new();
    let p = dir.join("grid.csv");
    write_rows(&p, &["r"], grid.nodes().iter().map(|r| vec![*r]))?;
    written.push(p);
    let mut entries = Vec::with_capacity(traj.snapshots.len());
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let name = format!("snapshots/snapshot_{k:05}.csv");
        let p = dir.join(&name);
        write_rows(
            &p,
            &["r", "u"],
            grid.nodes().iter().zip(snap.values()).map(|(r, u)| vec![*r, *u]),
        )?;
        written.push(p);
        entries.push(SnapshotEntry {
            file: name,
            time: snap.time(),
        });
    }
    let p = dir.join("sup_history.csv");
    write_rows(&p, &["t", "sup", "dt"], traj.sup_history.iter().map(|s| vec![s.t, s.sup, s.dt]))?;
    written.push(p);
    let b = &traj.budget;
    let p = dir.join("time_derivative_budget.csv");
    write_rows(
        &p,
        &["t", "increment", "cumulative"],
        (0..b.times.len()).map(|i| vec![b.times[i], b.increments[i], b.cumulative[i]]),
    )?;
    written.push(p);
    let header = TrajectoryHeader {
        dim: grid.dim(),
        policy: grid.policy(),
        mode: traj.mode,
        termination: traj.termination.clone(),
        steps: traj.steps,
        rejected: traj.rejected,
        snapshots: entries,
    };
    let p = dir.join("trajectory.json");
    fs::write(&p, serde_json::to_string_pretty(&header)?)?;
    written.push(p);
    Ok(written)
}

/// Reads a directory written by [`save_trajectory`].
pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    let header: TrajectoryHeader = serde_json::from_str(&fs::read_to_string(dir.join("trajectory.json"))?)
        .map_err(|e| LabError::Parse(format!("trajectory.json: {e}")))?;
    let nodes: Vec<f64> = read_rows(&dir.join("grid.csv"), 1)?.into_iter().map(|r| r[0]).collect();
    let grid = Arc::new(RadialGrid::from_nodes(header.dim, nodes, header.policy)?);
    let mut snapshots = Vec::with_capacity(header.snapshots.len());
    for entry in &header.snapshots {
        let rows = read_rows(&dir.join(&entry.file), 2)?;
        if rows.len() != grid.len() || rows.iter().zip(grid.nodes()).any(|(row, r)| row[0] != *r) {
            return Err(LabError::Parse(format!("{}: radii do not match grid.csv", entry.file)));
        }
        let values = rows.into_iter().map(|r| r[1]).collect();
        snapshots.push(RadialField::new(Arc::clone(&grid), values, entry.time)?);
    }
    let sup_history = read_rows(&dir.join("sup_history.csv"), 3)?
        .into_iter()
        .map(|r| SupSample { t: r[0], sup: r[1], dt: r[2] })
        .collect();
    let mut budget = TimeDerivativeBudget::default();
    for r in read_rows(&dir.join("time_derivative_budget.csv"), 3)? {
        budget.times.push(r[0]);
        budget.increments.push(r[1]);
        budget.cumulative.push(r[2]);
    }
    if snapshots.is_empty() {
        return Err(LabError::Parse("trajectory has no snapshots".into()));
    }
    Ok(Trajectory {
        snapshots,
        sup_history,
        budget,
        termination: header.termination,
        mode: header.mode,
        steps: header.steps,
        rejected: header.rejected,
    })
}

/// Reads a single `(r, u)` snapshot file as a field on its own grid.
pub fn load_snapshot(path: &Path, dim: usize) -> Result<RadialField> {
    let rows = read_rows(path, 2)?;
    let nodes: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let grid = Arc::new(RadialGrid::from_nodes(dim, nodes, SpacingPolicy::Custom)?);
    RadialField::new(grid, values, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::kernel::{profile, Dimension};
    use crate::solver::{run_until_blowup, SolverConfig};
    use std::sync::Arc;

    #[test]
    fn trajectory_round_trips_through_disk() {
        let d = Dimension::new(7).unwrap();
        let grid = Arc::new(RadialGrid::uniform(7, 5.0, 40).unwrap());
        let u0 = RadialField::from_fn(grid, 0.0, |r| 0.7 * profile::w(r, d)).unwrap();
        let cfg = SolverConfig {
            t_max: 0.2,
            ..Default::default()
        };
        let traj = run_until_blowup(&u0, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = save_trajectory(&traj, dir.path()).unwrap();
        assert!(written.iter().all(|p| p.exists()));
        let back = load_trajectory(dir.path()).unwrap();
        assert_eq!(back.snapshots.len(), traj.snapshots.len());
        for (a, b) in back.snapshots.iter().zip(&traj.snapshots) {
            assert_eq!(a.values(), b.values());
            assert_eq!(a.time(), b.time());
        }
        assert_eq!(back.grid().nodes(), traj.grid().nodes());
        assert_eq!(back.sup_history, traj.sup_history);
        assert_eq!(back.budget, traj.budget);
        assert_eq!(back.termination, traj.termination);
        assert_eq!(back.mode, traj.mode);
    }

    #[test]
    fn seventeen_digits_are_exact() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_trajectory(&dir.path().join("absent")).is_err());
    }
}
