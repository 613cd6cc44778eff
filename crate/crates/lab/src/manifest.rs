//! Run manifests: a JSON record of what a run did, written atomically, with
//! a SHA-256 inventory of every output file.

use crate::scenario::Scenario;
use blowup_core::decomposition::Violation;
use blowup_core::diagnostics::{PohozaevResidual, Verdict};
use blowup_core::solver::{BlowupFit, Termination};
use blowup_core::{LabError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Written at start and left behind if the run never finishes.
    Incomplete,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory.
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point: Vec<f64>,
    pub verdict: Verdict,
    pub theta_limit: f64,
    pub band: f64,
    /// `(k, Θ_{s_k}, Θ_{s_{k+1}})` pairs that decrease by more than the tolerance.
    pub monotonicity_violations: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub snapshots: usize,
    pub converged: usize,
    pub k: f64,
    pub c_lipschitz: f64,
    pub c_normalized: f64,
    pub lipschitz_trend: f64,
    pub max_relative_a: f64,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub times: usize,
    /// `T - t` at the last sample.
    pub last_gap: f64,
    pub last_sup_deviation: f64,
    pub d_zero: f64,
    pub d_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub nodes: usize,
    pub centers: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub scenario: Scenario,
    pub code_version: String,
    pub warnings: Vec<String>,
    pub termination: Option<Termination>,
    pub steps: usize,
    pub rejected: usize,
    pub blowup: Option<BlowupFit>,
    pub points: Vec<PointReport>,
    pub pohozaev: Vec<PohozaevResidual>,
    pub track: Option<TrackSummary>,
    pub profile: Option<ProfileSummary>,
    pub tree: Option<TreeSummary>,
    pub checks: Vec<Check>,
    pub errors: Vec<String>,
    pub files: Vec<FileEntry>,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn new(scenario: Scenario) -> Self {
        let warnings = scenario.warnings();
        RunManifest {
            status: RunStatus::Incomplete,
            scenario,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            warnings,
            termination: None,
            steps: 0,
            rejected: 0,
            blowup: None,
            points: Vec::new(),
            pohozaev: Vec::new(),
            track: None,
            profile: None,
            tree: None,
            checks: Vec::new(),
            errors: Vec::new(),
            files: Vec::new(),
            wall_seconds: 0.0,
        }
    }

    /// Complete, error-free, and every enabled check passed.
    pub fn passed(&self) -> bool {
        self.status == RunStatus::Complete && self.errors.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    /// The manifest with timing removed, for comparing runs.
    pub fn without_timing(&self) -> RunManifest {
        RunManifest {
            wall_seconds: 0.0,
            ..self.clone()
        }
    }

    /// Writes `dir/manifest.json` through a temporary file and a rename.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        let path = dir.join(MANIFEST_FILE);
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> Result<RunManifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((bytes.len() as u64, hex))
}

/// Inventory entries for `files`, stored relative to `dir` and sorted.
pub fn inventory(dir: &Path, files: &[PathBuf]) -> Result<Vec<FileEntry>> {
    let mut out = files
        .iter()
        .map(|f| {
            let (bytes, sha256) = sha256_file(f)?;
            let path = f.strip_prefix(dir).unwrap_or(f).to_path_buf();
            Ok(FileEntry { path, bytes, sha256 })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

/// Re-hashes every inventoried file; any mismatch or missing file is an error.
pub fn verify_inventory(dir: &Path, manifest: &RunManifest) -> Result<()> {
    for entry in &manifest.files {
        let (bytes, sha) = sha256_file(&dir.join(&entry.path))?;
        if bytes != entry.bytes || sha != entry.sha256 {
            return Err(LabError::Io(format!("{} does not match its checksum", entry.path.display())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn scenario() -> Scenario {
        let text = "n = 7\nradius = 5.0\n[initial]\nkind = \"constant\"\namplitude = 1.0\n";
        parse_scenario(text, Path::new(".")).unwrap()
    }

    #[test]
    fn sha256_of_known_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        fs::write(&p, "abc").unwrap();
        let (bytes, sha) = sha256_file(&p).unwrap();
        assert_eq!(bytes, 3);
        assert_eq!(sha, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_round_trips_and_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data.csv");
        fs::write(&data, "t,u\n0,1\n").unwrap();
        let mut m = RunManifest::new(scenario());
        m.check("always", true, String::new());
        m.files = inventory(dir.path(), std::slice::from_ref(&data)).unwrap();
        assert_eq!(m.files[0].path, PathBuf::from("data.csv"));
        m.write(dir.path()).unwrap();
        assert!(!dir.path().join("manifest.json.tmp").exists());
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(!back.passed(), "an incomplete run never passes");
        verify_inventory(dir.path(), &back).unwrap();
        fs::write(&data, "t,u\n0,1\n1,").unwrap();
        assert!(verify_inventory(dir.path(), &back).is_err());
        fs::remove_file(&data).unwrap();
        assert!(verify_inventory(dir.path(), &back).is_err());
    }

    #[test]
    fn timing_is_ignored_in_comparisons() {
        let mut a = RunManifest::new(scenario());
        a.status = RunStatus::Complete;
        let mut b = a.clone();
        a.wall_seconds = 1.0;
        b.wall_seconds = 2.0;
        assert_ne!(a, b);
        assert_eq!(a.without_timing(), b.without_timing());
        assert!(a.passed());
        a.check("failing", false, "x".into());
        assert!(!a.passed());
    }
}
