use blowup_lab::{batch, load_scenario, run_scenario, scenario_files, RunManifest};
use blowup_core::diagnostics::Verdict;
use blowup_core::solver::Termination;
use std::fs;
use std::path::Path;

const ODE: &str = "n = 7\nradius = 1.0\n[grid]\nkind = \"uniform\"\nintervals = 16\n\
[initial]\nkind = \"constant\"\namplitude = AMP\n[solver]\nmode = \"reaction_only\"\n\
[diagnostics]\ntrack = false\n[diagnostics.cutoff]\nprofile = { kind = \"unit\" }\nc_mono = 0.0\n";

const DECAY: &str = "n = 7\nradius = 10.0\n[grid]\nkind = \"uniform\"\nintervals = 200\n\
[initial]\nkind = \"scaled_bubble\"\namplitude = 0.5\nlambda = 1.0\n[solver]\nt_max = 2.0\n";

fn write_scenarios(dir: &Path) {
    fs::write(dir.join("a_ode.toml"), ODE.replace("AMP", "1.0")).unwrap();
    fs::write(dir.join("b_ode.toml"), ODE.replace("AMP", "2.0")).unwrap();
    fs::write(dir.join("c_decay.toml"), DECAY).unwrap();
    fs::write(dir.join("notes.txt"), "not a scenario").unwrap();
}

#[test]
fn three_scenarios_give_three_rows() {
    let src = tempfile::tempdir().unwrap();
    write_scenarios(src.path());
    let paths = scenario_files(src.path()).unwrap();
    assert_eq!(paths.len(), 3);
    let out = tempfile::tempdir().unwrap();
    let rows = batch(&paths, 2, out.path()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].scenario, "a_ode");
    assert_eq!(rows[0].termination, "blowup");
    assert_eq!(rows[0].verdicts, "type_i");
    assert_eq!(rows[2].termination, "time_limit");
    assert!(rows.iter().all(|r| r.passed), "{rows:?}");
    let summary = fs::read_to_string(out.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    // Blowup time of u' = u^p from A: A^{1-p}/(p-1).
    let p = 9.0 / 5.0;
    let exact = 2f64.powf(1.0 - p) / (p - 1.0);
    assert!((rows[1].t_blowup.unwrap() / exact - 1.0).abs() < 1e-4);
}

#[test]
fn worker_count_does_not_change_the_results() {
    let src = tempfile::tempdir().unwrap();
    write_scenarios(src.path());
    let paths = scenario_files(src.path()).unwrap();
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    let rows1 = batch(&paths, 1, one.path()).unwrap();
    let rows4 = batch(&paths, 4, four.path()).unwrap();
    assert_eq!(rows1, rows4);
    for name in ["a_ode", "b_ode", "c_decay"] {
        let m1 = RunManifest::load(&one.path().join(name)).unwrap();
        let m4 = RunManifest::load(&four.path().join(name)).unwrap();
        assert_eq!(m1.without_timing(), m4.without_timing());
    }
}

#[test]
fn bad_scenarios_are_isolated_and_empty_batches_succeed() {
    let src = tempfile::tempdir().unwrap();
    fs::write(src.path().join("bad.toml"), "n = 2\nradius = 1.0\n").unwrap();
    fs::write(src.path().join("good.toml"), ODE.replace("AMP", "1.0")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let rows = batch(&scenario_files(src.path()).unwrap(), 2, out.path()).unwrap();
    assert!(!rows[0].passed && !rows[0].error.is_empty());
    assert!(rows[1].passed);

    let empty = tempfile::tempdir().unwrap();
    let rows = batch(&[], 1, empty.path()).unwrap();
    assert!(rows.is_empty());
    let summary = fs::read_to_string(empty.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn bubble_data_above_the_ground_state_blows_up_as_type_one() {
    let src = tempfile::tempdir().unwrap();
    let path = src.path().join("bubble.toml");
    fs::write(
        &path,
        "n = 7\nradius = 20.0\n[initial]\nkind = \"scaled_bubble\"\namplitude = 1.2\nlambda = 1.0\n",
    )
    .unwrap();
    let sc = load_scenario(&path).unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = run_scenario(&sc, out.path()).unwrap();
    assert!(m.errors.is_empty(), "{:?}", m.errors);
    assert_eq!(m.termination, Some(Termination::Blowup));
    assert_eq!(m.points[0].verdict, Verdict::TypeI);
    assert!(m.points[0].monotonicity_violations.is_empty());
    let track = m.track.as_ref().unwrap();
    assert_eq!(track.converged, track.snapshots);
    assert!(m.passed(), "{:?}", m.checks);
    for f in ["theta.csv", "pohozaev.csv", "track.csv", "profile.csv", "trajectory/sup_history.csv"] {
        assert!(m.files.iter().any(|e| e.path == Path::new(f)), "{f} missing from the inventory");
    }
}
