use std::fs;
use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blowup-lab"))
}

#[test]
fn spectrum_writes_the_ground_state() {
    let out = tempfile::tempdir().unwrap();
    let o = lab().env("BLOWUP_LAB_OUT", out.path()).args(["spectrum", "--n", "7"]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"negative_count\": 1"));
    let sd = blowup_core::SpectralData::load(&out.path().join("spectrum_n7.json")).unwrap();
    assert!((sd.mu0() - 0.22248383907).abs() < 1e-8);
}

#[test]
fn run_then_theta_on_the_saved_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("ode.toml");
    fs::write(
        &scenario,
        "n = 7\nradius = 1.0\n[grid]\nkind = \"uniform\"\nintervals = 16\n\
         [initial]\nkind = \"constant\"\namplitude = 1.0\n[solver]\nmode = \"reaction_only\"\n\
         [diagnostics]\ntrack = false\n[diagnostics.cutoff]\nprofile = { kind = \"unit\" }\nc_mono = 0.0\n",
    )
    .unwrap();
    let out = dir.path().join("runs");
    let o = lab().arg("run").arg(&scenario).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("TypeI"));
    let o = lab()
        .arg("theta")
        .arg(out.join("ode/trajectory"))
        .args(["--s-range", "1e-4,1e-2,5"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn fit_recovers_a_tabulated_bubble() {
    let d = blowup_core::Dimension::new(7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let lam = 0.5f64;
    let mut body = String::from("r,u\n");
    for k in 0..=4000 {
        let r = 0.005 * k as f64;
        let u = lam.powf(-d.alpha()) * blowup_core::kernel::profile::w(r / lam, d);
        body.push_str(&format!("{r:.16e},{u:.16e}\n"));
    }
    fs::write(&path, body).unwrap();
    let o = lab().arg("fit").arg(&path).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let res: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((res["params"]["lambda"].as_f64().unwrap() - lam).abs() < 1e-6);
}

#[test]
fn failures_map_to_exit_codes() {
    let o = lab().args(["run", "/nonexistent/scenario.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = lab().args(["spectrum"]).output().unwrap();
    assert!(!o.status.success());
}
