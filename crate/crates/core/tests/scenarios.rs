//! The shipped scenario configs stay loadable and produce the documented
//! verdicts, both through the library entry point and the binary.

use lcmst::cli::{run_scenario, ScenarioConfig};
use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn temp_out(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lcmst-scen-{}-{}", tag, std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run(name: &str) -> (lcmst::cli::RunReport, PathBuf) {
    let path = scenario_dir().join(name);
    let mut cfg = ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("loading {name}: {e}"));
    let out = temp_out(name.trim_end_matches(".cfg"));
    cfg.out_dir = out.clone();
    let report = run_scenario(&cfg).unwrap_or_else(|e| panic!("running {name}: {e}"));
    (report, out)
}

#[test]
fn mechanics_scenario_passes() {
    let (report, out) = run("mechanics.cfg");
    assert!(report.pass(), "{}", report.render());
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1002);
}

#[test]
fn hj_scenarios_have_the_documented_verdicts() {
    let (positive, _) = run("hj_verify.cfg");
    assert!(positive.pass(), "{}", positive.render());

    let (control, _) = run("hj_negative.cfg");
    assert!(!control.pass(), "{}", control.render());
    let equivalence = control
        .checks
        .iter()
        .find(|c| c.name == "equivalence")
        .unwrap();
    assert!(equivalence.pass, "control must fail both sides, not one");
}

#[test]
fn field_scenarios_pass() {
    for name in ["scalar_field.cfg", "reduced_hj.cfg"] {
        let (report, _) = run(name);
        assert!(report.pass(), "{name}: {}", report.render());
    }
}

#[test]
fn cauchy_scenarios_pass() {
    for name in ["cauchy_wave.cfg", "cauchy_conformal.cfg"] {
        let (report, _) = run(name);
        assert!(report.pass(), "{name}: {}", report.render());
    }
}

#[test]
fn identity_scenario_passes() {
    let (report, _) = run("identity_suite.cfg");
    assert!(report.pass(), "{}", report.render());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_lcmst");
    let out = temp_out("bin");
    let status = Command::new(bin)
        .args([
            "run",
            scenario_dir().join("mechanics.cfg").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let status = Command::new(bin)
        .args([
            "run",
            scenario_dir().join("hj_negative.cfg").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1), "check failure maps to exit 1");

    let status = Command::new(bin)
        .args(["run", "/nonexistent/config.cfg"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "config error maps to exit 2");
}
