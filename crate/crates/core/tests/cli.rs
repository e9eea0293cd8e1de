use std::path::Path;
use std::process::{Command, Output};

use etn_forecast::ewa::EwaStatus;
use etn_forecast::pipeline::EwaArtifact;
use etn_forecast::report::validate_report;
use etn_forecast::store::CycleStore;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etn-forecast"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn cycle_args<'a>(cycle: &'a str, work: &'a str) -> Vec<&'a str> {
    vec![
        "--history",
        "d/history.csv",
        "--ga",
        "d/ga.csv",
        "--generation",
        "gen3",
        "--cycle",
        cycle,
        "--work",
        work,
    ]
}

#[test]
fn run_cycle_writes_report_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let msg = ok(&["synth", "--seed", "7", "--out", "d"], d);
    assert!(msg.contains("--generation gen3"), "{msg}");
    assert!(d.join("d/truth/scenario.json").exists());

    let mut args = vec!["run-cycle"];
    args.extend(cycle_args("2016-10", "w"));
    args.extend(["--select", "best_fit"]);
    let line = ok(&args, d);
    assert_eq!(line.lines().count(), 1, "{line}");
    let report = std::fs::read_to_string(d.join("w/report.csv")).unwrap();
    let summary = validate_report(&report).unwrap();
    assert!(summary.month_rows >= 15);
    assert!(d.join("w/cycles/gen3/2016-10.json").exists());
    assert!(report.contains("first cycle"));
}

#[test]
fn staged_commands_match_run_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--seed", "3", "--out", "d"], d);
    let mut ingest = vec!["ingest"];
    ingest.extend(cycle_args("2016-12", "s"));
    ok(&ingest, d);
    for stage in [
        "prepare", "analyze", "train", "forecast", "adjust", "ewa", "report",
    ] {
        let line = ok(&[stage, "--work", "s"], d);
        assert!(line.starts_with(&format!("{stage}:")), "{line}");
    }
    let mut whole = vec!["run-cycle"];
    whole.extend(cycle_args("2016-12", "r"));
    ok(&whole, d);
    let a = std::fs::read(d.join("s/report.csv")).unwrap();
    let b = std::fs::read(d.join("r/report.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn second_cycle_evaluates_the_first() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--out", "d"], d);
    for cycle in ["2016-10", "2017-01"] {
        let mut args = vec!["run-cycle"];
        args.extend(cycle_args(cycle, "w"));
        args.extend(["--select", "lci"]);
        ok(&args, d);
    }
    let ewa: EwaArtifact =
        serde_json::from_str(&std::fs::read_to_string(d.join("w/ewa.json")).unwrap()).unwrap();
    assert_eq!(ewa.report.status, EwaStatus::Evaluated);
    assert_eq!(
        ewa.previous_cycle.map(|m| m.to_string()),
        Some("2016-10".into())
    );
    let step1 = ewa.report.step1.unwrap();
    assert_eq!(step1.months.len(), 3);

    let store = CycleStore::new(d.join("w/cycles"));
    let first = store
        .load_cycle("gen3", "2016-10".parse().unwrap())
        .unwrap();
    assert_eq!(
        first.realized_actuals.len(),
        3,
        "actuals since the first cycle are back-filled"
    );
    let report = std::fs::read_to_string(d.join("w/report.csv")).unwrap();
    validate_report(&report).unwrap();
    assert!(!report.contains("first cycle"));
}

#[test]
fn missing_ga_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--out", "d"], d);
    let out = run(
        &[
            "run-cycle",
            "--history",
            "d/history.csv",
            "--ga",
            "d/nope.csv",
            "--generation",
            "gen3",
            "--cycle",
            "2016-10",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("d/nope.csv") && err.contains("ingest"),
        "{err}"
    );
}

#[test]
fn validation_failures_exit_1_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--out", "d"], d);
    let out = run(
        &[
            "run-cycle",
            "--history",
            "d/history.csv",
            "--ga",
            "d/ga.csv",
            "--generation",
            "gen9",
            "--cycle",
            "2016-10",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest stage failed"));

    let out = run(
        &[
            "run-cycle",
            "--history",
            "d/history.csv",
            "--ga",
            "d/ga.csv",
            "--generation",
            "gen3",
            "--cycle",
            "2016-10",
            "--select",
            "median",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(d.join("bad.toml"), "[models]\ntrain_fraction = 2.0\n").unwrap();
    let out = run(
        &[
            "run-cycle",
            "--history",
            "d/history.csv",
            "--ga",
            "d/ga.csv",
            "--generation",
            "gen3",
            "--cycle",
            "2016-10",
            "--config",
            "bad.toml",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train_fraction"));
}

#[test]
fn stage_without_inputs_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--work", "empty"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest.json"));
}

#[test]
fn default_config_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = ok(&["config"], d);
    std::fs::write(d.join("etn.toml"), &text).unwrap();
    ok(&["synth", "--out", "d"], d);
    let mut a = vec!["run-cycle"];
    a.extend(cycle_args("2016-10", "a"));
    a.extend(["--config", "etn.toml"]);
    ok(&a, d);
    let mut b = vec!["run-cycle"];
    b.extend(cycle_args("2016-10", "b"));
    ok(&b, d);
    assert_eq!(
        std::fs::read(d.join("a/report.csv")).unwrap(),
        std::fs::read(d.join("b/report.csv")).unwrap()
    );
}
