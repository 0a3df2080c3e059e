//! End-to-end checks of the `precsched` binary: the full
//! gen → opt → run → eval → report pipeline, exit codes, and the
//! machine-readable error contract.

use std::path::Path;
use std::process::{Command, Output};

fn precsched(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_precsched"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&String::from_utf8(out.stderr.clone()).unwrap()).unwrap()
}

#[test]
fn pipeline_gen_opt_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // Generate a family instance plus its reference sidecar.
    let gen = precsched(
        &["gen", "instance", "--family", "hidden_chain", "--params", "n=6,h=5", "--out", "inst.json"],
        d,
    );
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(d.join("inst.json").exists());
    let refs: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("inst.refs.json")).unwrap()).unwrap();
    assert_eq!(refs["family"], "hidden_chain");

    // Exact baseline: the weighted job can finish second.
    let opt = precsched(&["opt", "--instance", "inst.json"], d);
    assert!(opt.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&opt)).unwrap();
    assert_eq!(doc["objective"], "2/1");

    // Sweep the instance file with two policies.
    let spec = serde_json::json!({
        "name": "pipeline",
        "source": {"kind": "file", "path": "inst.json"},
        "policies": [
            {"name": "equal_share"},
            {"name": "wrr_chains"}
        ],
        "prediction": {"model": "static_weights"},
        "seeds": [0],
        "oracle": "chain_exact"
    });
    std::fs::write(d.join("spec.json"), spec.to_string()).unwrap();
    let run = precsched(&["run", "--spec", "spec.json", "--out", "rows.csv"], d);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(d.join("rows.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    // Equal share pays n, informed chains pay the optimum.
    let blind = csv.lines().nth(1).unwrap();
    assert!(blind.contains("equal_share") && blind.contains(",6/1,"), "{blind}");
    let informed = csv.lines().nth(2).unwrap();
    assert!(informed.contains("wrr_chains") && informed.contains(",1/1,1.000000"), "{informed}");

    // Summaries group the rows.
    let report = precsched(&["report", "--rows", "rows.csv", "--precision", "3"], d);
    assert!(report.status.success());
    let text = stdout(&report);
    assert!(text.contains("policy=equal_share"), "{text}");
    assert!(text.contains("3.000 (3/1)"), "{text}");
}

#[test]
fn prediction_bundles_feed_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // A three-job chain, unit jobs.
    let gen = precsched(
        &["gen", "instance", "--family", "hidden_chain", "--params", "n=3,h=2", "--out", "c.json"],
        d,
    );
    assert!(gen.status.success());

    let pred = precsched(
        &["gen", "prediction", "--instance", "c.json", "--model", "actions_static", "--out", "p.json"],
        d,
    );
    assert!(pred.status.success(), "{}", String::from_utf8_lossy(&pred.stderr));

    let eval = precsched(&["eval", "--instance", "c.json", "--prediction", "p.json"], d);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&eval)).unwrap();
    assert_eq!(doc["model"], "actions");
    assert_eq!(doc["values"][0][0], "eta");
    assert_eq!(doc["values"][0][1], "0/1");

    // Perturbed orders report their displacement through the same pipeline.
    let noisy = precsched(
        &[
            "gen", "prediction", "--instance", "c.json", "--model", "actions_static",
            "--noise", "adjacent_swaps", "--swaps", "3", "--seed", "5", "--out", "pn.json",
        ],
        d,
    );
    assert!(noisy.status.success());
    let eval = precsched(&["eval", "--instance", "c.json", "--prediction", "pn.json"], d);
    assert!(eval.status.success());
}

#[test]
fn failures_exit_nonzero_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let missing = precsched(&["opt", "--instance", "absent.json"], d);
    assert!(!missing.status.success());
    assert_eq!(stderr_json(&missing)["error"]["kind"], "io");

    std::fs::write(d.join("bad_spec.json"), r#"{"name":"x"}"#).unwrap();
    let bad = precsched(&["run", "--spec", "bad_spec.json"], d);
    assert!(!bad.status.success());
    assert_eq!(stderr_json(&bad)["error"]["kind"], "json");

    // Unknown policy: rejected by the registry before any simulation, and
    // no output file is created.
    let spec = serde_json::json!({
        "name": "x",
        "source": {"kind": "random", "spec": {"model": "chains", "n_max": 4}, "count": 1},
        "policies": [{"name": "wrr_chainz"}],
        "seeds": [0]
    });
    std::fs::write(d.join("spec.json"), spec.to_string()).unwrap();
    let unknown = precsched(&["run", "--spec", "spec.json", "--out", "never.csv"], d);
    assert!(!unknown.status.success());
    assert_eq!(stderr_json(&unknown)["error"]["kind"], "unknown_policy");
    assert!(!d.join("never.csv").exists());

    let usage = precsched(&["frobnicate"], d);
    assert!(!usage.status.success());
    assert_eq!(stderr_json(&usage)["error"]["kind"], "usage");
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let help = precsched(&["--help"], dir.path());
    assert!(help.status.success());
    assert!(stdout(&help).contains("gen"));
    let version = precsched(&["--version"], dir.path());
    assert!(version.status.success());
}

#[test]
fn random_generation_is_reproducible_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = precsched(
        &["gen", "instance", "--model", "out_forest", "--n-max", "8", "--seed", "3", "--out", "a.json"],
        d,
    );
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = precsched(
        &["gen", "instance", "--model", "out_forest", "--n-max", "8", "--seed", "3", "--out", "b.json"],
        d,
    );
    assert!(b.status.success());
    assert_eq!(
        std::fs::read_to_string(d.join("a.json")).unwrap(),
        std::fs::read_to_string(d.join("b.json")).unwrap()
    );
}
