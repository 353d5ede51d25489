//! End-to-end exercises of the command-line interface: the full synth →
//! ingest → train → predict → evaluate → erc → report flow on a small
//! panel, byte-level determinism, and the error exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quartercast"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn quartercast")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.conf");
    std::fs::write(
        &path,
        "seed = 11\n\
         synth_firms = 24\n\
         synth_quarters = 60\n\
         ensemble_size = 2\n\
         max_epochs = 3\n\
         batch_size = 64\n\
         match_limit = 2.0\n",
    )
    .unwrap();
    path
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn full_workflow_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let config = write_config(root);
    let config = config.to_str().unwrap();

    // synth twice: byte-identical CSVs.
    let synth_a = root.join("synth_a");
    let synth_b = root.join("synth_b");
    for dir in [&synth_a, &synth_b] {
        let out = run(&["synth", "--out", dir.to_str().unwrap(), "--config", config]);
        assert_success(&out, "synth");
    }
    assert_eq!(read(&synth_a.join("panel.csv")), read(&synth_b.join("panel.csv")));
    assert_eq!(read(&synth_a.join("market.csv")), read(&synth_b.join("market.csv")));

    let panel = synth_a.join("panel.csv");
    let market = synth_a.join("market.csv");
    let panel = panel.to_str().unwrap();
    let market = market.to_str().unwrap();

    // ingest: clean log and split files.
    let ingest_dir = root.join("ingest");
    let out = run(&["ingest", "--panel", panel, "--out", ingest_dir.to_str().unwrap(), "--config", config]);
    assert_success(&out, "ingest");
    for file in ["clean_log.csv", "clean_log.txt", "train.csv", "validation.csv", "test.csv"] {
        assert!(ingest_dir.join(file).exists(), "missing {file}");
    }
    let log_text = String::from_utf8(read(&ingest_dir.join("clean_log.txt"))).unwrap();
    assert!(log_text.contains("Remove Company First Obs."));

    // train twice: bit-identical bundles.
    let model_a = root.join("model_a");
    let model_b = root.join("model_b");
    for dir in [&model_a, &model_b] {
        let out = run(&[
            "train", "--panel", panel, "--market", market, "--model-dir",
            dir.to_str().unwrap(), "--config", config,
        ]);
        assert_success(&out, "train");
    }
    for file in ["manifest.json", "feature_stats.json", "member_0.json", "member_1.json"] {
        assert_eq!(read(&model_a.join(file)), read(&model_b.join(file)), "bundle file {file} differs");
    }

    // predict twice: identical predictions.
    let pred_a = root.join("pred_a");
    let pred_b = root.join("pred_b");
    for dir in [&pred_a, &pred_b] {
        let out = run(&[
            "predict", "--panel", panel, "--market", market, "--model-dir",
            model_a.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--config", config,
        ]);
        assert_success(&out, "predict");
    }
    assert_eq!(read(&pred_a.join("predictions.csv")), read(&pred_b.join("predictions.csv")));
    let predictions = pred_a.join("predictions.csv");
    let predictions = predictions.to_str().unwrap();

    // evaluate: the full slice set for annual data.
    let eval_dir = root.join("eval");
    let out = run(&[
        "evaluate", "--predictions", predictions, "--out", eval_dir.to_str().unwrap(),
        "--frequency", "annual", "--config", config,
    ]);
    assert_success(&out, "evaluate");
    for file in [
        "overall_annual.csv",
        "sign_annual.csv",
        "quarter_annual.csv",
        "size_annual.csv",
        "industry_annual.csv",
        "year_annual.csv",
        "covid_annual.csv",
        "coverage_annual.csv",
    ] {
        assert!(eval_dir.join(file).exists(), "missing {file}");
    }

    // erc: coefficient tables per model.
    let erc_dir = root.join("erc");
    let out = run(&[
        "erc", "--predictions", predictions, "--market", market, "--out",
        erc_dir.to_str().unwrap(), "--frequency", "annual", "--config", config,
    ]);
    assert_success(&out, "erc");
    assert!(erc_dir.join("erc_annual_rnn.csv").exists());

    // report: bundles everything with a manifest.
    let report_dir = root.join("report");
    let out = run(&[
        "report", "--predictions", predictions, "--market", market, "--out",
        report_dir.to_str().unwrap(), "--config", config,
    ]);
    assert_success(&out, "report");
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&report_dir.join("manifest.json"))).unwrap();
    assert!(manifest["config_hash"].as_str().unwrap().len() == 16);
    assert!(manifest["files"].as_array().unwrap().len() > 5);
}

#[test]
fn exit_codes_are_distinct() {
    // Usage: missing required flag.
    let out = run(&["evaluate", "--out", "/tmp/qc-nope"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"kind\":\"usage\""), "stderr: {err}");

    // Usage: unknown flag.
    let out = run(&["synth", "--out", "/tmp/qc-nope", "--bogus", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // Usage: unknown subcommand.
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    // IO: missing input file.
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "ingest", "--panel", "/definitely/not/here.csv", "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"kind\":\"io\""));

    // Schema: wrong header.
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "foo,bar\n1,2\n").unwrap();
    let out = run(&[
        "ingest", "--panel", bad.to_str().unwrap(), "--out",
        tmp.path().join("o2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"kind\":\"schema\""));

    // Lock: a held lock blocks a second run.
    let locked = tmp.path().join("locked");
    std::fs::create_dir_all(&locked).unwrap();
    std::fs::write(locked.join(".qc.lock"), "").unwrap();
    let out = run(&["synth", "--out", locked.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(6));
}
