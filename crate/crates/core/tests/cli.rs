//! End-to-end runs of the staged pipeline and the command-line binary.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ecomplexity::pipeline::{run_pipeline, RunConfig, RunManifest, Stage};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ecomplexity"));
    c.env("ECOMPLEXITY_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

fn config(dir: &Path, stages: &[Stage]) -> RunConfig {
    let input = dir.join("trade.csv");
    if !input.exists() {
        common::write_trade_file(&input, 30, 60, 2014..2016, 3);
    }
    let mut c = RunConfig::default();
    c.input.path = input;
    c.output_dir = dir.join("out");
    c.stages = stages.to_vec();
    c
}

fn write_config(path: &Path, c: &RunConfig) {
    fs::write(path, serde_json::to_string_pretty(c).unwrap()).unwrap();
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn rca_only_run_writes_matrix_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), &[Stage::Ingest, Stage::Rca]);
    let manifest = run_pipeline(&c).unwrap();
    let out = dir.path().join("out");
    assert!(out.join("rca/rca.csv").is_file());
    assert!(!out.join("binarize").exists());
    let on_disk: RunManifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk.stages.len(), 2);
    assert_eq!(manifest.inputs[0].sha256.len(), 64);
    let rca_stage = &on_disk.stages[1];
    assert_eq!(rca_stage.status, "ok");
    assert!(rca_stage.outputs.iter().any(|f| f.path.ends_with("rca.csv")));
}

#[test]
fn invalid_config_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), &[Stage::Ingest, Stage::Rca, Stage::Binarize, Stage::Complexity]);
    c.complexity.fitness.tol = 0.0;
    let path = dir.path().join("run.json");
    write_config(&path, &c);
    let o = run(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let err = stderr_json(&o);
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("tol"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, r#"{"threshhold": 1.0}"#).unwrap();
    assert_eq!(run(&["run", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), &Stage::ALL.iter().copied().filter(|s| *s != Stage::Green).collect::<Vec<_>>());
    c.validation.samples = 200;
    c.assist.lag = 1;
    c.complexity.methods.push(ecomplexity::pipeline::ComplexityMethod::Reflections);
    run_pipeline(&c).unwrap();
    let first = dir.path().join("first");
    fs::rename(dir.path().join("out"), &first).unwrap();
    run_pipeline(&c).unwrap();
    let second = dir.path().join("out");
    for stage in ["rca", "binarize", "complexity", "proximity", "assist", "validate", "report"] {
        let a = csv_files(&first.join(stage));
        assert!(!a.is_empty(), "{stage}");
        for f in a {
            let b = second.join(stage).join(f.file_name().unwrap());
            assert_eq!(fs::read(&f).unwrap(), fs::read(&b).unwrap(), "{}", f.display());
        }
    }
}

#[test]
fn downstream_stages_rerun_in_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), &[Stage::Ingest, Stage::Rca, Stage::Binarize, Stage::Complexity, Stage::Proximity]);
    run_pipeline(&c).unwrap();
    let out = dir.path().join("out");
    let keep = dir.path().join("complexity_before");
    fs::rename(out.join("complexity"), &keep).unwrap();
    fs::remove_dir_all(out.join("proximity")).unwrap();

    let again = RunConfig {
        stages: vec![Stage::Complexity, Stage::Proximity],
        ..c.clone()
    };
    let manifest = run_pipeline(&again).unwrap();
    assert_eq!(manifest.stages.len(), 2);
    for f in csv_files(&keep) {
        assert_eq!(fs::read(&f).unwrap(), fs::read(out.join("complexity").join(f.file_name().unwrap())).unwrap());
    }

    // A stage whose inputs were never produced is refused up front.
    let fresh = RunConfig {
        output_dir: dir.path().join("empty"),
        stages: vec![Stage::Complexity],
        ..c
    };
    assert!(matches!(run_pipeline(&fresh), Err(ecomplexity::error::Error::Config(_))));
}

#[test]
fn failing_stage_is_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), &[Stage::Ingest, Stage::Rca, Stage::Binarize]);
    c.period = Some(1990);
    let path = dir.path().join("run.json");
    write_config(&path, &c);
    let o = run(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let out = dir.path().join("out");
    assert!(out.join("ingest").is_dir());
    assert!(out.join("rca.quarantine").is_dir());
    assert!(!out.join("rca").exists() && !out.join("binarize").exists());
    let err: Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(err["stage"], "rca");
    assert_eq!(err["exit_code"], 3);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stages"][1]["status"], "failed");
}

#[test]
fn malformed_rows_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "geo,activity,value,year\nA,850231,1,2010\nB,8502x1,1,2010\nC,850231,-2,2010\n").unwrap();
    let o = run(&["ingest", "--input", input.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr_json(&o);
    let lines: Vec<u64> = err["rows"].as_array().unwrap().iter().map(|r| r["line"].as_u64().unwrap()).collect();
    assert_eq!(lines, vec![3, 4]);

    let ok = run(&[
        "ingest",
        "--input",
        input.to_str().unwrap(),
        "--lenient",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
}

#[test]
fn default_config_round_trips() {
    let o = run(&["--print-default-config"]);
    assert!(o.status.success());
    let c = RunConfig::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(c, RunConfig::default());
}

#[test]
fn subcommands_chain_into_green_scores() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    common::write_trade_file(&dir.path().join("trade.csv"), 25, 40, 2015..2016, 9);
    let steps: [Vec<String>; 5] = [
        vec!["ingest".into(), "--input".into(), d("trade.csv"), "--out".into(), d("ingest")],
        vec!["rca".into(), "--records".into(), d("ingest/records.csv"), "--out".into(), d("rca")],
        vec!["binarize".into(), "--rca".into(), d("rca/rca.csv"), "--out".into(), d("bin")],
        vec!["complexity".into(), "--matrix".into(), d("bin/matrix.csv"), "--method".into(), "eci,fitness".into(), "--out".into(), d("cx")],
        vec!["proximity".into(), "--matrix".into(), d("bin/matrix.csv"), "--out".into(), d("prox")],
    ];
    for s in &steps {
        let o = bin().args(s).output().unwrap();
        assert!(o.status.success(), "{s:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    // Chapter 10 codes of the synthetic file start at 010000.
    fs::write(dir.path().join("green.txt"), "# synthetic list\n01*\n").unwrap();
    let o = bin()
        .args(["green", "score", "--matrix", &d("bin/matrix.csv"), "--pci", &d("cx/pci.json")])
        .args(["--proximity", &d("prox/proximity.csv"), "--green-list", &d("green.txt")])
        .args(["--complexity", &d("cx/complexity.json"), "--pci-weighted-gcp", "--out", &d("green")])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("green/green.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("geo,gci,gcp,n_green_specializations"));
    assert_eq!(lines.count(), 25);
    assert!(dir.path().join("green/sectoral_fitness.csv").is_file());

    let wrong = bin()
        .args(["green", "score", "--matrix", &d("bin/matrix.csv"), "--pci", &d("cx/pci.json")])
        .args(["--proximity", &d("prox/proximity.csv"), "--green-list", &d("green.txt"), "--scheme", "cpc"])
        .args(["--out", &d("green2")])
        .output()
        .unwrap();
    assert_eq!(wrong.status.code(), Some(3));
}

#[test]
fn report_turns_m0_into_plot_tables() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("m0.csv");
    ecomplexity::export::write_binary(&matrix, &common::m0()).unwrap();
    let o = run(&["report", "--input", matrix.to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let heat = fs::read_to_string(dir.path().join("r/m0_heatmap.csv")).unwrap();
    let cells: Vec<&str> = heat.lines().skip(1).collect();
    assert_eq!(cells.len(), 6);
    assert!(cells[0].starts_with("0,0,g1|"));
}

#[test]
fn validate_subcommand_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    common::write_trade_file(&dir.path().join("trade.csv"), 20, 25, 2010..2013, 4);
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    assert!(run(&["ingest", "--input", &d("trade.csv"), "--out", &d("ingest")]).status.success());
    let go = |out: &str| {
        let o = run(&[
            "validate", "--records", &d("ingest/records.csv"), "--lag", "2", "--samples", "200", "--seed", "7", "--out", &d(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(dir.path().join(out).join("links.csv")).unwrap()
    };
    assert_eq!(go("v1"), go("v2"));
}
