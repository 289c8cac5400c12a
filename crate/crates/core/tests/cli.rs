//! End-to-end runs of the `regcx` binary on the fixture data.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regional_complexity::diagnostics::{is_lower_triangular_ones, read_triplet_csv};
use regional_complexity::pipeline::Manifest;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn regcx(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regcx"))
        .env_remove("REGCX_CONFIG")
        .arg("--config")
        .arg(fixtures().join("run.toml"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn manifest(out: &Path, cmd: &str) -> Manifest {
    serde_json::from_slice(&fs::read(out.join(cmd).join("manifest.json")).unwrap()).unwrap()
}

fn snapshot(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for cmd in ["ingest", "compute", "diagnose", "regress"] {
        let mut names: Vec<_> = fs::read_dir(out.join(cmd)).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            files.push((p.strip_prefix(out).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
    files
}

#[test]
fn full_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for cmd in ["ingest", "compute", "diagnose", "regress"] {
        ok(&regcx(out, &[cmd]));
    }
    let first = snapshot(out);
    for cmd in ["ingest", "compute", "diagnose", "regress"] {
        ok(&regcx(out, &["--jobs", "3", cmd]));
    }
    assert_eq!(first, snapshot(out));

    // 2 years × 5 strategies × 2 indices, a CSV and a JSON each
    let compute = manifest(out, "compute");
    assert_eq!(compute.outputs.len(), 40);
    assert!(compute.failures.is_empty());

    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("ingest/report.json")).unwrap()).unwrap();
    assert!(report["imputed_employment"].as_f64().unwrap() > 0.0);
    assert_eq!(report["files"][0]["rejects"], 1);
    assert_eq!(report["files"][0]["filtered"], 1);

    let corr = fs::read_to_string(out.join("diagnose/correlation_2015_eci.csv")).unwrap();
    assert_eq!(corr.lines().next().unwrap(), "strategy,BM,CM,Presence,RLQ,WM");
    assert_eq!(corr.lines().count(), 6);

    let table = fs::read_to_string(out.join("regress/income_cross_section.txt")).unwrap();
    assert!(table.contains("(5)") && !table.contains("(6)"));
    assert!(table.contains("Note: *p<0.1; **p<0.05; ***p<0.01"));
}

#[test]
fn inputs_are_untouched() {
    let before = fs::read(fixtures().join("employment.csv")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ok(&regcx(dir.path(), &["ingest"]));
    assert_eq!(before, fs::read(fixtures().join("employment.csv")).unwrap());
}

#[test]
fn missing_crosswalk_is_a_validation_error_with_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = regcx(&out, &["ingest", "--geography-crosswalk", "/nonexistent/cw.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/cw.csv"));
    assert!(!out.exists());
}

#[test]
fn compute_without_panel_names_the_expected_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = regcx(dir.path(), &["compute"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("panel.csv"));
}

#[test]
fn absent_year_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    ok(&regcx(dir.path(), &["ingest"]));
    let o = regcx(dir.path(), &["compute", "--years", "2013,2015", "--strategies", "CM", "--indices", "eci"]);
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(dir.path(), "compute");
    assert_eq!(m.failures.len(), 1);
    assert!(m.failures[0].starts_with("2013_CM_eci"));
    assert!(dir.path().join("compute/2015_CM_eci.csv").exists());
}

#[test]
fn nested_synth_heatmap_is_lower_triangular() {
    let dir = tempfile::tempdir().unwrap();
    ok(&regcx(dir.path(), &["synth", "--kind", "nested", "--regions", "9", "--industries", "9"]));
    let matrix = dir.path().join("synth/matrix.csv");
    ok(&regcx(dir.path(), &["diagnose", "--matrix", matrix.to_str().unwrap(), "--formats", "csv"]));
    let values = read_triplet_csv(fs::File::open(dir.path().join("diagnose/heatmap_matrix.csv")).unwrap()).unwrap();
    assert_eq!(values.shape(), (9, 9));
    assert!(is_lower_triangular_ones(&values));
}

#[test]
fn synth_seed_lands_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&regcx(dir.path(), &["synth", "--regions", "30", "--industries", "20", "--seed", "17"]));
    let m = manifest(dir.path(), "synth");
    assert_eq!(m.seeds, vec![17]);
    assert!(m.rng.unwrap().contains("ChaCha8"));
    assert!(dir.path().join("synth/capabilities.csv").exists());
}

#[test]
fn bad_flag_values_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = regcx(dir.path(), &["compute", "--cutoff=-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = regcx(dir.path(), &["synth", "--p-region", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
