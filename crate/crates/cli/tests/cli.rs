use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const HEADER_BYTES: u64 = 68;

fn typicality(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_typicality"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_model(dir: &Path, name: &str, m: usize, n: usize, w_bb: f64) -> std::path::PathBuf {
    let file = dir.join(name);
    fs::write(
        &file,
        format!("[model]\nm_sites = {m}\nn_bath = {n}\nw_bb = {w_bb}\nw_ib = 1.0\n"),
    )
    .unwrap();
    file
}

fn sha(p: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(p).unwrap()))
}

/// Data rows of a CSV written by the tool, skipping `#` lines and the header.
fn rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_file_layout_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_model(dir.path(), "m6.toml", 6, 3, 0.5);
    let out = dir.path().join("m6.ctsp");
    let run = typicality(&["spectrum", "--config", path(&config), "--out", path(&out), "--verify"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let d = 120u64;
    assert_eq!(fs::metadata(&out).unwrap().len(), HEADER_BYTES + 8 * (d + d * d));
    assert!(dir.path().join("m6.ctsp.config.toml").exists());
    let first = sha(&out);
    let again = typicality(&["spectrum", "--config", path(&config), "--out", path(&out)]);
    assert!(again.status.success());
    assert_eq!(sha(&out), first);
}

#[test]
fn invalid_parameters_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_model(dir.path(), "bad.toml", 3, 4, 1.0);
    let run = typicality(&["spectrum", "--config", path(&config), "--out", path(&dir.path().join("x.ctsp"))]);
    assert_eq!(run.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(run.stderr.trim_ascii_end()).unwrap();
    assert_eq!(err["error"], "validation");
    assert_eq!(err["exit_code"], 2);
    assert!(!dir.path().join("x.ctsp").exists());

    fs::write(dir.path().join("typo.toml"), "[model]\nm_sites = 4\nn_bath = 2\nw_bb = 1.0\nw_ib = 1.0\nwbb = 2\n").unwrap();
    let run = typicality(&["spectrum", "--config", path(&dir.path().join("typo.toml")), "--out", "y.ctsp"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn damaged_spectrum_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_model(dir.path(), "m5.toml", 5, 2, 0.5);
    let file = dir.path().join("m5.ctsp");
    assert!(typicality(&["spectrum", "--config", path(&config), "--out", path(&file)]).status.success());
    let bytes = fs::read(&file).unwrap();
    fs::write(&file, &bytes[..bytes.len() - 8]).unwrap();
    let out = dir.path().join("stats");
    let run = typicality(&["stats", path(&file), "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(4), "{}", String::from_utf8_lossy(&run.stderr));

    let other = write_model(dir.path(), "other.toml", 5, 2, 0.9);
    fs::write(&file, &bytes).unwrap();
    let run = typicality(&["rdm", path(&file), "--config", path(&other), "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(4));
    assert!(!out.join("verdicts.csv").exists());
}

#[test]
fn single_spectrum_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_model(dir.path(), "m10.toml", 10, 5, 1.0);
    let file = dir.path().join("m10.ctsp");
    assert!(typicality(&["spectrum", "--config", path(&config), "--out", path(&file)]).status.success());

    let stats = dir.path().join("stats");
    let run = typicality(&["stats", path(&file), "--config", path(&config), "--out", path(&stats)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let hist = rows(&stats.join("spacing_hist.csv"));
    let integral: f64 = hist.iter().map(|r| r[2].parse::<f64>().unwrap() * 0.01).sum();
    assert!((integral - 1.0).abs() < 1e-9, "{integral}");
    let ratios = rows(&stats.join("gap_ratio_hist.csv"));
    assert_eq!(ratios.len(), 50);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(stats.join("stats.json")).unwrap()).unwrap();
    let gamma = summary["brody"]["gamma"].as_f64().unwrap();
    assert!((0.0..=1.05).contains(&gamma));
    assert!(stats.join("resolved_config.toml").exists());

    let thermo = dir.path().join("thermo");
    assert!(typicality(&["thermo", path(&file), "--out", path(&thermo)]).status.success());
    assert_eq!(rows(&thermo.join("beta_curve.csv")).len(), 200);

    let rdm = dir.path().join("rdm");
    let run = typicality(&["--threads", "1", "rdm", path(&file), "--out", path(&rdm), "--dump", "0,17"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(rows(&rdm.join("verdicts.csv")).len(), 2520);
    for alpha in [0, 17] {
        let state = rdm.join("states").join(format!("alpha_{alpha}"));
        let d = rows(&state.join("rdm.csv"));
        assert_eq!(d.len(), 10);
        let trace: f64 = (0..10).map(|k| d[k][k + 1].parse::<f64>().unwrap()).sum();
        assert!((trace - 1.0).abs() < 1e-12);
    }
    assert!(!rdm.join("INCOMPLETE").exists());
}

#[test]
fn sweep_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(
        &config,
        "[sweep]\nsizes = [{ m_sites = 10, n_bath = 5 }]\nw_bb_grid = [1.0]\n[run]\nmemory_budget_gib = 2.0\n",
    )
    .unwrap();
    let results = dir.path().join("results");
    let cache = dir.path().join("cache");
    let run = typicality(&["--cache", path(&cache), "sweep", "--config", path(&config), "--out", path(&results)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(results.join("resolved_config.toml").exists());
    let first = sha(&results.join("summary.json"));

    let again = dir.path().join("again");
    let run = typicality(&["--cache", path(&cache), "sweep", "--config", path(&config), "--out", path(&again)]);
    assert!(run.status.success());
    assert_eq!(sha(&again.join("summary.json")), first);

    let report = dir.path().join("report");
    let run = typicality(&["report", path(&results), "--out", path(&report)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for name in [
        "staircase.csv",
        "dos.csv",
        "spacing_distribution.csv",
        "gamma_vs_wbb.csv",
        "gap_ratio_distribution.csv",
        "beta_curves.csv",
        "beta_vs_energy.csv",
        "G_vs_gamma.csv",
        "gamma_vs_size.csv",
        "G_vs_gamma_universal.csv",
    ] {
        let text = fs::read_to_string(report.join(name)).unwrap();
        assert!(text.lines().any(|l| l.starts_with("# schema: ")), "{name}");
    }
    assert_eq!(rows(&report.join("G_vs_gamma.csv")).len(), 1);
}
