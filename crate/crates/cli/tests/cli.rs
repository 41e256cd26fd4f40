//! End-to-end runs of the `lec` binary on the bundled synthetic fixture.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lec_core::fixture;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

fn config() -> PathBuf {
    fixture_dir().join(fixture::CONFIG_FILE)
}

fn lec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lec")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Copy of the fixture with `edit` applied to the config text.
fn edited_fixture(edit: impl Fn(String) -> String) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fixture::write(dir.path()).unwrap();
    let path = dir.path().join(fixture::CONFIG_FILE);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, edit(text)).unwrap();
    dir
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bundled_fixture_matches_generator() {
    let dir = fixture_dir();
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        fixture::write(&dir).unwrap();
    }
    for (name, body) in fixture::files() {
        let on_disk = fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(on_disk, body, "{name} is stale; rerun with UPDATE_FIXTURES=1");
    }
}

#[test]
fn validate_accepts_fixture() {
    let out = lec(&["validate", "--config", path_str(&config())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn validate_rejects_broken_coefficients() {
    let dir = edited_fixture(|t| t.replace("sharing = 0.48", "sharing = 0.5"));
    let out = lec(&["validate", "--config", path_str(&dir.path().join(fixture::CONFIG_FILE))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("sharing coefficients sum"), "{}", stderr(&out));
}

#[test]
fn malformed_series_is_a_validation_failure() {
    let dir = edited_fixture(|t| t);
    let load = dir.path().join("load.csv");
    let text = fs::read_to_string(&load).unwrap();
    let without_row: Vec<&str> = text.lines().enumerate().filter(|&(i, _)| i != 5).map(|(_, l)| l).collect();
    fs::write(&load, without_row.join("\n") + "\n").unwrap();
    let out = lec(&["baseline", "--config", path_str(&dir.path().join(fixture::CONFIG_FILE))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("2022-03-03T04:00:00"), "{}", stderr(&out));
}

#[test]
fn missing_file_is_an_io_failure() {
    let out = lec(&["baseline", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn undersized_contract_is_infeasible() {
    let dir = edited_fixture(|t| t.replace("max_import = [75, 75, 75, 75, 75, 75]", "max_import = [10, 10, 10, 10, 10, 10]"));
    let out = lec(&[
        "optimize",
        "--config",
        path_str(&dir.path().join(fixture::CONFIG_FILE)),
        "--objective",
        "price",
        "--sharing",
        "static",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("import limit"), "{}", stderr(&out));
}

#[test]
fn all_wind_mix_gives_constant_wind_factor() {
    let dir = tempfile::tempdir().unwrap();
    let mix = dir.path().join("mix.csv");
    let mut text = String::from("ts,Wind\n");
    for h in 0..24 {
        text.push_str(&format!("2022-03-03T{h:02}:00:00,{}\n", 1000 + 37 * h));
    }
    fs::write(&mix, text).unwrap();
    let out = lec(&["gwp", "--mix", path_str(&mix)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let values: Vec<&str> = stdout.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(values.len(), 24);
    assert!(values.iter().all(|v| *v == "0.022000"), "{stdout}");
}

#[test]
fn price_static_costs_no_more_than_baseline() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = lec(&[
        "optimize",
        "--config",
        path_str(&config()),
        "--objective",
        "price",
        "--sharing",
        "static",
        "--out",
        path_str(out_dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let read = |name: &str| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(out_dir.path().join(name)).unwrap()).unwrap()
    };
    let report = read("price-static.json");
    let baseline = read("baseline.json");
    let cost = report["total"]["cost_eur"].as_f64().unwrap();
    let base = baseline["total"]["cost_eur"].as_f64().unwrap();
    assert!(cost <= base + 1e-6, "{cost} > {base}");
    assert_eq!(report["participants"].as_array().unwrap().len(), 4);
    let trace = fs::read_to_string(out_dir.path().join("price-static-trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + fixture::HOURS);
}

#[test]
fn identical_inputs_give_identical_output() {
    let run = |dir: &Path| {
        lec(&["optimize", "--config", path_str(&config()), "--out", path_str(dir)])
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (out_a, out_b) = (run(a.path()), run(b.path()));
    assert_eq!(code(&out_a), 0, "{}", stderr(&out_a));
    assert_eq!(out_a.stdout, out_b.stdout);
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2 + 4 * 3);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn export_lp_writes_one_day() {
    let out = lec(&["export-lp", "--config", path_str(&config()), "--objective", "environment", "--day", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Minimize") && text.contains("Subject To"));
    assert!(text.contains("2022-03-04T00:00:00"), "header names the window start");
    let late = lec(&["export-lp", "--config", path_str(&config()), "--day", "2"]);
    assert_eq!(code(&late), 1);
}
