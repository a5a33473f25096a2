use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const RUN: &str = r#"
seed = 5
output_dir = "runs"

[sphere]
radius_m = 1e-6
density_kg_m3 = 1100.0

[[modes]]
label = "x1"
frequency_hz = 12.9

[environment]
temperature_k = 298.0
pressure_pa = 0.25

[simulation]
duration_s = 40.0
"#;

const REPLAY: &str = r#"
output_dir = "replay"
mass_kg = 4.7e-15
radius_m = 1e-6
gamma_per_s = 2.136e-4
confidence = 0.95

[excess]
kind = "budget"
delta_t_k = DT
sigma_delta_t_k = 40.0
"#;

fn levicsl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levicsl"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// Every file below `dir`, relative to it.
fn files(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().display().to_string());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_is_byte_identical_for_the_same_seed() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "run.toml", RUN);
    assert_eq!(levicsl(tmp.path(), &["simulate", "run.toml"]).status.code(), Some(0));
    let first = fs::read(tmp.path().join("runs/trajectory.csv")).unwrap();
    assert_eq!(levicsl(tmp.path(), &["simulate", "run.toml"]).status.code(), Some(0));
    assert_eq!(first, fs::read(tmp.path().join("runs/trajectory.csv")).unwrap());

    let out = levicsl(tmp.path(), &["--seed", "6", "--out-dir", "other", "simulate", "run.toml"]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(first, fs::read(tmp.path().join("other/trajectory.csv")).unwrap());
}

#[test]
fn outputs_stay_in_the_output_directory_and_carry_digest_and_version() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "run.toml", RUN);
    let sim = levicsl(tmp.path(), &["--json", "simulate", "run.toml"]);
    assert_eq!(sim.status.code(), Some(0), "{}", String::from_utf8_lossy(&sim.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&sim.stdout).unwrap();
    assert!(summary["pressure_mbar"].as_f64().unwrap() > 0.0);
    let ana = levicsl(tmp.path(), &["analyze", "runs/trajectory.csv", "--config", "run.toml"]);
    assert_eq!(ana.status.code(), Some(0), "{}", String::from_utf8_lossy(&ana.stderr));

    let produced: Vec<String> = files(tmp.path()).into_iter().filter(|f| f != "run.toml").collect();
    assert!(!produced.is_empty());
    assert!(produced.iter().all(|f| f.starts_with("runs/")), "{produced:?}");
    let version = env!("CARGO_PKG_VERSION");
    for f in &produced {
        let text = fs::read_to_string(tmp.path().join(f)).unwrap();
        assert!(text.contains(version), "{f} lacks the tool version");
        assert!(text.contains("config_digest"), "{f} lacks the config digest");
    }
}

#[test]
fn negative_excess_is_a_flagged_success() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "replay.toml", &REPLAY.replace("DT", "-3.0"));
    let out = levicsl(tmp.path(), &["--json", "bound", "replay.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["delta_t"], -3.0);
    assert!(report["flags"].as_array().unwrap().iter().any(|f| f == "negative-delta-t-clamped"));
    assert_eq!(fs::read(tmp.path().join("replay/bound.json")).unwrap(), out.stdout);
    assert!(tmp.path().join("replay/exclusion.csv").exists());
}

#[test]
fn bound_replay_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "replay.toml", &REPLAY.replace("DT", "6.5"));
    let a = levicsl(tmp.path(), &["--json", "bound", "replay.toml"]);
    let b = levicsl(tmp.path(), &["--json", "bound", "replay.toml"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn malformed_config_exits_one_with_a_diagnostic() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "run.toml", &RUN.replace("frequency_hz = 12.9", "frequency_hz = 12.9\nfreq = 3"));
    let out = levicsl(tmp.path(), &["simulate", "run.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("freq") && err.contains("line"), "{err}");
    assert!(out.stdout.is_empty());
    assert!(!tmp.path().join("runs").exists());

    assert_eq!(levicsl(tmp.path(), &["simulate", "missing.toml"]).status.code(), Some(1));
    assert_eq!(levicsl(tmp.path(), &["exclude", "--grid", "1e-8:1e-6"]).status.code(), Some(1));
}

#[test]
fn numeric_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    // far too short to resolve the decay of the energy autocorrelation
    write(tmp.path(), "run.toml", &RUN.replace("duration_s = 40.0", "duration_s = 0.5"));
    assert_eq!(levicsl(tmp.path(), &["simulate", "run.toml"]).status.code(), Some(0));
    let out = levicsl(tmp.path(), &["analyze", "runs/trajectory.csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stderr.is_empty());
}

#[test]
fn reproduce_table_one_matches_published_values() {
    let tmp = TempDir::new().unwrap();
    let out = levicsl(tmp.path(), &["--json", "--out-dir", "tables", "reproduce", "--table", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for cell in report["cells"].as_array().unwrap() {
        if let Some(t) = cell.get("target").filter(|t| !t.is_null()) {
            assert_eq!(t["pass"], true, "{cell}");
        }
    }
    assert!(tmp.path().join("tables/table_1.json").exists());
}

#[test]
fn exclude_prints_the_curve_on_the_requested_grid() {
    let tmp = TempDir::new().unwrap();
    let out = levicsl(tmp.path(), &["--out-dir", "ex", "exclude", "--grid", "1e-8:1e-6:3", "--references"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4, "{text}");
    let csv = fs::read_to_string(tmp.path().join("ex/exclusion.csv")).unwrap();
    assert!(csv.starts_with('#'));
}
