use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use identikit::config::RunConfig;
use identikit::model::lookup;
use identikit::report::fim_output;
use serde_json::Value;

const BIEXP: &str = r#"
seed = 5

[model]
name = "biexponential"
theta = [2.0, 1.0]

[design]
linspace = { start = 0.0, end = 5.0, n = 12 }
sigma = 0.02

[estimation]
starts = 8

[profile]
grid = { kind = "default", points = 15, width_sd = 4.0 }

[sobol]
n = 1024

[recover]
k_trials = 6
"#;

fn identikit(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_identikit"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn summary(out: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn non_positive_sigma_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.toml", &BIEXP.replace("sigma = 0.02", "sigma = 0.0"));
    let out = identikit(&["fim"], &config, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("design.sigma"));
}

#[test]
fn unknown_model_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.toml", &BIEXP.replace("\"biexponential\"", "\"quadratic\""));
    let out = identikit(&["fim"], &config, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.name"));
}

#[test]
fn malformed_toml_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.toml", "[model\nname = ");
    assert_eq!(identikit(&["fim"], &config, &tmp.path().join("out")).status.code(), Some(2));
    let config = write_config(tmp.path(), "d.toml", &format!("{BIEXP}\nunknown_key = 1\n"));
    assert_eq!(identikit(&["fim"], &config, &tmp.path().join("out")).status.code(), Some(2));
}

#[test]
fn non_finite_model_output_is_an_analysis_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[model]
name = "reciprocal"
theta = [0.0]
constants = { lower = [0.0], upper = [10.0] }

[design]
times = [0.0, 1.0]
sigma = 0.1
"#;
    let config = write_config(tmp.path(), "c.toml", text);
    let out = identikit(&["fim"], &config, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn redundant_exponential_is_rank_deficient() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[model]
name = "redundant-exponential"
theta = [2.0, -0.5, 0.3]

[design]
linspace = { start = 0.0, end = 2.0, n = 10 }
sigma = 0.05
"#;
    let config = write_config(tmp.path(), "c.toml", text);
    let dir = tmp.path().join("out");
    let out = identikit(&["fim"], &config, &dir);
    assert!(out.status.success());
    let s = summary(&dir);
    assert_eq!(s["fim"]["classification"], "rank-deficient");
    assert!(!s["fim"]["null_directions"].as_array().unwrap().is_empty());
}

#[test]
fn repeated_runs_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.toml", BIEXP);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(identikit(&["all"], &config, &a).status.success());
    assert!(identikit(&["all"], &config, &b).status.success());
    assert_eq!(summary(&a), summary(&b));
    for name in ["dataset.csv", "profile_0.csv", "profile_1.csv", "sobol.csv", "recovery.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn csv_files_agree_with_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.toml", BIEXP);
    let dir = tmp.path().join("out");
    assert!(identikit(&["all"], &config, &dir).status.success());
    let s = summary(&dir);

    let (header, rows) = csv_rows(&dir.join("sobol.csv"));
    assert_eq!(header, ["parameter", "S_first", "S_first_se", "S_total", "S_total_se"]);
    let agg = &s["sobol"]["aggregate"];
    for (i, row) in rows.iter().enumerate() {
        let parse = |k: usize| row[k].parse::<f64>().unwrap();
        assert_eq!(parse(1), agg["first"][i].as_f64().unwrap());
        assert_eq!(parse(2), agg["first_se"][i].as_f64().unwrap());
        assert_eq!(parse(3), agg["total"][i].as_f64().unwrap());
        assert_eq!(parse(4), agg["total_se"][i].as_f64().unwrap());
    }

    let (header, rows) = csv_rows(&dir.join("recovery.csv"));
    let success = header.iter().position(|h| h == "success").unwrap();
    let trials = s["recovery"]["trials"].as_array().unwrap();
    assert_eq!(rows.len(), trials.len());
    for (row, trial) in rows.iter().zip(trials) {
        assert_eq!(row[success].parse::<bool>().unwrap(), trial["success"].as_bool().unwrap());
        assert_eq!(row[1].parse::<f64>().unwrap(), trial["theta_true"][0].as_f64().unwrap());
    }

    for profile in s["profile"].as_array().unwrap() {
        let (header, rows) = csv_rows(&dir.join(profile["file"].as_str().unwrap()));
        assert_eq!(header, ["theta_i", "profile_loglik", "converged"]);
        assert_eq!(rows.len() as u64, profile["points"].as_u64().unwrap());
        let best = rows
            .iter()
            .map(|r| r[1].parse::<f64>().unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, profile["loglik_hat"].as_f64().unwrap());
    }
}

#[test]
fn fim_output_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = write_config(tmp.path(), "c.toml", BIEXP);
    let dir = tmp.path().join("out");
    assert!(identikit(&["fim"], &config_path, &dir).status.success());
    let config = RunConfig::load(&config_path).unwrap();
    let model = lookup::<f64>(&config.model.name, &config.model.constants).unwrap();
    let design = config.build_design().unwrap();
    let expected = serde_json::to_value(fim_output(&config, model.as_ref(), &design).unwrap()).unwrap();
    assert_eq!(summary(&dir)["fim"], expected);
}

#[test]
fn lists_builtin_models() {
    let out = Command::new(env!("CARGO_BIN_EXE_identikit"))
        .arg("--list-models")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["linear", "biexponential", "redundant-exponential", "reciprocal", "logistic"] {
        assert!(text.contains(name), "{name} missing from {text}");
    }
}
