use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use univport_cli::{fit_slope, run, Scenario};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_univport"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const COUNTEREXAMPLE: &str = r#"
scenario = "counterexample"

[market]
kind = "counterexample"
delta = 0.2

[run]
horizons = [2000]

[check]
tolerance = 1e-6
"#;

#[test]
fn counterexample_passes_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), COUNTEREXAMPLE);
    let out = dir.path().join("out");
    let outcome = run(Scenario::Counterexample, &config, &out, None).unwrap();
    assert!(outcome.passed);
    let rate = outcome.metric("final_log_ratio").unwrap();
    assert!((rate - (11.0f64 / 12.0).ln()).abs() < 1e-6);

    let manifest: toml::Table = toml::from_str(&fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["scenario"].as_str(), Some("counterexample"));
    assert_eq!(manifest["status"].as_str(), Some("pass"));
    assert_eq!(manifest["seed"].as_str(), Some("0"));
    assert_eq!(manifest["version"].as_str(), Some(env!("CARGO_PKG_VERSION")));
    let digest = manifest["config_sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2002);
    assert!(trace.starts_with("t,V_hat,V_star,logV_hat,logV_star,log_ratio,"));
    assert!(out.join("summary.csv").exists());
}

#[test]
fn config_hash_changes_with_content() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), COUNTEREXAMPLE);
    run(Scenario::Counterexample, &a, &dir.path().join("a"), None).unwrap();
    fs::write(&a, format!("{COUNTEREXAMPLE}\n# comment\n")).unwrap();
    run(Scenario::Counterexample, &a, &dir.path().join("b"), None).unwrap();
    let read = |d: &str| fs::read_to_string(dir.path().join(d).join("manifest.toml")).unwrap();
    assert_ne!(read("a"), read("b"));
}

#[test]
fn zero_delta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &COUNTEREXAMPLE.replace("delta = 0.2", "delta = 0.0"));
    let out = dir.path().join("out");
    let (code, _, err) = binary(&[
        "counterexample",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("delta"));
    assert!(!out.exists(), "nothing is written before validation succeeds");
}

#[test]
fn missing_delta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &COUNTEREXAMPLE.replace("delta = 0.2", ""));
    let err = run(Scenario::Counterexample, &config, &dir.path().join("out"), None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("delta"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &COUNTEREXAMPLE.replace("tolerance = 1e-6", "tolerance = 1e-6\ntolerence = 1"),
    );
    let err = run(Scenario::Counterexample, &config, &dir.path().join("out"), None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let config = write_config(dir.path(), &format!("extra = 1\n{COUNTEREXAMPLE}"));
    assert_eq!(
        run(Scenario::Counterexample, &config, &dir.path().join("out"), None)
            .unwrap_err()
            .exit_code(),
        2
    );
}

#[test]
fn scenario_mismatch_is_rejected() {
    let err = run(
        Scenario::Ldp,
        &config_path("counterexample.toml"),
        Path::new("/nonexistent/out"),
        None,
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn missing_config_file_is_a_config_error() {
    let (code, _, _) = binary(&[
        "ldp",
        "--config",
        "/nonexistent/config.toml",
        "--out",
        "/nonexistent/out",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn zero_samples_is_a_config_error() {
    let text = fs::read_to_string(config_path("fgp_verify.toml"))
        .unwrap()
        .replace("samples = 1000", "samples = 0");
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &text);
    let (code, _, err) = binary(&[
        "fgp-verify",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn injected_non_concave_generator_fails_with_located_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, stdout, _) = binary(&[
        "fgp-verify",
        "--config",
        config_path("fgp_non_concave.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stdout.contains("defining inequality fails"), "{stdout}");
    assert!(stdout.contains("p = [") && stdout.contains("q = ["));
    let table = fs::read_to_string(out.join("fg_inequality.csv")).unwrap();
    let failing: Vec<&str> = table.lines().filter(|l| l.contains(",false,")).collect();
    assert_eq!(failing.len(), 1);
    // the located pair is recorded
    assert!(failing[0].split(',').skip(4).all(|x| !x.is_empty()));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"fail\""));
}

#[test]
fn seed_override_is_recorded_and_changes_the_path() {
    let text = r#"
scenario = "universality"
seed = 1

[market]
kind = "markov"
states = [[0.37, 0.63], [0.58, 0.42]]
transition = [[0.3, 0.7], [0.6, 0.4]]

[family]
kind = "constant_cloud"
size = 8

[run]
horizons = [50, 100]

[check]
tolerance = 0.5
"#;
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), text);
    run(Scenario::Universality, &config, &dir.path().join("a"), None).unwrap();
    run(Scenario::Universality, &config, &dir.path().join("b"), Some(99)).unwrap();
    let manifest = fs::read_to_string(dir.path().join("b/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = \"99\""));
    let trace = |d: &str| fs::read(dir.path().join(d).join("trace.csv")).unwrap();
    assert_ne!(trace("a"), trace("b"));
    run(Scenario::Universality, &config, &dir.path().join("c"), Some(1)).unwrap();
    assert_eq!(trace("a"), trace("c"));
}

#[test]
fn single_member_family_reports_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(Scenario::Ldp, &config_path("ldp_single.toml"), dir.path(), None).unwrap();
    assert!(outcome.passed);
    assert!(outcome.notes.iter().any(|n| n.contains("not applicable")));
}

#[test]
fn market_only_family_has_zero_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(
        Scenario::Universality,
        &config_path("universality_market.toml"),
        dir.path(),
        None,
    )
    .unwrap();
    assert!(outcome.passed);
    assert_eq!(outcome.metric("final_log_ratio"), Some(0.0));
}

#[test]
fn counterexample_cylinders_have_vanishing_rates() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(Scenario::Ldp, &config_path("ldp_counterexample.toml"), dir.path(), None).unwrap();
    assert!(outcome.passed);
    assert_eq!(fs::read_dir(dir.path().join("cylinders")).unwrap().count(), 10);
}

#[test]
fn two_atom_ldp_writes_profile_and_concentration() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(Scenario::Ldp, &config_path("ldp_two_atom.toml"), dir.path(), None).unwrap();
    assert!(outcome.passed);
    assert!((outcome.metric("target_rate").unwrap() - 0.05).abs() < 1e-10);
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 3);
}

#[test]
fn every_shipped_config_parses() {
    for entry in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let table: toml::Table = toml::from_str(&text).unwrap();
        let scenario = match table["scenario"].as_str().unwrap() {
            "counterexample" => Scenario::Counterexample,
            "universality" => Scenario::Universality,
            "ldp" => Scenario::Ldp,
            "fgp-verify" => Scenario::FgpVerify,
            other => panic!("unknown scenario {other}"),
        };
        univport_cli::config::validate(scenario, &text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn slope_of_exact_line() {
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + 3.0).collect();
    assert!((fit_slope(&xs, &ys) - 0.5).abs() < 1e-15);
}
