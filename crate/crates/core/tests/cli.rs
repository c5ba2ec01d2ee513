use std::path::Path;
use std::process::Command;

use pwdecay::cli::{execute, verdict, Verdict};
use pwdecay::config::{Mode, RunConfig};
use serde_json::Value;

const SMALL: &str = r#"{
  "profile": {"sigma": "1/2", "delta": "1", "amp_h": 0.1, "amp_V": 0.1},
  "grid": {"u_min": 0, "u_max": 120, "v_max": 140, "h": 0.125, "output_stride": 8},
  "samplers": [{"curve": "fixed_u", "u": 20}],
  "fit_window": [40, 120],
  "oracle": {"sources": 2, "points": 4}
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pwdecay"))
}

fn run(args: &[&str]) -> (i32, Value, String) {
    let out = bin().args(args).output().expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let stderr = String::from_utf8_lossy(&out.stderr).to_string();
    let doc = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), doc, stderr)
}

fn small(mode: Mode) -> RunConfig {
    let mut c = RunConfig::from_json(SMALL).unwrap();
    c.mode = Some(mode);
    c
}

#[test]
fn predict_part_two_reports_three() {
    let (code, doc, stderr) = run(&["predict", "--sigma", "1", "--delta", "5", "--part", "2"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(doc["report"]["theorem_exponent"], "3");
    assert!(doc["config_hash"].as_str().unwrap().len() == 64);
    assert!(!stderr.is_empty(), "step table goes to stderr");
}

#[test]
fn negative_rate_is_a_validation_error() {
    let (code, _, stderr) = run(&["predict", "--sigma", "1", "--delta", "-1"]);
    assert_eq!(code, 2);
    let err: Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(err["message"].as_str().unwrap().contains("0<σ,δ<∞"), "{err}");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let (code, _, stderr) = run(&["bogus"]);
    assert_eq!(code, 2);
    let err: Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn unknown_config_field_rejected() {
    assert!(RunConfig::from_json(r#"{"grdi": {}}"#).is_err());
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let (code, doc, stderr) = run(&["predict", "--config", cfg.to_str().unwrap(), "--delta", "none"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(doc["config"]["profile"]["sigma"], "1/2");
    assert!(doc["config"]["profile"]["delta"].is_null());
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().to_string(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, SMALL).unwrap();
    for mode in ["simulate", "oracle"] {
        let a = dir.path().join(format!("{mode}-a"));
        let b = dir.path().join(format!("{mode}-b"));
        for d in [&a, &b] {
            let (code, _, stderr) = run(&[mode, "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
            assert_eq!(code, 0, "{stderr}");
        }
        let (fa, fb) = (read_all(&a), read_all(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{mode}");
        assert!(a.join("timing.json").exists());
    }
}

#[test]
fn simulate_csv_carries_hash() {
    let c = small(Mode::Simulate);
    let o = execute(&c).unwrap();
    let (name, bytes) = o.artifacts.iter().find(|(n, _)| n.ends_with(".csv")).unwrap();
    let text = String::from_utf8_lossy(bytes);
    assert!(text.starts_with(&format!("# config_hash={}", c.hash())), "{name}");
}

#[test]
fn execute_is_deterministic() {
    for mode in [Mode::Predict, Mode::Fit, Mode::Norms] {
        let c = small(mode);
        let a = execute(&c).unwrap();
        let b = execute(&c).unwrap();
        assert_eq!(a.primary, b.primary, "{mode:?}");
        assert_eq!(a.artifacts, b.artifacts, "{mode:?}");
    }
}

#[test]
fn hash_ignores_output_dir() {
    let mut a = small(Mode::Simulate);
    let b = a.clone();
    a.out = Some("/tmp/elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    let mut c = b.clone();
    c.seed += 1;
    assert_ne!(c.hash(), b.hash());
}

#[test]
fn config_roundtrip() {
    let c = small(Mode::Verify);
    assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
}

#[test]
fn verdict_rules() {
    assert_eq!(verdict(3.0, 3.05, 0.3), (Verdict::Consistent, true));
    assert_eq!(verdict(3.0, 3.5, 0.3), (Verdict::Consistent, false));
    assert_eq!(verdict(3.0, 2.71, 0.3), (Verdict::Consistent, true));
    assert_eq!(verdict(3.0, 2.69, 0.3), (Verdict::Inconsistent, false));
}

#[test]
fn fit_reads_input_series() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    let mut text = String::from("# synthetic\nt,phi\n");
    for k in 0..200 {
        let t = 10.0 * 1.02f64.powi(k);
        text.push_str(&format!("{t},{}\n", 5.0 * t.powf(-2.75)));
    }
    std::fs::write(&p, text).unwrap();
    let mut c = RunConfig { input: Some(p), ..RunConfig::default() };
    c.mode = Some(Mode::Fit);
    let o = execute(&c).unwrap();
    let e = o.primary["fit"]["power"]["exponent"].as_f64().unwrap();
    assert!((e - 2.75).abs() < 1e-9, "{e}");
}

fn synthetic(dir: &Path, rate: f64) -> std::path::PathBuf {
    let p = dir.join(format!("tail-{rate}.csv"));
    let mut text = String::from("t,phi\n");
    for k in 0..300 {
        let t = 100.0 * 1.01f64.powi(k);
        text.push_str(&format!("{t},{}\n", t.powf(-rate)));
    }
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // δ = 1/2 without σ predicts 2.5 at fixed r.
    for (rate, code, tight) in [(1.5, 1, false), (2.4, 0, true), (3.5, 0, false)] {
        let mut c = small(Mode::Verify);
        c.profile.sigma = None;
        c.profile.delta = Some(num_rational::Ratio::new(1, 2));
        c.input = Some(synthetic(dir.path(), rate));
        c.fit_window = Some((200.0, 1500.0));
        let o = execute(&c).unwrap();
        assert_eq!(o.primary["verify"]["predicted_local_exponent"], 2.5);
        assert_eq!(o.exit_code, code, "rate {rate}");
        assert_eq!(o.primary["verify"]["tight"], tight, "rate {rate}");
    }
}
