use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use henonlab_core::{Branch, ComplexHenon, FamilySpec, GreenBudget, C2};
use num_complex::Complex64;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_henonlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("HENONLAB_SEED").output().expect("spawn henonlab")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_spec(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// `x² − t⁻¹ − a·y` with the given term list for `a`.
fn family_with_a(dir: &Path, a: &str) -> PathBuf {
    write_spec(dir, "family.json", &format!(r#"{{"d": 2, "coeffs": [[], [[-1, -1, 1, 0, 1]]], "a": {a}}}"#))
}

const UNIT: &str = r#"{"d": 2, "coeffs": [[], []], "a": [[0, 1, 1, 0, 1]]}"#;

#[test]
fn green_far_point_escapes_forward() {
    let dir = TempDir::new().unwrap();
    let spec = family_with_a(dir.path(), "[[0, 1, 1, 0, 1]]");
    let out = run(&["green", "--spec", spec.to_str().unwrap(), "--t", "0.25,0", "--point", "1000,0,0.5,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["status"], "EscapedPlus");
    assert_eq!(v["plus"]["escape_time"], 0);
    assert!(v["err_bound"].as_f64().unwrap() < 1e-9);
}

#[test]
fn green_origin_matches_library() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(dir.path(), "unit.json", UNIT);
    let out = run(&["green", "--spec", spec.to_str().unwrap(), "--t", "0.5", "--point", "0,0,0,0", "--budget", "40"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["status"], "BoundedToBudget");
    let fam = FamilySpec::from_json_str(UNIT).unwrap().family;
    let h = ComplexHenon::from_family(&fam, Complex64::new(0.5, 0.0)).unwrap();
    let g = h.green_certified(C2::from_re(0.0, 0.0), GreenBudget::new(1e-12, 40), Branch::Plus);
    assert_eq!(v["plus"]["value"].as_f64().unwrap(), g.value);
    assert_eq!(v["plus"]["err_bound"].as_f64().unwrap(), g.err_bound);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let spec = family_with_a(dir.path(), "[[-1, 1, 1, 0, 1]]");
    let args = ["green", "--spec", spec.to_str().unwrap(), "--t", "0.1,0.05", "--point", "0.3,1.2,-0.7,0.1"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    // every float carries 17 significant digits
    let value_line = text.lines().find(|l| l.starts_with("  \"value\"")).unwrap();
    let mantissa = value_line.split(':').nth(1).unwrap().trim().split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn parse_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write_spec(dir.path(), "bad.json", r#"{"d": 2, "coeffs": ["#);
    let out = run(&["green", "--spec", bad.to_str().unwrap(), "--t", "0.1", "--point", "0,0,0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));

    let spec = write_spec(dir.path(), "unit.json", UNIT);
    let out = run(&["green", "--spec", spec.to_str().unwrap(), "--t", "abc", "--point", "0,0,0,0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["green", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let zero_a = write_spec(dir.path(), "zero_a.json", r#"{"d": 2, "coeffs": [[], []], "a": []}"#);
    let out = run(&["green", "--spec", zero_a.to_str().unwrap(), "--t", "0.1", "--point", "0,0,0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tropical_orbit_and_exact_green() {
    let dir = TempDir::new().unwrap();
    let spec = family_with_a(dir.path(), "[[-1, 1, 1, 0, 1]]");
    let out = run(&["tropical", "--spec", spec.to_str().unwrap(), "--point", "-1/2,-3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["plus"]["green"]["status"], "Exact");
    assert_eq!(v["plus"]["green"]["q"], serde_json::json!([2, 1]));
    assert_eq!(v["plus"]["orbit"][1]["u"], serde_json::json!([-4, 1]));
}

#[test]
fn tropical_tie_exits_4_unless_exact() {
    let dir = TempDir::new().unwrap();
    let spec = family_with_a(dir.path(), "[[-1, 1, 1, 0, 1]]");
    let s = spec.to_str().unwrap();
    let out = run(&["tropical", "--spec", s, "--point", "0,0"]);
    assert_eq!(out.status.code(), Some(4));
    let v = json_of(&out);
    assert!(!v["plus"]["tie"].is_null());

    let out = run(&["tropical", "--spec", s, "--x", "[[0, 1, 0], [1, 2, 0]]", "--y", "[[0, 3, 0]]"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["plus"]["green"]["status"], "Exact");
    assert!(v["plus"]["tie"].is_null());
}

#[test]
fn uniformity_on_constant_family() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(dir.path(), "const.json", r#"{"d": 2, "coeffs": [[], [[0, -1, 1, 0, 1]]], "a": [[0, 1, 2, 0, 1]]}"#);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "experiment",
        "uniformity",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--budget",
        "300",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_of(&out)["violations"], 0);
    let csv = fs::read_to_string(out_dir.join("uniformity.csv")).unwrap();
    assert!(csv.starts_with("t_abs,n,sup_gap,ratio,bound,pass\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(out_dir.join("uniformity.json").exists() && out_dir.join("uniformity.dat").exists());
}

#[test]
fn seeded_experiments_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let spec = family_with_a(dir.path(), "[[-1, 1, 1, 0, 1]]");
    let csv_for = |seed: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = bin()
            .args(["experiment", "uniformity", "--spec", spec.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
            .args(["--budget", "200"])
            .env("HENONLAB_SEED", seed)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        fs::read(out_dir.join("uniformity.csv")).unwrap()
    };
    assert_eq!(csv_for("7", "a"), csv_for("7", "b"));
}

#[test]
fn lyapunov_with_a_equal_t() {
    let dir = TempDir::new().unwrap();
    let spec = family_with_a(dir.path(), "[[1, 1, 1, 0, 1]]");
    let out_dir = dir.path().join("lyap");
    let out = run(&["experiment", "lyapunov", "--spec", spec.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rep: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("lyapunov.json")).unwrap()).unwrap();
    for row in rep["rows"].as_array().unwrap() {
        assert!(row["sum_residual"].as_f64().unwrap() < 1e-6);
    }
    assert_eq!(rep["predicted_total_slope"].as_f64(), Some(-1.0));
}

#[test]
fn homogenization_snapshots() {
    let dir = TempDir::new().unwrap();
    let spec = family_with_a(dir.path(), "[[0, 1, 1, 0, 1]]");
    let out_dir = dir.path().join("hom");
    let out = run(&["experiment", "homogenization", "--spec", spec.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["failures"], serde_json::json!([]));
    for n in 1..=3 {
        let snap: Value = serde_json::from_str(&fs::read_to_string(out_dir.join(format!("homogenization_n{n}.json"))).unwrap()).unwrap();
        assert_eq!(snap["degree"], 2u64.pow(n));
    }
}

#[test]
fn normalize_then_evaluate() {
    let dir = TempDir::new().unwrap();
    let general = write_spec(
        dir.path(),
        "general.json",
        r#"{"coeffs": [[[1, 1, 1, 0, 1]], [], [], [[-2, 1, 1, 0, 1]]], "a": [[0, 1, 1, 0, 1]], "b": [[0, 1, 1, 0, 1]]}"#,
    );
    let out_dir = dir.path().join("norm");
    let out = run(&["normalize", "--spec", general.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["substitution"], 2);
    assert_eq!(v["family"]["d"], 3);
    let normalized = out_dir.join("normalized.json");
    let out = run(&["green", "--spec", normalized.to_str().unwrap(), "--t", "0.3", "--point", "10,0,0,0"]);
    assert_eq!(out.status.code(), Some(0));
}
