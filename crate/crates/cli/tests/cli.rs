use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resonance"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn config(name: &str) -> PathBuf {
    root().join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Compares with `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {name}");
}

fn json_out(args: &[&str]) -> (i32, Value) {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = run(&all);
    let v = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stderr(&o)));
    (o.status.code().unwrap(), v)
}

#[test]
fn eigen_interval_golden() {
    let cfg = fixture("interval_k2.toml");
    let o = run(&["eigen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    golden("eigen_interval_k2.txt", &stdout(&o));
    let o = run(&["eigen", "--config", cfg.to_str().unwrap(), "--format", "csv"]);
    golden("eigen_interval_k2.csv", &stdout(&o));
}

#[test]
fn eigen_reports_gap_constants() {
    let cfg = fixture("interval_k2.toml");
    let (code, v) = json_out(&["eigen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let d = &v["decomposition"];
    assert_eq!(d["multiplicity"], 1);
    assert_eq!(d["c1"].as_f64().unwrap(), 3.0);
    assert!((d["c3"].as_f64().unwrap() - 5.0 / 9.0).abs() < 1e-15);
}

#[test]
fn eigen_flags_square_multiplicity() {
    let cfg = fixture("square_k2.toml");
    let (code, v) = json_out(&["eigen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["decomposition"]["multiplicity"], 2);
    assert_eq!(v["decomposition"]["bar"], serde_json::json!([2, 3]));
    golden("eigen_square_k2.txt", &stdout(&run(&["eigen", "--config", cfg.to_str().unwrap()])));
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let o = run(&["eigen", "--config", fixture("bad_field.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    golden("bad_field.stderr", &stderr(&o));

    let o = run(&["conditions", "--config", fixture("two_sources.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nonlinearity:"), "{}", stderr(&o));

    let o = run(&["eigen", "--config", fixture("interval_k2.toml").to_str().unwrap(), "--n-trunc", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--n-trunc"), "{}", stderr(&o));

    let o = run(&["eigen", "--config", fixture("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["eigen"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parse_check_exit_codes() {
    let o = run(&["parse-check", "atan(s) + 10*cos(s)"]);
    assert_eq!(o.status.code(), Some(0));
    golden("parse_ok.txt", &stdout(&o));
    let o = run(&["parse-check", "s + * 2"]);
    assert_eq!(o.status.code(), Some(1));
    golden("parse_err.txt", &stdout(&o));
    let o = run(&["parse-check", "--field", "sin(x) * y"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["parse-check", "sin(x)"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn conditions_exit_code_follows_sc() {
    let (code, v) = json_out(&["conditions", "--config", config("arctan-strip.toml").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["verdicts"]["LL+"], "holds");
    assert_eq!(v["verdicts"]["PLL+"], "holds");
    assert_eq!(v["verdicts"]["SC+"], "holds");
    assert_eq!(v["sc_case"], "SC+");

    let (code, v) = json_out(&["conditions", "--config", config("cauchy-cos.toml").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["verdicts"]["LL+"], "inapplicable");
    assert_eq!(v["verdicts"]["PLL+"], "fails");
    assert_eq!(v["verdicts"]["SC+"], "holds");

    // f = 2 phi_1 exceeds the potential threshold sqrt(2) and splits the rays
    let (code, v) = json_out(&["conditions", "--config", config("arctan-cos-strip.toml").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["verdicts"]["PLL+"], "fails");
    assert_eq!(v["sc_case"], Value::Null);
}

#[test]
fn conditions_verdict_table_golden() {
    let o = run(&["conditions", "--config", config("vanishing-log.toml").to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    // margins depend on libm; keep condition, verdict and certification
    let cols: String = stdout(&o)
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{},{},{}\n", f[0], f[1], f[4])
        })
        .collect();
    golden("vanishing_log_verdicts.csv", &cols);
}

#[test]
fn linear_solve_is_exact() {
    let (code, v) = json_out(&["solve", "--config", config("linear.toml").to_str().unwrap()]);
    assert_eq!(code, 0);
    let attempt = &v["attempts"][0];
    assert_eq!(attempt["geometry"], Value::Null);
    for s in attempt["solutions"].as_array().unwrap() {
        let a = s["coeffs"].as_array().unwrap();
        assert!((a[0].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-14);
        for c in &a[2..] {
            assert_eq!(c.as_f64().unwrap(), 0.0);
        }
        assert!(s["residual_norm"].as_f64().unwrap() < 1e-12);
    }
}

#[test]
fn indeterminate_sc_attempts_both_geometries() {
    let o = run(&["solve", "--config", config("arctan-cos-strip.toml").to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: neither SC+ nor SC- holds"), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let geoms: Vec<&str> = v["attempts"].as_array().unwrap().iter().map(|a| a["geometry"].as_str().unwrap()).collect();
    assert_eq!(geoms, ["SC+", "SC-"]);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn skip_conditions_warns_and_omits_verdicts() {
    let o = run(&["solve", "--config", config("cauchy-cos.toml").to_str().unwrap(), "--skip-conditions", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("condition checks were skipped"));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.get("verdicts").is_none());
}

#[test]
fn non_convergence_exits_1_and_dumps_trace() {
    let cfg = config("paper-example-E.toml");
    let text = fs::read_to_string(cfg).unwrap() + "\n[solver]\ngeometry = \"sc+\"\nsaddle_max_iter = 1\nmax_iter = 1\npatience = 1\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("starved.toml");
    fs::write(&path, text).unwrap();
    let o = run(&["solve", "--config", path.to_str().unwrap(), "--skip-conditions"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("did not converge"), "{out}");
    assert!(out.contains("|grad E|"), "{out}");
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("square.toml");
    for d in [&a, &b] {
        let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["report.json", "conditions.csv", "profiles.csv", "solution.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert!(x == y, "{f} differs between runs");
    }
    let report: Value = serde_json::from_slice(&fs::read(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metadata"]["command"], "solve");
    assert!(report["problem"]["forcing_projection_residual"].as_f64().unwrap() < 1e-3);
    let solution = fs::read_to_string(a.path().join("solution.csv")).unwrap();
    assert!(solution.starts_with("solution,geometry,x,y,u\n"));
}

#[test]
fn reproduce_examples_pass() {
    for id in ["arctan-strip", "vanishing-log", "arctan-cos-strip", "cauchy-cos", "paper-example-E"] {
        let (code, v) = json_out(&["reproduce", id]);
        let failed: Vec<&Value> = v["checks"].as_array().unwrap().iter().filter(|c| c["pass"] != true).collect();
        assert_eq!(code, 0, "{id}: {failed:?}");
        assert_eq!(v["passed"], true);
    }
}

#[test]
fn reproduce_arctan_cos_sweep_flips_at_threshold() {
    let (_, v) = json_out(&["reproduce", "arctan-cos-strip"]);
    assert!((v["threshold"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    for p in v["sweep"].as_array().unwrap() {
        let want = if p["fraction"].as_f64().unwrap() < 1.0 { "holds" } else { "fails" };
        assert_eq!(p["verdict"], want, "{p}");
    }
}

#[test]
fn reproduce_example_e_reports_truncation_tail() {
    let (_, v) = json_out(&["reproduce", "paper-example-E"]);
    let tail = &v["truncation_tail"];
    assert_eq!(tail["n_test"], 64);
    assert!(tail["tail"].as_f64().unwrap() > 0.0);
}

#[test]
fn reproduce_unknown_and_list() {
    let o = run(&["reproduce", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("paper-example-E"));
    let o = run(&["reproduce", "list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 5);
}
