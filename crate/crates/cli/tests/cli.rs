use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/problems")
}

fn maxode(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxode")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn demo(name: &str) -> String {
    problems().join(format!("{name}.json")).display().to_string()
}

#[test]
fn parse_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", r#"{"m":1,"f":["x1 - m1"],"maxima":["x1^2"],"x0":[0.5],"T":0.2}"#);
    let out = maxode(&["parse-check", &ok], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("f[0] = (x1 - m1)"));

    let bad = write(dir.path(), "bad.json", r#"{"m":1,"f":["x2 - m1"],"maxima":["x1^2"],"x0":[0.5],"T":0.2}"#);
    let out = maxode(&["parse-check", &bad], dir.path());
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(x2 - m1)") && err.contains("x2"), "{err}");

    let empty = write(dir.path(), "empty.json", r#"{"m":1,"f":[],"x0":[0.5],"T":0.2}"#);
    assert_eq!(code(&maxode(&["parse-check", &empty], dir.path())), 2);
    let garbage = write(dir.path(), "garbage.json", r#"{"m":1,"f":["x1 +"],"x0":[0.5],"T":0.2}"#);
    assert_eq!(code(&maxode(&["parse-check", &garbage], dir.path())), 2);
    assert_eq!(code(&maxode(&["parse-check", "missing.json"], dir.path())), 3);
}

#[test]
fn solve_picard_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = maxode(&["solve", &demo("logistic"), "--method", "picard", "--steps", "200", "--tend", "0.2"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("logistic.picard.json")).unwrap()).unwrap();
    assert_eq!(report["picard"]["converged"], true);
    assert_eq!(report["status"], "ok");
    let x = report["final_state"][0].as_f64().unwrap();
    let exact = 0.5 * 0.2f64.exp() / (0.5 + 0.5 * 0.2f64.exp());
    assert!((x - exact).abs() < 1e-5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "zero.json", r#"{"m":1,"f":["x1 - m1"],"maxima":["x1^2"],"x0":[0],"T":1}"#);
    for method in ["euler", "heun", "picard"] {
        assert_eq!(code(&maxode(&["solve", &p, "--method", method, "--steps", "50"], dir.path())), 0);
        let csv = std::fs::read_to_string(dir.path().join(format!("zero.{method}.csv"))).unwrap();
        for line in csv.lines().skip(1) {
            let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(&cols[1..], &[0.0, 0.0]);
        }
    }
}

#[test]
fn infeasible_quadratic_horizon_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "quad.json", r#"{"m":2,"f":["x1 - m2","x2 - m1"],"maxima":["x1^2","x2^2"],"x0":[0.25,0.25],"T":1}"#);
    let out = maxode(&["solve", &p, "--require-horizon", "--c0", "0.5"], dir.path());
    assert_eq!(code(&out), 6);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("|x0| + c0 T + c0^2 T <= c0"), "{err}");
    let out = maxode(&["solve", &demo("coupled_quadratic"), "--require-horizon"], dir.path());
    assert_eq!(code(&out), 0);
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = maxode(&["solve", &demo("logistic"), "--method", "picard", "--max-iter", "2"], dir.path());
    assert_eq!(code(&out), 4);
    let out = maxode(&["picard", &demo("logistic"), "--max-iter", "2"], dir.path());
    assert_eq!(code(&out), 4);

    let blow = write(dir.path(), "blow.json", r#"{"m":1,"f":["x1^2"],"x0":[10],"T":5}"#);
    assert_eq!(code(&maxode(&["solve", &blow, "--method", "euler", "--steps", "10"], dir.path())), 5);
    let domain = write(dir.path(), "domain.json", r#"{"m":1,"f":["log(x1 - 2)"],"x0":[1],"T":1}"#);
    assert_eq!(code(&maxode(&["solve", &domain], dir.path())), 5);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let files = ["time_varying.heun.csv", "time_varying.heun.json", "manifest.json"];
    let run = || {
        assert_eq!(code(&maxode(&["solve", &demo("time_varying"), "--steps", "300"], dir.path())), 0);
        files.map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn digest_ignores_formatting() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{"m":1,"f":["x1 - m1"],"maxima":["x1^2"],"x0":[0.5],"T":0.2}"#);
    let b = write(dir.path(), "b.json", "{ \"T\": 0.2, \"x0\": [0.5],\n \"maxima\": [\"(x1)^2\"], \"f\": [\"x1-m1\"], \"m\": 1 }");
    let digest = |p: &str| {
        assert_eq!(code(&maxode(&["horizon", p, "--alpha", "2"], dir.path())), 0);
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        m["digest"].as_str().unwrap().to_string()
    };
    assert_eq!(digest(&a), digest(&b));
}

#[test]
fn horizon_reports_branch() {
    let dir = tempfile::tempdir().unwrap();
    let out = maxode(&["horizon", &demo("logistic"), "--alpha", "2"], dir.path());
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["branch"], "lipschitz");
    assert!((v["t_sup"].as_f64().unwrap() - 1.0 / (2f64.sqrt() * 6.0)).abs() < 1e-9);

    let out = maxode(&["horizon", &demo("logistic"), "--m-bound", "1", "--lf", "0.1", "--lg", "0.1"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["branch"], "reference");
    assert_eq!(v["t_sup"], 0.2);
}

#[test]
fn verify_filter_and_slack() {
    let dir = tempfile::tempdir().unwrap();
    let out = maxode(&["verify", "--filter", "logistic"], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 4);

    let out = maxode(&["verify", "--filter", "logistic-bounds", "--epsilon-grid", "0"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] C2"));

    assert_eq!(code(&maxode(&["verify", "--filter", "no-such-criterion"], dir.path())), 2);
}
