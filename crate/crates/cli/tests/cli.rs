use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
set1.rotations_per_combo = 12
set1.period = 12
set2.rotations_per_combo = 16
set2.hold = 1
gpr.restarts = 1
";

fn itire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itire"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.cfg");
    fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&itire(&[])), 2);
    assert_eq!(code(&itire(&["generate", "--bogus"])), 2);
    assert_eq!(code(&itire(&["generate", "--set", "3"])), 2);
    assert_eq!(code(&itire(&["train"])), 2);
    assert_eq!(code(&itire(&["train", "--in", "x.csv", "--axes", "xw"])), 2);
    assert_eq!(code(&itire(&["--help"])), 0);
}

#[test]
fn missing_input_is_a_data_error_naming_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = itire(&["preprocess", "--in", "/nonexistent/raw.csv", "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("read raw"), "{err}");
}

#[test]
fn bad_config_is_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "seed = 1\ngpr.restart = 3\n").unwrap();
    let o = itire(&["generate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("config") && err.contains(":2:1"), "{err}");
}

#[test]
fn zero_truth_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("predictions.csv");
    fs::write(
        &p,
        "rotation_id,Fy_N,Fz_N,slip_deg,speed_kmh,mean_N,variance_N2,predictive_variance_N2,lo_N,hi_N\n\
         0,0,4160,0,60,1,1,2,-1,3\n1,0,4160,0,60,-1,1,2,-3,1\n",
    )
    .unwrap();
    let o = itire(&["evaluate", "--in", s(&p), "--out", s(dir.path())]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = itire(&["generate", "--config", &cfg, "--set", "1", "--seed", seed, "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
        assert!(stdout.contains(&format!("artifact: {}", out.join("raw_set1.csv").display())));
        fs::read(out.join("raw_set1.csv")).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}

#[test]
fn chain_produces_consistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = dir.path().join("o");
    let ok = |args: &[&str]| {
        let r = itire(args);
        assert_eq!(code(&r), 0, "{args:?}: {}", stderr(&r));
        String::from_utf8_lossy(&r.stdout).into_owned()
    };
    ok(&["generate", "--config", &cfg, "--out", s(&o)]);
    for set in ["raw_set1.csv", "raw_set2.csv"] {
        ok(&["preprocess", "--config", &cfg, "--in", s(&o.join(set)), "--out", s(&o)]);
    }
    ok(&["train", "--config", &cfg, "--in", s(&o.join("features_set1.csv")), "--out", s(&o)]);
    let log = fs::read_to_string(o.join("fit_log.txt")).unwrap();
    assert!(log.contains("log_likelihood = ") && log.contains("length_scale[41]"));
    ok(&[
        "predict", "--model", s(&o.join("model.itgp")), "--in", s(&o.join("features_set2.csv")),
        "--out", s(&o),
    ]);
    let stdout = ok(&["evaluate", "--in", s(&o.join("predictions.csv")), "--svg", "--out", s(&o)]);
    assert!(stdout.contains("NRMSE"));

    let plot = fs::read_to_string(o.join("plot_data.csv")).unwrap();
    assert_eq!(plot.lines().count() - 1, 96);
    let svg = fs::read_to_string(o.join("prediction.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polygon") && svg.contains("<polyline"));

    // Model file carries the feature configuration; overriding axes at
    // training changes the input width.
    ok(&[
        "train", "--config", &cfg, "--axes", "yz", "--resolution", "2.5", "--in",
        s(&o.join("features_set1.csv")), "--out", s(&dir.path().join("yz")),
    ]);
    let log = fs::read_to_string(dir.path().join("yz/fit_log.txt")).unwrap();
    assert!(log.contains("features = yz@2.5") && log.contains("input_dim = 56"));
}

#[test]
fn full_scale_chain_meets_nrmse_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path();
    let ok = |args: &[&str]| {
        let r = itire(args);
        assert_eq!(code(&r), 0, "{args:?}: {}", stderr(&r));
        String::from_utf8_lossy(&r.stdout).into_owned()
    };
    ok(&["generate", "--out", s(o)]);
    for set in ["raw_set1.csv", "raw_set2.csv"] {
        ok(&["preprocess", "--in", s(&o.join(set)), "--out", s(o)]);
        fs::remove_file(o.join(set)).unwrap();
    }
    ok(&["train", "--in", s(&o.join("features_set1.csv")), "--out", s(o)]);
    ok(&["predict", "--model", s(&o.join("model.itgp")), "--in", s(&o.join("features_set2.csv")), "--out", s(o)]);
    let stdout = ok(&["evaluate", "--in", s(&o.join("predictions.csv")), "--out", s(o)]);
    let nrmse: f64 = stdout
        .split_whitespace()
        .skip_while(|w| *w != "NRMSE")
        .nth(1)
        .and_then(|v| v.parse().ok())
        .expect("NRMSE printed");
    assert!(nrmse <= 12.0, "end-to-end NRMSE {nrmse}%");
    let plot = fs::read_to_string(o.join("plot_data.csv")).unwrap();
    assert_eq!(plot.lines().count() - 1, 3552);
}
