use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dipca(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dipca"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_instance(dir: &Path, sigma: &str) {
    let out = dipca(
        dir,
        &["gen", "--m", "8", "--n", "200", "--lags", "3", "--sigma", sigma, "--seed", "5",
          "-o", "data.csv", "--truth", "truth.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fit_writes_model_and_exits_zero() {
    let tmp = TempDir::new().unwrap();
    small_instance(tmp.path(), "1");
    let out = dipca(
        tmp.path(),
        &["fit", "--algo", "II", "--lags", "3", "--tol", "1e-6", "data.csv", "-o", "model.json"],
    );
    assert_eq!(code(&out), 0);
    let model = read_json(tmp.path().join("model.json"));
    for key in [
        "algorithm", "m", "n", "s", "w", "beta", "lambda", "residual_inf", "converged",
        "iterations", "wall_time_s", "lambda_history",
    ] {
        assert!(model.get(key).is_some(), "missing {key}");
    }
    assert_eq!(model["m"], 8);
    assert_eq!(model["s"], 3);
    assert_eq!(model["n"], 200);
    assert_eq!(model["converged"], true);
    assert!(model["residual_inf"].as_f64().unwrap() < 1e-6);
}

#[test]
fn fit_is_idempotent_apart_from_timing() {
    let tmp = TempDir::new().unwrap();
    small_instance(tmp.path(), "1");
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("wall_time_s");
        v
    };
    dipca(tmp.path(), &["fit", "--lags", "3", "data.csv", "-o", "a.json"]);
    dipca(tmp.path(), &["fit", "--lags", "3", "data.csv", "-o", "b.json"]);
    assert_eq!(
        strip(read_json(tmp.path().join("a.json"))),
        strip(read_json(tmp.path().join("b.json")))
    );
}

#[test]
fn input_errors_exit_one_without_output() {
    let tmp = TempDir::new().unwrap();
    let out = dipca(tmp.path(), &["fit", "missing.csv", "-o", "model.json"]);
    assert_eq!(code(&out), 1);
    assert!(!tmp.path().join("model.json").exists());

    std::fs::write(tmp.path().join("bad.csv"), "1,2\n3,4\n5,oops\n7,8\n").unwrap();
    let out = dipca(tmp.path(), &["fit", "--lags", "1", "bad.csv", "-o", "model.json"]);
    assert_eq!(code(&out), 1);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3"), "{msg}");
    assert!(!tmp.path().join("model.json").exists());

    let out = dipca(tmp.path(), &["fit", "--algo", "7", "bad.csv"]);
    assert_eq!(code(&out), 1);
    let out = dipca(tmp.path(), &["fit", "--tol", "-1", "bad.csv"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn all_zero_data_reports_degenerate_direction() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("zero.csv"), "0,0,0\n".repeat(12)).unwrap();
    let out = dipca(tmp.path(), &["fit", "--lags", "2", "zero.csv", "-o", "model.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate direction"));
    let model = read_json(tmp.path().join("model.json"));
    assert_eq!(model["converged"], false);
    assert_eq!(model["diagnostic"]["code"], "degenerate-direction");
}

#[test]
fn check_exit_codes() {
    let tmp = TempDir::new().unwrap();
    small_instance(tmp.path(), "0");

    // planted noiseless optimum
    let out = dipca(tmp.path(), &["check", "--model", "truth.json", "data.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let verdict: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["is_max"], true);
    assert_eq!(verdict["fraction_negative"], 1.0);
    assert_eq!(verdict["inertia"]["n_plus"], 2);
    assert_eq!(verdict["inertia"]["n_minus"], 8 + 3);
    assert_eq!(verdict["inertia"]["n_zero"], 0);
    assert!(verdict["max_reduced_eigenvalue"].as_f64().unwrap() < 0.0);

    // flipping β turns the maximum into a stationary minimum
    let mut model = read_json(tmp.path().join("truth.json"));
    for b in model["beta"].as_array_mut().unwrap() {
        *b = Value::from(-b.as_f64().unwrap());
    }
    std::fs::write(tmp.path().join("flipped.json"), model.to_string()).unwrap();
    let out = dipca(tmp.path(), &["check", "--model", "flipped.json", "data.csv"]);
    assert_eq!(code(&out), 3);
    let verdict: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["is_max"], false);
    assert_eq!(verdict["fraction_negative"], 0.0);

    // a unit w away from the optimum is not stationary
    let mut model = read_json(tmp.path().join("truth.json"));
    let w: Vec<f64> = model["w"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let mut p: Vec<f64> = w.iter().enumerate().map(|(i, v)| v + 0.2 * ((i % 3) as f64 - 1.0)).collect();
    let nrm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    p.iter_mut().for_each(|v| *v /= nrm);
    model["w"] = Value::from(p);
    std::fs::write(tmp.path().join("perturbed.json"), model.to_string()).unwrap();
    let out = dipca(tmp.path(), &["check", "--model", "perturbed.json", "data.csv"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a fixed point"));
}

#[test]
fn check_accepts_fitted_model_on_centered_data() {
    let tmp = TempDir::new().unwrap();
    small_instance(tmp.path(), "0");
    let out = dipca(tmp.path(), &["fit", "--lags", "3", "data.csv", "-o", "model.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(tmp.path().join("model.json"))["centered"], true);
    let out = dipca(tmp.path(), &["check", "--model", "model.json", "data.csv"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn extract_full_rank_reconstructs() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<String> = (0..30)
        .map(|i| {
            (0..8)
                .map(|j| format!("{}", ((i * 7 + j * 13) % 17) as f64 / 5.0 - 1.3 + (i * j) as f64 * 0.01))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    let header = (1..=8).map(|j| format!("c{j}")).collect::<Vec<_>>().join(",");
    std::fs::write(tmp.path().join("x.csv"), format!("{header}\n{}\n", rows.join("\n"))).unwrap();
    let out = dipca(
        tmp.path(),
        &["extract", "--header", "--lags", "2", "--components", "8", "x.csv", "-o", "m.json",
          "--scores", "t.csv"],
    );
    assert!(code(&out) == 0 || code(&out) == 2);
    let msg = String::from_utf8_lossy(&out.stderr).to_string();
    let err: f64 = msg
        .lines()
        .find(|l| l.starts_with("reconstruction relative error"))
        .and_then(|l| l.rsplit(": ").next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 1e-6, "{msg}");
    let scores = std::fs::read_to_string(tmp.path().join("t.csv")).unwrap();
    assert_eq!(scores.lines().count(), 31);
    assert_eq!(scores.lines().next().unwrap().split(',').count(), 8);
    let model = read_json(tmp.path().join("m.json"));
    assert_eq!(model["components"].as_array().unwrap().len(), 8);
}

#[test]
fn extract_one_component_matches_fit() {
    let tmp = TempDir::new().unwrap();
    small_instance(tmp.path(), "1");
    dipca(tmp.path(), &["fit", "--lags", "3", "data.csv", "-o", "fit.json"]);
    let out = dipca(
        tmp.path(),
        &["extract", "--lags", "3", "--components", "1", "data.csv", "-o", "ext.json"],
    );
    assert_eq!(code(&out), 0);
    let fit = read_json(tmp.path().join("fit.json"));
    let ext = read_json(tmp.path().join("ext.json"));
    let a = fit["w"].as_array().unwrap();
    let b = ext["components"][0]["w"].as_array().unwrap();
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x.as_f64().unwrap() * y.as_f64().unwrap()).sum();
    assert!((dot.abs() - 1.0).abs() < 1e-9, "{dot}");
}

#[test]
fn extract_rejects_invalid_component_count() {
    let tmp = TempDir::new().unwrap();
    small_instance(tmp.path(), "1");
    for k in ["0", "9"] {
        let out = dipca(tmp.path(), &["extract", "--lags", "3", "--components", k, "data.csv"]);
        assert_eq!(code(&out), 1, "k = {k}");
    }
}

#[test]
fn gen_is_deterministic_and_honours_header() {
    let tmp = TempDir::new().unwrap();
    let args = ["gen", "--m", "4", "--n", "20", "--lags", "2", "--seed", "9"];
    let a = dipca(tmp.path(), &args);
    let b = dipca(tmp.path(), &args);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 22);
    let with_header = dipca(tmp.path(), &[&args[..], &["--header"]].concat());
    let text = String::from_utf8(with_header.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x1,x2,x3,x4");
}

#[test]
fn gen_large_shape_preset() {
    let tmp = TempDir::new().unwrap();
    let out = dipca(tmp.path(), &["gen", "--preset", "paper-shape", "-o", "big.csv"]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(tmp.path().join("big.csv")).unwrap();
    assert_eq!(text.lines().count(), 75);
    assert!(text.lines().all(|l| l.split(',').count() == 5106));
}

#[test]
fn unknown_preset_exits_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&dipca(tmp.path(), &["gen", "--preset", "nope", "-o", "x.csv"])), 1);
    assert_eq!(code(&dipca(tmp.path(), &["bench", "--preset", "nope", "-o", "r.csv"])), 1);
    assert!(!tmp.path().join("x.csv").exists());
    assert!(!tmp.path().join("r.csv").exists());
}

#[test]
fn bench_default_sweep_writes_forty_rows() {
    let tmp = TempDir::new().unwrap();
    let out = dipca(tmp.path(), &["bench", "-o", "report.csv", "--summary", "summary.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance_id,algorithm,m,n,s,sigma,seed,objective,wall_time_s,iterations,converged,fraction_negative"
    );
    assert_eq!(lines.count(), 40);
    let summary = read_json(tmp.path().join("summary.json"));
    assert_eq!(summary["records"].as_array().unwrap().len(), 40);
    assert_eq!(summary["curves"].as_array().unwrap().len(), 2);
}
