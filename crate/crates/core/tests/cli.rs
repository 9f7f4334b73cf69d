mod support;

use std::path::Path;
use std::process::{Command, Output};

use mdnc::bundling::{read_curve_csv, BundleSummary};
use mdnc::cli::RunManifest;
use mdnc::mixture::{exp_survival, hypoexp_survival};
use serde_json::Value;

fn mdnc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdnc")).args(args).output().expect("spawn mdnc")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn train_args<'a>(pima: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "train", "--dataset", pima, "--variant", "c1", "--folds", "5", "--seed", "0", "--layers", "1", "--units",
        "5", "--mixtures", "2", "--sparsity", "0", "--epochs", "4", "--out-dir", out,
    ]
}

#[test]
fn train_writes_metrics_models_and_a_reproducible_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let pima = support::pima_path();
    let (pima, first) = (pima.to_str().unwrap(), dir.path().join("a"));
    let out = mdnc(&train_args(pima, first.to_str().unwrap()));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let metrics: Value = serde_json::from_str(&read(&first.join("metrics.json"))).unwrap();
    let acc = &metrics["summary"]["accuracy"];
    assert!(acc["mean"].as_f64().unwrap() > 0.5);
    assert!(acc["std"].as_f64().unwrap() >= 0.0);
    assert_eq!(metrics["averaging"], "weighted");
    assert_eq!(metrics["fold_reports"].as_array().unwrap().len(), 5);
    for i in 0..5 {
        assert!(first.join(format!("models/fold{i}.json")).exists());
    }

    let manifest = RunManifest::load(&first.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "train");
    assert_eq!(manifest.seeds, vec![0]);
    assert_eq!(manifest.dataset_checksums.len(), 1);
    assert!(manifest.outputs.iter().any(|a| a.path == Path::new("metrics.json")));

    let second = dir.path().join("b");
    let manifest_path = first.join("manifest.json");
    let out = mdnc(&["train", "--config", manifest_path.to_str().unwrap(), "--out-dir", second.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&first.join("metrics.json")), read(&second.join("metrics.json")));
    let again = RunManifest::load(&second.join("manifest.json")).unwrap();
    assert_eq!(again.outputs, manifest.outputs);
    assert_eq!(again.config, manifest.config);

    let eval_dir = dir.path().join("eval");
    let out = mdnc(&[
        "evaluate", "--run-dir", first.to_str().unwrap(), "--dataset", pima, "--out-dir", eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let eval: Value = serde_json::from_str(&read(&eval_dir.join("evaluation.json"))).unwrap();
    assert_eq!(eval["folds"].as_array().unwrap().len(), 5);
}

#[test]
fn usage_and_validation_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let pima = support::pima_path();
    let out = mdnc(&["train", "--dataset", pima.to_str().unwrap(), "--variant", "c7", "--out-dir", out_dir]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown variant"));

    assert_eq!(code(&mdnc(&[])), 1);
    assert_eq!(code(&mdnc(&["frobnicate"])), 1);
    assert_eq!(code(&mdnc(&["bundle", "--rate1", "0.02", "--rate2", "0.02", "--out-dir", out_dir])), 1);
    assert_eq!(code(&mdnc(&["bundle", "--rate1", "-1", "--out-dir", out_dir])), 1);
    assert_eq!(code(&mdnc(&["train", "--dataset", "/no/such/file.csv", "--out-dir", out_dir])), 1);
    assert_eq!(code(&mdnc(&["curves", "--run-dir", "/no/such/run", "--out-dir", out_dir])), 1);
    assert_eq!(code(&mdnc(&["--help"])), 0);
}

#[test]
fn numeric_divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let pima = support::pima_path();
    let out = mdnc(&[
        "train", "--dataset", pima.to_str().unwrap(), "--variant", "c1", "--layers", "1", "--units", "5",
        "--mixtures", "1", "--sparsity", "0", "--epochs", "3", "--learning-rate", "1e308", "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn bundle_then_curves() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = Command::new(env!("CARGO_BIN_EXE_mdnc"))
        .args(["bundle", "--n", "3000", "--seeds", "0,1", "--epochs", "3", "--jobs", "2", "--out-dir"])
        .arg(&run)
        .env("MDNC_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["Product-1", "Product-2", "Bundle"] {
        assert!(stdout.contains(name), "{stdout}");
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("INFO"));
    let summary: BundleSummary = serde_json::from_str(&read(&run.join("summary.json"))).unwrap();
    assert_eq!(summary.runs.len(), 2);
    let names: Vec<&str> = summary.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["Product-1", "Product-2", "Bundle"]);

    let curves_dir = dir.path().join("curves");
    let out = mdnc(&["curves", "--run-dir", run.to_str().unwrap(), "--out-dir", curves_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v1 = read_curve_csv(&curves_dir.join("product1_purchase.csv")).unwrap();
    let vb = read_curve_csv(&curves_dir.join("bundle_purchase.csv")).unwrap();
    assert_eq!(v1.prices.len(), 601);
    assert_eq!(v1.prices[0], 0.0);
    assert!(vb.estimated_values[0] > 0.5);
    for (i, &p) in v1.prices.iter().enumerate() {
        assert!((v1.true_values[i] - exp_survival(0.03, p).unwrap()).abs() < 1e-12);
        assert!((vb.true_values[i] - hypoexp_survival(0.03, 0.02, p).unwrap()).abs() < 1e-12);
    }
    assert_eq!(
        read(&curves_dir.join("bundle_purchase.csv")),
        read(&run.join("curves/bundle_purchase.csv"))
    );

    let again = dir.path().join("again");
    let manifest = run.join("manifest.json");
    let out = mdnc(&["bundle", "--config", manifest.to_str().unwrap(), "--out-dir", again.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(read(&run.join("summary.json")), read(&again.join("summary.json")));
}
