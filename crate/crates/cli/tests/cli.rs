use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rff_dokl_cli::{ExperimentConfig, RunSettings, SUMMARY_HEADER};

const SMALL: &str = "\
name = small
learner = dklms
graph = random
graph.k = 3
graph.p_attach = 0.5
sigma = 1
features = 20
mu = 0.5
data = kernel_expansion
data.n_per_node = 300
data.d = 2
data.m = 4
data.sigma_x = 1
data.sigma_eta = 0.1
data.coeff_std = 1
realizations = 3
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rffdokl"))
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_small(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let cfg = write_config(dir, "small.conf", SMALL);
    let out = dir.join(out);
    bin().arg("run").arg(&cfg).arg("--out").arg(&out).args(extra).output().unwrap()
}

#[test]
fn list_prints_bundled_experiments_sorted() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    for expected in ["banana5", "banana20", "example1", "example8", "waveform20", "stability_demo"] {
        assert!(names.contains(&expected), "missing {expected}");
    }
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn run_writes_traces_and_a_reproducible_summary() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_small(dir.path(), "a", &[]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let summary = fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some(SUMMARY_HEADER));
    assert_eq!(String::from_utf8(first.stdout).unwrap(), summary);
    assert!(summary.lines().skip(1).all(|l| l.starts_with("small,dklms,3,20,3,")));
    assert!(summary.contains(",steady_mse,"));
    for r in 0..3 {
        let trace = fs::read_to_string(dir.path().join(format!("a/trace_r{r}.csv"))).unwrap();
        assert!(trace.starts_with("iteration,network_mse,network_mse_db,disagreement,test_error,regret"));
        assert!(trace.lines().count() > 2);
    }

    let second = run_small(dir.path(), "b", &[]);
    assert!(second.status.success());
    assert_eq!(fs::read(dir.path().join("a/summary.csv")).unwrap(), fs::read(dir.path().join("b/summary.csv")).unwrap());

    let reseeded = run_small(dir.path(), "c", &["--seed", "99"]);
    assert!(reseeded.status.success());
    assert_ne!(summary, fs::read_to_string(dir.path().join("c/summary.csv")).unwrap());
}

#[test]
fn realizations_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), "r", &["--realizations", "2"]);
    assert!(out.status.success());
    let summary = fs::read_to_string(dir.path().join("r/summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.starts_with("small,dklms,3,20,2,")));
    assert!(dir.path().join("r/trace_r1.csv").exists());
    assert!(!dir.path().join("r/trace_r2.csv").exists());

    let zero = run_small(dir.path(), "z", &["--realizations", "0"]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.conf", &format!("{SMALL}data.bogus = 1\n"));
    let out = bin().arg("run").arg(&bad).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data.bogus"));

    let out = bin().args(["run", "no_such_experiment"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().arg("analyze").arg("example1").output().unwrap();
    assert_eq!(out.status.code(), Some(2), "K·D above the analysis limit");
}

#[test]
fn missing_dataset_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "adult5", "--out"])
        .arg(dir.path().join("o"))
        .arg("--data-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn analyze_reports_stability() {
    let out = bin().args(["analyze", "stability_demo"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["experiment=stability_demo", "K=3", "D=8", "mu=0.5", "lambda_min=", "lambda_max="] {
        assert!(text.lines().any(|l| l.starts_with(key)), "missing {key} in\n{text}");
    }
}

#[test]
fn extra_epochs_lower_banana_error() {
    let base = "\
name = banana_epochs
learner = pegasos
graph = random
graph.k = 5
graph.p_attach = 0.2
sigma = 0.7
features = 100
lambda = 1/316
data = libsvm
data.path = data/banana.libsvm
data.train_size = 4000
realizations = 3
";
    let settings = RunSettings { out: None, data_dir: Some(repo_root()) };
    let error = |epochs: usize| {
        let cfg = ExperimentConfig::parse(&format!("{base}epochs = {epochs}\n")).unwrap();
        rff_dokl_cli::run_experiment(&cfg, &settings).unwrap().mean("test_error").unwrap()
    };
    let (one, five) = (error(1), error(5));
    assert!(five < one, "epochs=5 error {five} vs epochs=1 error {one}");
}
