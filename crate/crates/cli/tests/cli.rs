//! End-to-end tests of the `ptcure` binary: exit codes, output files,
//! determinism, and provenance round trips.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ptcure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptcure"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ptcure_cli_{tag}_{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    dir
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/lung_tumor.csv")
}

fn write(path: &Path, content: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, content).unwrap();
}

fn simulate_config() -> String {
    r#"
[scenario]
n = 200
theta_true = [0.6, -0.5, 0.7]
seed = 4242
rep_index = 0

[scenario.gompertz]
shape = 0.5
rate = 1.1

[scenario.scheme.fixed]
knots = [0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.1, 2.4, 2.7, 3.0]
"#
    .to_string()
}

#[test]
fn simulate_writes_deterministic_dataset_with_provenance() {
    let dir = temp_dir("simulate");
    let config = dir.join("sim.toml");
    write(&config, &simulate_config());

    let out1 = dir.join("a");
    let status = ptcure(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{status:?}");
    let file1 = fs::read_to_string(out1.join("dataset.csv")).unwrap();

    // 200 rows, all monitoring times on the ten knots
    let rows: Vec<&str> = file1
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("time"))
        .collect();
    assert_eq!(rows.len(), 200);
    let knots = [
        "0.3", "0.6", "0.9", "1.2", "1.5", "1.8", "2.1", "2.4", "2.7", "3",
    ];
    for row in &rows {
        let t = row.split(',').next().unwrap();
        assert!(knots.contains(&t), "unexpected monitoring time {t}");
    }
    assert!(file1.contains("# seed: 4242"));
    assert!(file1.contains("# config_hash:"));

    // byte-identical on rerun
    let out2 = dir.join("b");
    let status = ptcure(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let file2 = fs::read_to_string(out2.join("dataset.csv")).unwrap();
    assert_eq!(file1, file2);

    // provenance header round-trips through the loader
    let schema = ptcure::data::ColumnMap {
        time_col: "time".into(),
        status_col: "status".into(),
        covariate_cols: vec!["x1".into(), "x2".into()],
    };
    let data: ptcure::Dataset =
        ptcure::data::load_dataset(&out1.join("dataset.csv"), &schema).unwrap();
    assert_eq!(data.n(), 200);
    assert_eq!(data.grid().n0(), 10);
    fs::remove_dir_all(&dir).ok();
}

fn fit_config(data_path: &Path, iterations: usize, chains: usize) -> String {
    format!(
        r#"
[data]
path = "{}"
time_col = "time"
status_col = "status"
covariate_cols = ["env"]

[prior]
theta_mean = [-0.27, 0.81]
theta_var = [0.0001, 0.0001]
eta_mean = [-2.2503673273124454, -3.0202265403428368, -2.3313575953777903, -3.3140757960466614, -2.138911027843165, -1.1022172737576974, -1.7019833552815005, -1.3519528534269913, -3.6762472579541803, -0.5313912117090348, 0.0940478276166991]

[prior.eta_cov]
ar1 = {{ scale = 0.1, rho = 0.3 }}

[sampler]
iterations = {iterations}
burn_in = {}
thin = 5
adapt_interval = 200
seed = 7
n_chains = {chains}

[report]
profiles = [[0.0], [1.0]]
functional_mean = true
"#,
        data_path.display(),
        iterations / 4,
    )
}

#[test]
fn fit_produces_complete_output_set() {
    let dir = temp_dir("fit");
    let config = dir.join("fit.toml");
    write(&config, &fit_config(&fixture_path(), 3000, 2));
    let out = dir.join("out");
    let status = ptcure(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    for file in [
        "summary.json",
        "chain_0.tsv",
        "chain_1.tsv",
        "trace.tsv",
        "histograms.tsv",
        "acf.tsv",
        "scaled_cpo.tsv",
        "npmle.tsv",
        "report.txt",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["config_hash"].is_string());
    assert_eq!(
        summary["summary"]["theta_mean"].as_array().unwrap().len(),
        2
    );
    assert!(
        summary["diagnostics"]["psrf"].is_array(),
        "two chains give a PSRF"
    );
    assert_eq!(summary["cure"].as_array().unwrap().len(), 2);
    assert!(summary["cure"][0]["functional_mean"].is_number());
    assert!(summary["functional_mean_baseline_cdf"].is_array());

    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("# config_hash:"));
    assert!(report.contains("theta_0"));
    assert!(report.contains("Cure fraction"));
    assert!(report.contains("LPML"));

    // chain export is deterministic under a rerun
    let chain1 = fs::read_to_string(out.join("chain_0.tsv")).unwrap();
    let out2 = dir.join("out2");
    let status = ptcure(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let chain2 = fs::read_to_string(out2.join("chain_0.tsv")).unwrap();
    assert_eq!(chain1, chain2);

    // diagnose can rebuild diagnostics from the exported chains
    let diag_config = dir.join("diag.toml");
    write(
        &diag_config,
        &format!(
            "[diagnose]\nchains = [\"{}\", \"{}\"]\nmax_lag = 20\n",
            out.join("chain_0.tsv").display(),
            out.join("chain_1.tsv").display()
        ),
    );
    let diag_out = dir.join("diag");
    let status = ptcure(&[
        "diagnose",
        "--config",
        diag_config.to_str().unwrap(),
        "--out",
        diag_out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(diag_out.join("diagnostics.json")).unwrap())
            .unwrap();
    assert!(diag["diagnostics"]["psrf"].is_array());
    assert!(diag_out.join("acf.tsv").exists());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_data_file_exits_one_without_partial_outputs() {
    let dir = temp_dir("missing");
    let config = dir.join("fit.toml");
    write(
        &config,
        &fit_config(Path::new("/nonexistent/data.csv"), 1000, 1),
    );
    let out = dir.join("out");
    let status = ptcure(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(1));
    assert!(!out.exists(), "no partial outputs may be written");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_config_exits_one() {
    let dir = temp_dir("badcfg");
    let config = dir.join("fit.toml");
    write(&config, "[data]\nnot_a_key = 1\n");
    let status = ptcure(&["fit", "--config", config.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(1));

    // chains override propagates validation too
    let config2 = dir.join("sim.toml");
    write(&config2, "[scenario]\nn = 0\ntheta_true = [0.0, 0.0, 0.0]\nseed = 1\ngompertz = { shape = 0.5, rate = 1.1 }\nscheme = { fixed = { knots = [1.0] } }\n");
    let status = ptcure(&["simulate", "--config", config2.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(1));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn study_smoke_run_writes_tables() {
    let dir = temp_dir("study");
    let config = dir.join("study.toml");
    write(
        &config,
        r#"
[study]
n = 60
theta_true = [0.6, -0.5, 0.7]
replicates = 2
seed = 99
workers = 2

[study.gompertz]
shape = 0.5
rate = 1.1

[study.scheme.fixed]
knots = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]

[study.sampler]
iterations = 1200
burn_in = 400
thin = 4
adapt_interval = 100

[study.prior]
theta_mean = [1.0, 1.0, 1.0]
theta_var = [100.0, 100.0, 100.0]
eta_rho = 0.3
eta_scale = 1.0
eta_mean = "true_baseline"
"#,
    );
    let out = dir.join("out");
    let status = ptcure(&[
        "study",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let table = fs::read_to_string(out.join("study.tsv")).unwrap();
    assert!(table.contains("abs_bias"));
    assert!(table.contains("max_mse"));
    let raw = fs::read_to_string(out.join("replicates.tsv")).unwrap();
    assert_eq!(raw.lines().filter(|l| !l.starts_with('#')).count(), 3); // header + 2 reps
    assert!(out.join("study.json").exists());
    fs::remove_dir_all(&dir).ok();
}
