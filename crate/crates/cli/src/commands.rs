//! Command implementations. Each command validates its configuration and
//! inputs fully before creating any output, then writes every artifact from
//! a single thread at the end of the unit of work.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use ptcure::checking::{check_report, scaled_cpo_table, CheckReport};
use ptcure::data::{load_dataset, npmle_survival, npmle_table};
use ptcure::diagnostics::{diagnostics_report, histogram_table, trace_table, DiagnosticsReport};
use ptcure::linalg::Matrix;
use ptcure::model::PriorSpec;
use ptcure::sampler::{run_chains, PosteriorChain, SamplerConfig};
use ptcure::simulation::{elicit_mu, generate_dataset, replication_study, study_table};
use ptcure::summary::{
    estimate_cure, estimate_survival_curve, functional_mean_baseline_cdf, functional_mean_cure,
    pool_chains, summarize, FitSummary,
};
use ptcure::{Chain, Dataset};

use crate::config::{
    config_hash, read_toml, DiagnoseFile, FitFile, MuSection, SimulateFile, StudyFile,
};
use crate::{CliError, RunArgs};

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", dir.display())))
}

fn with_intercept(profile: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(profile.len() + 1);
    x.push(1.0);
    x.extend_from_slice(profile);
    x
}

#[derive(Serialize)]
struct CureEstimate {
    profile: Vec<f64>,
    estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    functional_mean: Option<f64>,
}

#[derive(Serialize)]
struct SurvivalCurve {
    profile: Vec<f64>,
    knots: Vec<f64>,
    survival: Vec<f64>,
}

#[derive(Serialize)]
struct FitOutput {
    config_hash: String,
    summary: FitSummary<f64>,
    cure: Vec<CureEstimate>,
    survival_curves: Vec<SurvivalCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    functional_mean_baseline_cdf: Option<Vec<f64>>,
    checking: CheckReport<f64>,
    diagnostics: DiagnosticsReport<f64>,
}

pub fn fit(args: &RunArgs) -> Result<(), CliError> {
    let mut file: FitFile = read_toml(&args.config)?;
    if let Some(chains) = args.chains {
        file.sampler.n_chains = chains;
    }
    if let Some(seed) = args.seed {
        file.sampler.seed = seed;
    }
    file.sampler.validate()?;
    if !(file.report.level > 0.0 && file.report.level < 1.0) {
        return Err(CliError::validation("report.level must lie in (0, 1)"));
    }
    let hash = config_hash(&file);

    // resolve data relative to the config file's directory when not absolute
    let data_path = resolve_path(&args.config, &file.data.path);
    let data: Dataset = load_dataset(&data_path, &file.data.column_map())?;

    let prior = build_prior(&file, &data)?;
    let chains = run_chains(&data, &prior, &file.sampler)?;
    let pooled = pool_chains(&chains)?;
    let summary = summarize(&chains, data.grid(), file.report.level)?;
    let checking = check_report(&pooled, &data)?;
    let diagnostics = diagnostics_report(&chains, file.report.max_lag)?;

    let mut cure = Vec::new();
    let mut survival_curves = Vec::new();
    for profile in &file.report.profiles {
        let x = with_intercept(profile);
        cure.push(CureEstimate {
            profile: profile.clone(),
            estimate: estimate_cure(&summary.theta_mean, &x)?,
            functional_mean: if file.report.functional_mean {
                Some(functional_mean_cure(&pooled, &x)?)
            } else {
                None
            },
        });
        survival_curves.push(SurvivalCurve {
            profile: profile.clone(),
            knots: data.grid().knots().to_vec(),
            survival: estimate_survival_curve(
                &summary.theta_mean,
                &summary.eta_mean,
                data.grid(),
                &x,
            )?,
        });
    }
    let functional_cdf = if file.report.functional_mean {
        Some(functional_mean_baseline_cdf(&pooled, data.grid())?)
    } else {
        None
    };

    // all computation done; now write outputs
    ensure_dir(&args.out)?;
    let output = FitOutput {
        config_hash: hash.clone(),
        summary,
        cure,
        survival_curves,
        functional_mean_baseline_cdf: functional_cdf,
        checking,
        diagnostics,
    };
    let json = serde_json::to_string_pretty(&output)
        .map_err(|e| CliError::numerical(format!("serialization failed: {e}")))?;
    write_file(&args.out.join("summary.json"), &json)?;

    for chain in &chains {
        let mut text = format!("# config_hash: {hash}\n");
        text.push_str(&chain.to_delimited());
        write_file(
            &args.out.join(format!("chain_{}.tsv", chain.chain_id())),
            &text,
        )?;
    }
    let mut trace_text = format!("# config_hash: {hash}\n");
    trace_text.push_str(&trace_table(&chains[0]));
    write_file(&args.out.join("trace.tsv"), &trace_text)?;
    let mut hist_text = format!("# config_hash: {hash}\n");
    hist_text.push_str(&histogram_table(&chains[0]));
    write_file(&args.out.join("histograms.tsv"), &hist_text)?;

    let mut acf_text = format!("# config_hash: {hash}\nparameter\tlag\tacf\n");
    for (j, name) in output.diagnostics.parameter_names.iter().enumerate() {
        for (lag, v) in output.diagnostics.acf[j].iter().enumerate() {
            let _ = writeln!(acf_text, "{name}\t{lag}\t{v}");
        }
    }
    write_file(&args.out.join("acf.tsv"), &acf_text)?;

    let mut cpo_text = format!("# config_hash: {hash}\n");
    cpo_text.push_str(&scaled_cpo_table(&output.checking.scaled_cpo, &data));
    write_file(&args.out.join("scaled_cpo.tsv"), &cpo_text)?;

    let survival = npmle_survival(&data)?;
    let mut npmle_text = format!("# config_hash: {hash}\n");
    npmle_text.push_str(&npmle_table(data.grid(), &survival));
    write_file(&args.out.join("npmle.tsv"), &npmle_text)?;

    write_file(
        &args.out.join("report.txt"),
        &text_report(&output, &data, &hash),
    )?;
    println!(
        "fit complete: {} chains, {} retained draws, outputs in {}",
        chains.len(),
        output.summary.m0,
        args.out.display()
    );
    Ok(())
}

fn resolve_path(config: &Path, data_path: &str) -> PathBuf {
    let p = Path::new(data_path);
    if p.is_absolute() || p.exists() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn build_prior(file: &FitFile, data: &Dataset) -> Result<PriorSpec<f64>, CliError> {
    let n0 = data.grid().n0();
    let mu = match &file.prior.eta_mean {
        MuSection::Values(values) => {
            if values.len() != n0 {
                return Err(CliError::validation(format!(
                    "prior.eta_mean has {} entries but the grid has {} knots",
                    values.len(),
                    n0
                )));
            }
            values.clone()
        }
        MuSection::Mode(mode) if mode == "npmle" => {
            let survival = npmle_survival(data)?;
            elicit_mu(&survival).map_err(|e| {
                CliError::validation(format!(
                    "NPMLE-based eta prior failed ({e}); supply prior.eta_mean explicitly"
                ))
            })?
        }
        MuSection::Mode(other) => {
            return Err(CliError::validation(format!(
                "unknown prior.eta_mean mode '{other}' (expected \"npmle\" or a list of values)"
            )))
        }
    };
    let expected = data.n_covariates();
    if file.prior.theta_mean.len() != expected {
        return Err(CliError::validation(format!(
            "prior.theta_mean has {} entries but the data has {} coefficients \
             (intercept + covariates)",
            file.prior.theta_mean.len(),
            expected
        )));
    }
    Ok(PriorSpec::new(
        file.prior.theta_mean.clone(),
        file.prior.theta_var.clone(),
        mu,
        file.prior.eta_cov.to_model()?,
    )?)
}

fn text_report(output: &FitOutput, data: &Dataset, hash: &str) -> String {
    let s = &output.summary;
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash: {hash}");
    let _ = writeln!(
        out,
        "Posterior summary ({}% BCI, m0 = {} retained draws, acceptance rate {:.4})",
        s.level * 100.0,
        s.m0,
        s.acceptance_rate
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<12}{:>12}{:>16}{:>26}",
        "Parameter", "Estimate", "Posterior SD", "BCI"
    );
    let names: Vec<String> = (0..s.theta_mean.len())
        .map(|v| format!("theta_{v}"))
        .chain((1..=s.eta_mean.len()).map(|l| format!("eta_{l}")))
        .collect();
    let all_means = s.theta_mean.iter().chain(&s.eta_mean);
    let all_sds = s.theta_sd.iter().chain(&s.eta_sd);
    let all_cis = s.theta_ci.iter().chain(&s.eta_ci);
    for (((name, mean), sd), ci) in names.iter().zip(all_means).zip(all_sds).zip(all_cis) {
        let _ = writeln!(
            out,
            "{:<12}{:>12.4}{:>16.4}{:>26}",
            name,
            mean,
            sd,
            format!("({:.4}, {:.4})", ci.lower, ci.upper)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Cure fraction by covariate profile");
    for c in &output.cure {
        let fm = c
            .functional_mean
            .map(|v| format!("  (posterior mean of p: {v:.4})"))
            .unwrap_or_default();
        let _ = writeln!(out, "  x = {:?}: {:.4}{}", c.profile, c.estimate, fm);
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Model checking: LPML = {:.2}, DIC = {:.2} (dbar = {:.2}, dhat = {:.2}, p_D = {:.2})",
        output.checking.lpml,
        output.checking.dic,
        output.checking.dbar,
        output.checking.dhat,
        output.checking.p_d
    );
    let _ = writeln!(
        out,
        "Outliers (scaled CPO < 0.01): {} of {}",
        output.checking.outlier_count,
        data.n()
    );
    if let Some(psrf) = &output.diagnostics.psrf {
        let max = psrf.iter().cloned().fold(f64::MIN, f64::max);
        let _ = writeln!(out, "Max potential scale reduction factor: {max:.4}");
    }
    let _ = writeln!(
        out,
        "Effective sample sizes (theta): {:?}",
        output
            .diagnostics
            .ess
            .iter()
            .take(s.theta_mean.len())
            .map(|v| v.round())
            .collect::<Vec<_>>()
    );
    out
}

pub fn simulate(args: &RunArgs) -> Result<(), CliError> {
    let mut file: SimulateFile = read_toml(&args.config)?;
    if let Some(seed) = args.seed {
        file.scenario.seed = seed;
    }
    let hash = config_hash(&file);
    let s = &file.scenario;
    let scenario = ptcure::simulation::ScenarioConfig {
        n: s.n,
        theta_true: s.theta_true.clone(),
        gompertz: s.gompertz,
        scheme: s.scheme.clone(),
        replicates: 2, // unused by dataset generation
        seed: s.seed,
        sampler: SamplerConfig::default(),
        prior: ptcure::simulation::StudyPrior::vague_default(),
    };
    scenario.scheme.validate()?;
    if scenario.theta_true.len() != 3 {
        return Err(CliError::validation(
            "scenario.theta_true must have three entries (intercept + two covariates)",
        ));
    }
    let data = generate_dataset(&scenario, s.rep_index)?;

    ensure_dir(&args.out)?;
    let mut text = String::new();
    let _ = writeln!(text, "# config_hash: {hash}");
    let _ = writeln!(text, "# seed: {}", s.seed);
    let _ = writeln!(text, "# rep_index: {}", s.rep_index);
    let _ = writeln!(text, "# theta_true: {:?}", s.theta_true);
    let _ = writeln!(text, "# scheme: {}", scheme_label(&s.scheme));
    let _ = writeln!(text, "time,status,x1,x2");
    for obs in data.observations() {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            obs.time,
            u8::from(obs.event),
            obs.covariates[1],
            obs.covariates[2]
        );
    }
    let path = args.out.join("dataset.csv");
    write_file(&path, &text)?;
    println!("wrote {} ({} subjects)", path.display(), data.n());
    Ok(())
}

fn scheme_label(scheme: &ptcure::simulation::MonitoringScheme<f64>) -> String {
    match scheme {
        ptcure::simulation::MonitoringScheme::Fixed { knots } => {
            format!("fixed({} knots)", knots.len())
        }
        ptcure::simulation::MonitoringScheme::Random { count, upper } => {
            format!("random({count} knots on (0, {upper}))")
        }
    }
}

pub fn study(args: &RunArgs) -> Result<(), CliError> {
    let mut file: StudyFile = read_toml(&args.config)?;
    if let Some(seed) = args.seed {
        file.study.scenario.seed = seed;
    }
    let hash = config_hash(&file);
    file.study.scenario.validate()?;

    let report = if file.study.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(file.study.workers)
            .build()
            .map_err(|e| CliError::numerical(format!("worker pool: {e}")))?
            .install(|| replication_study(&file.study.scenario))?
    } else {
        replication_study(&file.study.scenario)?
    };

    ensure_dir(&args.out)?;
    let mut table = format!("# config_hash: {hash}\n");
    table.push_str(&study_table(&report));
    write_file(&args.out.join("study.tsv"), &table)?;

    let mut raw = format!("# config_hash: {hash}\n");
    raw.push_str(
        "rep\ttheta0_mean\ttheta1_mean\ttheta2_mean\ttheta0_sd\ttheta1_sd\ttheta2_sd\tacceptance\n",
    );
    for r in &report.records {
        let _ = writeln!(
            raw,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.rep_index,
            r.theta_mean[0],
            r.theta_mean[1],
            r.theta_mean[2],
            r.theta_sd[0],
            r.theta_sd[1],
            r.theta_sd[2],
            r.acceptance_rate
        );
    }
    write_file(&args.out.join("replicates.tsv"), &raw)?;

    let json = serde_json::to_string_pretty(&serde_json::json!({
        "config_hash": hash,
        "report": &report,
    }))
    .map_err(|e| CliError::numerical(format!("serialization failed: {e}")))?;
    write_file(&args.out.join("study.json"), &json)?;

    println!(
        "study complete: {} replicates used, max MSE {:.4}",
        report.replicates_used, report.max_mse
    );
    if !report.failures.is_empty() {
        return Err(CliError::numerical(format!(
            "{} replicate(s) failed to fit",
            report.failures.len()
        )));
    }
    Ok(())
}

pub fn diagnose(args: &RunArgs) -> Result<(), CliError> {
    let file: DiagnoseFile = read_toml(&args.config)?;
    let hash = config_hash(&file);
    if file.diagnose.chains.is_empty() {
        return Err(CliError::validation(
            "diagnose.chains must list at least one file",
        ));
    }
    let mut chains: Vec<Chain> = Vec::new();
    for path in &file.diagnose.chains {
        chains.push(read_chain(&resolve_path(&args.config, path))?);
    }
    let report = diagnostics_report(&chains, file.diagnose.max_lag)?;

    ensure_dir(&args.out)?;
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "config_hash": hash,
        "diagnostics": &report,
    }))
    .map_err(|e| CliError::numerical(format!("serialization failed: {e}")))?;
    write_file(&args.out.join("diagnostics.json"), &json)?;

    let mut acf_text = format!("# config_hash: {hash}\nparameter\tlag\tacf\n");
    for (j, name) in report.parameter_names.iter().enumerate() {
        for (lag, v) in report.acf[j].iter().enumerate() {
            let _ = writeln!(acf_text, "{name}\t{lag}\t{v}");
        }
    }
    write_file(&args.out.join("acf.tsv"), &acf_text)?;
    println!(
        "diagnostics over {} chain(s) written to {}",
        chains.len(),
        args.out.display()
    );
    Ok(())
}

/// Reads a chain export produced by `fit` (metadata comments, header of
/// parameter names, one row per retained draw).
fn read_chain(path: &Path) -> Result<Chain, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut chain_id = 0u64;
    let mut iterations = 0usize;
    let mut accept_count = 0usize;
    let mut n_theta: Option<usize> = None;
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.splitn(2, ':');
            let key = parts.next().unwrap_or("").trim();
            let value = parts.next().unwrap_or("").trim();
            match key {
                "chain_id" => chain_id = value.parse().unwrap_or(0),
                "iterations" => iterations = value.parse().unwrap_or(0),
                "accept_count" => accept_count = value.parse().unwrap_or(0),
                "n_theta" => n_theta = value.parse().ok(),
                _ => {}
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.split('\t').map(str::to_string).collect());
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split('\t').map(str::parse).collect();
        rows.push(
            row.map_err(|e| {
                CliError::validation(format!("{}: bad draw row: {e}", path.display()))
            })?,
        );
    }
    let header = header
        .ok_or_else(|| CliError::validation(format!("{}: missing header", path.display())))?;
    let n_theta =
        n_theta.unwrap_or_else(|| header.iter().filter(|h| h.starts_with("theta_")).count());
    if rows.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no draws found",
            path.display()
        )));
    }
    let width = header.len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(CliError::validation(format!(
            "{}: ragged draw rows",
            path.display()
        )));
    }
    Ok(PosteriorChain::from_draws(
        Matrix::from_rows(&rows),
        n_theta,
        chain_id,
        accept_count,
        iterations,
    ))
}
