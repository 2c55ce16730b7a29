//! Convergence and mixing diagnostics: autocorrelation, effective sample
//! size, the Gelman-Rubin potential scale reduction factor, and trace /
//! histogram exports.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sampler::PosteriorChain;

/// Sample autocorrelations with the 1/m normalization.
#[derive(Debug, Clone)]
pub struct Acf<R> {
    /// values at lags 0..=max_lag; lag 0 is 1 for any non-constant series
    pub values: Vec<R>,
    pub constant_series: bool,
}

pub fn autocorrelation<R: Real>(series: &[R], max_lag: usize) -> Result<Acf<R>> {
    let m = series.len();
    if max_lag == 0 || m <= max_lag {
        return Err(Error::invalid(
            "series must be longer than max_lag and max_lag at least 1",
        ));
    }
    let mf = R::of(m as f64);
    let mean = series.iter().fold(R::zero(), |a, &b| a + b) / mf;
    let c0 = series
        .iter()
        .fold(R::zero(), |a, &b| a + (b - mean) * (b - mean))
        / mf;
    if !(c0 > R::zero()) {
        let mut values = vec![R::zero(); max_lag + 1];
        values[0] = R::one();
        return Ok(Acf {
            values,
            constant_series: true,
        });
    }
    let mut values = Vec::with_capacity(max_lag + 1);
    values.push(R::one());
    for lag in 1..=max_lag {
        let mut c = R::zero();
        for i in 0..m - lag {
            c = c + (series[i] - mean) * (series[i + lag] - mean);
        }
        values.push(c / mf / c0);
    }
    Ok(Acf {
        values,
        constant_series: false,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct EssEstimate<R> {
    pub ess: R,
    pub constant_series: bool,
}

/// Effective sample size m0 / (1 + 2 sum rho_t), truncating the sum with the
/// initial-positive-sequence rule: lags are consumed in pairs and summation
/// stops at the first pair with a negative sum.
pub fn ess<R: Real>(series: &[R]) -> Result<EssEstimate<R>> {
    let m = series.len();
    if m < 10 {
        return Err(Error::invalid("effective sample size needs >= 10 draws"));
    }
    let mf = R::of(m as f64);
    let mean = series.iter().fold(R::zero(), |a, &b| a + b) / mf;
    let c0 = series
        .iter()
        .fold(R::zero(), |a, &b| a + (b - mean) * (b - mean))
        / mf;
    if !(c0 > R::zero()) {
        return Ok(EssEstimate {
            ess: mf,
            constant_series: true,
        });
    }
    let rho = |lag: usize| -> R {
        let mut c = R::zero();
        for i in 0..m - lag {
            c = c + (series[i] - mean) * (series[i + lag] - mean);
        }
        c / mf / c0
    };
    let mut sum = R::zero();
    let mut lag = 1usize;
    while lag + 1 < m {
        let pair = rho(lag) + rho(lag + 1);
        if !(pair > R::zero()) {
            break;
        }
        sum = sum + pair;
        lag += 2;
    }
    let tau = R::one() + R::of(2.0) * sum;
    Ok(EssEstimate {
        ess: mf / tau,
        constant_series: false,
    })
}

/// Classic potential scale reduction factor over two or more chains of equal
/// retained length: sqrt(Vhat / W) with Vhat = ((m0-1)/m0) W + B/m0, floored
/// at 1 (values below 1 arise only from the finite-sample (m0-1)/m0 factor).
pub fn gelman_rubin<R: Real>(chains: &[&[R]]) -> Result<R> {
    if chains.len() < 2 {
        return Err(Error::SingleChain);
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 10 {
        return Err(Error::invalid(
            "potential scale reduction needs >= 10 draws per chain",
        ));
    }
    let m = chains.len();
    let nf = R::of(n as f64);
    let mut chain_means = Vec::with_capacity(m);
    let mut chain_vars = Vec::with_capacity(m);
    for c in chains {
        let c = &c[..n];
        let mean = c.iter().fold(R::zero(), |a, &b| a + b) / nf;
        let var = c
            .iter()
            .fold(R::zero(), |a, &b| a + (b - mean) * (b - mean))
            / R::of((n - 1) as f64);
        chain_means.push(mean);
        chain_vars.push(var);
    }
    let w = chain_vars.iter().fold(R::zero(), |a, &b| a + b) / R::of(m as f64);
    let grand = chain_means.iter().fold(R::zero(), |a, &b| a + b) / R::of(m as f64);
    let b_over_n = chain_means
        .iter()
        .fold(R::zero(), |a, &mu| a + (mu - grand) * (mu - grand))
        / R::of((m - 1) as f64);
    if !(w > R::zero()) {
        // all chains constant: identical chains converge by definition
        return Ok(R::one());
    }
    let v_hat = (nf - R::one()) / nf * w + b_over_n;
    Ok((v_hat / w).sqrt().max(R::one()))
}

/// Split-chain fallback for a single chain: the two halves are treated as
/// separate chains.
pub fn split_gelman_rubin<R: Real>(series: &[R]) -> Result<R> {
    let n = series.len();
    if n < 20 {
        return Err(Error::invalid("split PSRF needs >= 20 draws"));
    }
    let half = n / 2;
    gelman_rubin(&[&series[..half], &series[n - half..]])
}

/// Fixed-width histogram over the sample range.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram<R> {
    pub edges: Vec<R>,
    pub counts: Vec<usize>,
}

pub fn histogram<R: Real>(series: &[R], bins: usize) -> Histogram<R> {
    assert!(bins >= 1 && !series.is_empty());
    let min = series.iter().fold(R::infinity(), |a, &b| a.min(b));
    let max = series.iter().fold(R::neg_infinity(), |a, &b| a.max(b));
    let mut edges = Vec::with_capacity(bins + 1);
    let width = (max - min) / R::of(bins as f64);
    for i in 0..=bins {
        edges.push(min + R::of(i as f64) * width);
    }
    let mut counts = vec![0usize; bins];
    for &v in series {
        let idx = if width > R::zero() {
            let raw = ((v - min) / width).to_f64_lossy().floor() as usize;
            raw.min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}

/// Per-parameter convergence report (pooled across chains where sensible).
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport<R> {
    pub parameter_names: Vec<String>,
    /// autocorrelations per parameter, lags 0..=max_lag, first chain
    pub acf: Vec<Vec<R>>,
    /// effective sample size per parameter, summed over chains
    pub ess: Vec<R>,
    /// potential scale reduction per parameter (two or more chains)
    pub psrf: Option<Vec<R>>,
    pub acceptance_rate: f64,
    pub seconds_per_iteration: f64,
}

pub fn diagnostics_report<R: Real>(
    chains: &[PosteriorChain<R>],
    max_lag: usize,
) -> Result<DiagnosticsReport<R>> {
    let first = chains.first().ok_or(Error::EmptyChain)?;
    let d = first.dim();
    let names = first.param_names();
    let lag = max_lag.min(first.m0().saturating_sub(1)).max(1);
    let mut acf = Vec::with_capacity(d);
    let mut ess_totals = Vec::with_capacity(d);
    for j in 0..d {
        acf.push(autocorrelation(&first.draws().column(j), lag)?.values);
        let mut total = R::zero();
        for c in chains {
            total = total + ess(&c.draws().column(j))?.ess;
        }
        ess_totals.push(total);
    }
    let psrf = if chains.len() >= 2 {
        let mut values = Vec::with_capacity(d);
        for j in 0..d {
            let columns: Vec<Vec<R>> = chains.iter().map(|c| c.draws().column(j)).collect();
            let views: Vec<&[R]> = columns.iter().map(Vec::as_slice).collect();
            values.push(gelman_rubin(&views)?);
        }
        Some(values)
    } else {
        None
    };
    let total_iters: usize = chains.iter().map(PosteriorChain::iterations).sum();
    let total_accepts: usize = chains.iter().map(PosteriorChain::accept_count).sum();
    let total_seconds: f64 = chains.iter().map(PosteriorChain::sampling_seconds).sum();
    Ok(DiagnosticsReport {
        parameter_names: names,
        acf,
        ess: ess_totals,
        psrf,
        acceptance_rate: if total_iters == 0 {
            0.0
        } else {
            total_accepts as f64 / total_iters as f64
        },
        seconds_per_iteration: if total_iters == 0 {
            0.0
        } else {
            total_seconds / total_iters as f64
        },
    })
}

/// (iteration, value-per-parameter) rows for the retained draws.
pub fn trace_table<R: Real>(chain: &PosteriorChain<R>) -> String {
    let names = chain.param_names();
    let mut trace = String::new();
    trace.push_str(&format!("iteration\t{}\n", names.join("\t")));
    let cfg = chain.config();
    for i in 0..chain.m0() {
        let iteration = cfg.burn_in + (i + 1) * cfg.thin;
        let row: Vec<String> = chain
            .draws()
            .row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        trace.push_str(&format!("{}\t{}\n", iteration, row.join("\t")));
    }
    trace
}

/// 50-bin histogram rows per parameter.
pub fn histogram_table<R: Real>(chain: &PosteriorChain<R>) -> String {
    let mut hist = String::from("parameter\tbin_lower\tbin_upper\tcount\n");
    for (j, name) in chain.param_names().iter().enumerate() {
        let h = histogram(&chain.draws().column(j), 50);
        for (b, &count) in h.counts.iter().enumerate() {
            hist.push_str(&format!(
                "{name}\t{}\t{}\t{count}\n",
                h.edges[b],
                h.edges[b + 1]
            ));
        }
    }
    hist
}

/// Writes the retained draws as (iteration, value-per-parameter) rows and a
/// 50-bin histogram table alongside.
pub fn export_trace<R: Real>(
    chain: &PosteriorChain<R>,
    trace_path: &Path,
    histogram_path: &Path,
) -> Result<()> {
    let io_err = |path: &Path, source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(trace_path).map_err(|e| io_err(trace_path, e))?;
    f.write_all(trace_table(chain).as_bytes())
        .map_err(|e| io_err(trace_path, e))?;
    let mut f = std::fs::File::create(histogram_path).map_err(|e| io_err(histogram_path, e))?;
    f.write_all(histogram_table(chain).as_bytes())
        .map_err(|e| io_err(histogram_path, e))?;
    Ok(())
}
