//! Plug-in estimators from retained draws: posterior means, percentile
//! credible intervals, the baseline CDF, survival curves, and cure fractions.
//!
//! Point estimates follow the plug-in convention: average the draws first,
//! then transform. The posterior mean of the transformed quantity is offered
//! separately (`functional_*`) for comparison and is off by default in the
//! CLI.

use serde::Serialize;

use crate::data::MonitoringGrid;
use crate::error::{Error, Result};
use crate::model::{cure_fraction, pop_survival, step_cdf, ModelParams};
use crate::real::Real;
use crate::sampler::PosteriorChain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CredibleInterval<R> {
    pub lower: R,
    pub upper: R,
}

/// Posterior summary of one fit (possibly pooled over chains).
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary<R> {
    pub theta_mean: Vec<R>,
    pub theta_sd: Vec<R>,
    pub theta_ci: Vec<CredibleInterval<R>>,
    pub eta_mean: Vec<R>,
    pub eta_sd: Vec<R>,
    pub eta_ci: Vec<CredibleInterval<R>>,
    /// plug-in baseline CDF at the grid knots
    pub baseline_cdf: Vec<R>,
    pub level: f64,
    pub acceptance_rate: f64,
    pub m0: usize,
}

/// Coordinate-wise average of the retained draws, split into (theta, eta).
pub fn posterior_mean<R: Real>(chain: &PosteriorChain<R>) -> Result<(Vec<R>, Vec<R>)> {
    if chain.m0() == 0 {
        return Err(Error::EmptyChain);
    }
    let means = column_means(chain);
    let (t, e) = means.split_at(chain.n_theta());
    Ok((t.to_vec(), e.to_vec()))
}

fn column_means<R: Real>(chain: &PosteriorChain<R>) -> Vec<R> {
    let m = chain.m0();
    let d = chain.dim();
    let mf = R::of(m as f64);
    let mut means = vec![R::zero(); d];
    for i in 0..m {
        for (j, mj) in means.iter_mut().enumerate() {
            *mj = *mj + chain.draws()[(i, j)];
        }
    }
    for mj in &mut means {
        *mj = *mj / mf;
    }
    means
}

fn column_sds<R: Real>(chain: &PosteriorChain<R>, means: &[R]) -> Vec<R> {
    let m = chain.m0();
    if m < 2 {
        return vec![R::zero(); chain.dim()];
    }
    let denom = R::of((m - 1) as f64);
    let mut acc = vec![R::zero(); chain.dim()];
    for i in 0..m {
        for (j, aj) in acc.iter_mut().enumerate() {
            let c = chain.draws()[(i, j)] - means[j];
            *aj = *aj + c * c;
        }
    }
    acc.into_iter().map(|v| (v / denom).sqrt()).collect()
}

/// Empirical quantile with linear interpolation between order statistics
/// (position p*(m-1) on the 0-based sorted sample).
fn quantile<R: Real>(sorted: &[R], p: f64) -> R {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let pos = p * (m - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = R::of(pos - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Equal-tailed percentile interval at the given level.
pub fn percentile_ci<R: Real>(draws: &[R], level: f64) -> Result<CredibleInterval<R>> {
    if draws.is_empty() {
        return Err(Error::EmptyChain);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("credible level must lie in (0, 1)"));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("draws must not contain NaN"));
    let alpha = (1.0 - level) / 2.0;
    Ok(CredibleInterval {
        lower: quantile(&sorted, alpha),
        upper: quantile(&sorted, 1.0 - alpha),
    })
}

/// Plug-in baseline CDF at every grid knot.
pub fn estimate_baseline_cdf<R: Real>(eta_mean: &[R], grid: &MonitoringGrid<R>) -> Vec<R> {
    grid.knots()
        .iter()
        .map(|&t| step_cdf(eta_mean, grid, t))
        .collect()
}

/// Plug-in population survival curve at every grid knot for one covariate
/// profile (x starts with the intercept 1).
pub fn estimate_survival_curve<R: Real>(
    theta_mean: &[R],
    eta_mean: &[R],
    grid: &MonitoringGrid<R>,
    x: &[R],
) -> Result<Vec<R>> {
    let params = ModelParams {
        theta: theta_mean.to_vec(),
        eta: eta_mean.to_vec(),
    };
    grid.knots()
        .iter()
        .map(|&t| pop_survival(&params, grid, x, t))
        .collect()
}

/// Plug-in cure fraction for one covariate profile.
pub fn estimate_cure<R: Real>(theta_mean: &[R], x: &[R]) -> Result<R> {
    cure_fraction(theta_mean, x)
}

/// Posterior mean of the cure fraction across draws (functional mean).
pub fn functional_mean_cure<R: Real>(chain: &PosteriorChain<R>, x: &[R]) -> Result<R> {
    if chain.m0() == 0 {
        return Err(Error::EmptyChain);
    }
    let mut acc = R::zero();
    for i in 0..chain.m0() {
        let p = chain.params_at(i);
        acc = acc + cure_fraction(&p.theta, x)?;
    }
    Ok(acc / R::of(chain.m0() as f64))
}

/// Posterior mean of the baseline CDF at each knot (functional mean).
pub fn functional_mean_baseline_cdf<R: Real>(
    chain: &PosteriorChain<R>,
    grid: &MonitoringGrid<R>,
) -> Result<Vec<R>> {
    if chain.m0() == 0 {
        return Err(Error::EmptyChain);
    }
    let mut acc = vec![R::zero(); grid.n0()];
    for i in 0..chain.m0() {
        let p = chain.params_at(i);
        for (a, &t) in acc.iter_mut().zip(grid.knots()) {
            *a = *a + step_cdf(&p.eta, grid, t);
        }
    }
    let mf = R::of(chain.m0() as f64);
    Ok(acc.into_iter().map(|v| v / mf).collect())
}

/// Pools chains (in chain order) into one summary.
pub fn summarize<R: Real>(
    chains: &[PosteriorChain<R>],
    grid: &MonitoringGrid<R>,
    level: f64,
) -> Result<FitSummary<R>> {
    let pooled = pool_chains(chains)?;
    let means = column_means(&pooled);
    let sds = column_sds(&pooled, &means);
    let n_theta = pooled.n_theta();
    let mut cis = Vec::with_capacity(pooled.dim());
    for j in 0..pooled.dim() {
        cis.push(percentile_ci(&pooled.draws().column(j), level)?);
    }
    let (theta_mean, eta_mean) = means.split_at(n_theta);
    let (theta_sd, eta_sd) = sds.split_at(n_theta);
    let (theta_ci, eta_ci) = cis.split_at(n_theta);
    Ok(FitSummary {
        theta_mean: theta_mean.to_vec(),
        theta_sd: theta_sd.to_vec(),
        theta_ci: theta_ci.to_vec(),
        eta_mean: eta_mean.to_vec(),
        eta_sd: eta_sd.to_vec(),
        eta_ci: eta_ci.to_vec(),
        baseline_cdf: estimate_baseline_cdf(eta_mean, grid),
        level,
        acceptance_rate: pooled.acceptance_rate(),
        m0: pooled.m0(),
    })
}

/// Concatenates retained draws across chains; acceptance bookkeeping is the
/// total over chains.
pub fn pool_chains<R: Real>(chains: &[PosteriorChain<R>]) -> Result<PosteriorChain<R>> {
    let first = chains.first().ok_or(Error::EmptyChain)?;
    if chains.len() == 1 {
        return Ok(first.clone());
    }
    let mut draws =
        crate::linalg::Matrix::with_row_capacity(chains.iter().map(|c| c.m0()).sum(), first.dim());
    let mut accepts = 0;
    let mut iters = 0;
    for c in chains {
        if c.dim() != first.dim() || c.n_theta() != first.n_theta() {
            return Err(Error::Dimension {
                what: "chain dimension",
                expected: first.dim(),
                actual: c.dim(),
            });
        }
        for i in 0..c.m0() {
            draws.push_row(c.draws().row(i));
        }
        accepts += c.accept_count();
        iters += c.iterations();
    }
    Ok(PosteriorChain::from_draws(
        draws,
        first.n_theta(),
        first.chain_id(),
        accepts,
        iters,
    ))
}
