//! Adaptive Gaussian random-walk Metropolis-Hastings over (theta, eta).
//!
//! A run proceeds in the fixed order: locate the posterior mode with a
//! derivative-free search, take the inverse observed information there as the
//! initial proposal covariance, then iterate symmetric Gaussian random-walk
//! steps. During burn-in the proposal covariance is refreshed every
//! `adapt_interval` iterations from a trailing window of the chain history
//! (scaled by 2.38^2/d with a small diagonal jitter); after burn-in the
//! kernel is frozen so the retained draws come from a fixed-kernel chain.
//!
//! RNG stream contract (relied on by replay tests): every iteration consumes
//! exactly d standard normal draws (proposal, coordinate order) followed by
//! one uniform draw (the acceptance variable), regardless of the outcome.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::CurrentStatusDataset;
use crate::error::{Error, Result};
use crate::linalg::{sample_covariance, Cholesky, Matrix};
use crate::model::{log_posterior_flat, ModelParams, PriorSpec};
use crate::optim::{nelder_mead, numerical_hessian};
use crate::real::Real;
use crate::seeding;

/// Sampler settings. Defaults mirror the canned simulation studies:
/// 70000 iterations, 10000 burn-in, thinning every 15th draw.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub adapt_interval: usize,
    pub adapt_fraction: f64,
    pub seed: u64,
    pub n_chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 70_000,
            burn_in: 10_000,
            thin: 15,
            adapt_interval: 500,
            adapt_fraction: 0.5,
            seed: 1,
            n_chains: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid("burn_in must be smaller than iterations"));
        }
        if self.thin == 0 || self.adapt_interval == 0 {
            return Err(Error::invalid("thin and adapt_interval must be positive"));
        }
        if !(self.adapt_fraction > 0.0 && self.adapt_fraction <= 1.0) {
            return Err(Error::invalid("adapt_fraction must lie in (0, 1]"));
        }
        if self.n_chains == 0 {
            return Err(Error::invalid("n_chains must be positive"));
        }
        if self.retained() == 0 {
            return Err(Error::invalid(
                "no draws would be retained; increase iterations or decrease thin",
            ));
        }
        Ok(())
    }

    /// Retained draw count m0 = floor((iterations - burn_in) / thin).
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Mutable state of one chain.
pub struct ChainState<R> {
    position: Vec<R>,
    log_post: R,
    proposal_cov: Matrix<R>,
    proposal_chol: Cholesky<R>,
    accept_count: usize,
    iteration: usize,
    rng: ChaCha8Rng,
}

impl<R: Real> ChainState<R> {
    pub fn new(
        position: Vec<R>,
        data: &CurrentStatusDataset<R>,
        prior: &PriorSpec<R>,
        proposal_cov: Matrix<R>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let log_post = log_posterior_flat(&position, data, prior);
        if !log_post.is_finite() {
            return Err(Error::invalid("initial point has non-finite log-posterior"));
        }
        let proposal_chol = Cholesky::new(&proposal_cov)?;
        Ok(ChainState {
            position,
            log_post,
            proposal_cov,
            proposal_chol,
            accept_count: 0,
            iteration: 0,
            rng,
        })
    }

    pub fn position(&self) -> &[R] {
        &self.position
    }

    pub fn log_post(&self) -> R {
        self.log_post
    }

    pub fn accept_count(&self) -> usize {
        self.accept_count
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn proposal_cov(&self) -> &Matrix<R> {
        &self.proposal_cov
    }

    /// Swaps in a new proposal covariance; on a failed factorization the
    /// previous kernel is kept (the jittered adapted matrix is positive
    /// definite in exact arithmetic, so this is a float-degeneracy guard).
    pub fn set_proposal_cov(&mut self, cov: Matrix<R>) {
        if let Ok(chol) = Cholesky::new(&cov) {
            self.proposal_cov = cov;
            self.proposal_chol = chol;
        }
    }
}

/// The accept rule: a non-finite proposed log-posterior always rejects;
/// otherwise accept when log(omega) <= proposed - current.
#[inline]
pub(crate) fn mh_accepts<R: Real>(current_lp: R, proposed_lp: R, log_omega: R) -> bool {
    proposed_lp.is_finite() && log_omega <= proposed_lp - current_lp
}

/// One symmetric random-walk Metropolis step.
pub fn mh_step<R: Real>(
    state: &mut ChainState<R>,
    data: &CurrentStatusDataset<R>,
    prior: &PriorSpec<R>,
) {
    let d = state.position.len();
    let z: Vec<R> = (0..d)
        .map(|_| seeding::standard_normal(&mut state.rng))
        .collect();
    let mut proposal = vec![R::zero(); d];
    state
        .proposal_chol
        .affine(&state.position, &z, &mut proposal);
    let proposed_lp = log_posterior_flat(&proposal, data, prior);
    let omega: f64 = seeding::uniform01::<f64>(&mut state.rng);
    let log_omega = R::of(omega.ln());
    state.iteration += 1;
    if mh_accepts(state.log_post, proposed_lp, log_omega) {
        state.position = proposal;
        state.log_post = proposed_lp;
        state.accept_count += 1;
    }
}

/// Refreshed proposal covariance from the trailing `adapt_fraction` portion
/// of the chain history: (2.38^2/d) * SampleCov + 1e-6 I. Histories shorter
/// than d+2 rows leave the current covariance unchanged.
pub fn adapt_covariance<R: Real>(
    history: &Matrix<R>,
    current: &Matrix<R>,
    adapt_fraction: f64,
) -> Matrix<R> {
    let m = history.nrows();
    let d = history.ncols();
    if m < d + 2 {
        return current.clone();
    }
    let window = ((adapt_fraction * m as f64).ceil() as usize).clamp(2, m);
    let start = m - window;
    let mut tail = Matrix::with_row_capacity(window, d);
    for i in start..m {
        tail.push_row(history.row(i));
    }
    let factor = R::of(2.38 * 2.38 / d as f64);
    let mut cov = sample_covariance(&tail).scaled(factor);
    cov.add_diagonal(R::of(1e-6));
    cov
}

/// Posterior mode search: Nelder-Mead with a budget of 2000 evaluations per
/// dimension and tolerance 1e-8 on the log-posterior, restarted once from the
/// prior mean when the first pass stalls.
pub fn map_estimate<R: Real>(
    data: &CurrentStatusDataset<R>,
    prior: &PriorSpec<R>,
    init: &ModelParams<R>,
) -> Result<ModelParams<R>> {
    init.validate()?;
    let objective = |x: &[R]| -log_posterior_flat(x, data, prior);
    let x0 = init.flatten();
    let budget = 2000 * x0.len();
    let tol = R::of(1e-8);
    let first = nelder_mead(&objective, &x0, budget, tol);
    let best = if first.converged {
        first
    } else {
        let prior_mean = prior.mean_params().flatten();
        let restart = nelder_mead(&objective, &prior_mean, budget, tol);
        if restart.converged || restart.f < first.f {
            restart
        } else {
            first
        }
    };
    if !best.converged {
        return Err(Error::MapDidNotConverge {
            evaluations: best.evaluations,
            best_log_post: (-best.f).to_f64_lossy(),
            best_point: best.x.iter().map(|v| v.to_f64_lossy()).collect(),
        });
    }
    Ok(ModelParams::from_flat(prior.n_coef(), &best.x))
}

/// Observed information: central-difference Hessian of the negative
/// log-posterior at `at`, symmetrized.
pub fn observed_information<R: Real>(
    data: &CurrentStatusDataset<R>,
    prior: &PriorSpec<R>,
    at: &ModelParams<R>,
) -> Result<Matrix<R>> {
    let objective = |x: &[R]| -log_posterior_flat(x, data, prior);
    let hess = numerical_hessian(&objective, &at.flatten(), R::of(1e-4)).symmetrized();
    for i in 0..hess.nrows() {
        for j in 0..hess.ncols() {
            if !hess[(i, j)].is_finite() {
                return Err(Error::NonFiniteHessian { row: i, col: j });
            }
        }
    }
    Ok(hess)
}

/// Inverts the observed information into a proposal covariance, adding a
/// doubling ridge from 1e-6 * max |diagonal| whenever the matrix is not
/// positive definite.
pub fn initial_proposal_cov<R: Real>(info: &Matrix<R>) -> Matrix<R> {
    if let Ok(chol) = Cholesky::new(info) {
        return chol.inverse();
    }
    let mut ridge = {
        let base = info.max_abs_diagonal() * R::of(1e-6);
        if base > R::zero() {
            base
        } else {
            R::of(1e-6)
        }
    };
    loop {
        let mut bumped = info.clone();
        bumped.add_diagonal(ridge);
        if let Ok(chol) = Cholesky::new(&bumped) {
            return chol.inverse();
        }
        ridge = ridge * R::of(2.0);
    }
}

/// Retained post-burn-in, thinned draws plus acceptance bookkeeping.
#[derive(Debug, Clone)]
pub struct PosteriorChain<R> {
    draws: Matrix<R>,
    n_theta: usize,
    chain_id: u64,
    accept_count: usize,
    iterations: usize,
    map_point: Option<ModelParams<R>>,
    final_proposal_cov: Option<Matrix<R>>,
    sampling_seconds: f64,
    config: SamplerConfig,
}

impl<R: Real> PosteriorChain<R> {
    /// Wraps an externally produced draw matrix (tests, re-imported chain
    /// exports). `draws` has one row per retained draw and n_theta + n_eta
    /// columns in [theta, eta] order.
    pub fn from_draws(
        draws: Matrix<R>,
        n_theta: usize,
        chain_id: u64,
        accept_count: usize,
        iterations: usize,
    ) -> Self {
        PosteriorChain {
            draws,
            n_theta,
            chain_id,
            accept_count,
            iterations,
            map_point: None,
            final_proposal_cov: None,
            sampling_seconds: 0.0,
            config: SamplerConfig::default(),
        }
    }

    pub fn draws(&self) -> &Matrix<R> {
        &self.draws
    }

    pub fn m0(&self) -> usize {
        self.draws.nrows()
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_eta(&self) -> usize {
        self.dim() - self.n_theta
    }

    pub fn chain_id(&self) -> u64 {
        self.chain_id
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.iterations as f64
        }
    }

    pub fn accept_count(&self) -> usize {
        self.accept_count
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn map_point(&self) -> Option<&ModelParams<R>> {
        self.map_point.as_ref()
    }

    pub fn final_proposal_cov(&self) -> Option<&Matrix<R>> {
        self.final_proposal_cov.as_ref()
    }

    pub fn sampling_seconds(&self) -> f64 {
        self.sampling_seconds
    }

    pub fn seconds_per_iteration(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.sampling_seconds / self.iterations as f64
        }
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn params_at(&self, row: usize) -> ModelParams<R> {
        ModelParams::from_flat(self.n_theta, self.draws.row(row))
    }

    /// Column names theta_0..theta_k, eta_1..eta_n0.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for v in 0..self.n_theta {
            names.push(format!("theta_{v}"));
        }
        for l in 1..=self.n_eta() {
            names.push(format!("eta_{l}"));
        }
        names
    }

    /// Tab-delimited export: metadata comment lines, a header of parameter
    /// names, one row per retained draw.
    pub fn to_delimited(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# chain_id: {}\n", self.chain_id));
        out.push_str(&format!("# iterations: {}\n", self.iterations));
        out.push_str(&format!("# accept_count: {}\n", self.accept_count));
        out.push_str(&format!("# acceptance_rate: {}\n", self.acceptance_rate()));
        out.push_str(&format!("# n_theta: {}\n", self.n_theta));
        out.push_str(&self.param_names().join("\t"));
        out.push('\n');
        for i in 0..self.m0() {
            let row: Vec<String> = self.draws.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Runs one chain: mode search, information-based proposal, adaptive burn-in,
/// frozen-kernel sampling, thinning. Deterministic given (seed, chain_id).
pub fn run_chain<R: Real>(
    data: &CurrentStatusDataset<R>,
    prior: &PriorSpec<R>,
    config: &SamplerConfig,
    chain_id: u64,
) -> Result<PosteriorChain<R>> {
    config.validate()?;
    if data.n() > 0 {
        if data.n_covariates() != prior.n_coef() {
            return Err(Error::Dimension {
                what: "theta prior",
                expected: data.n_covariates(),
                actual: prior.n_coef(),
            });
        }
        if data.grid().n0() != prior.n_knots() {
            return Err(Error::Dimension {
                what: "eta prior",
                expected: data.grid().n0(),
                actual: prior.n_knots(),
            });
        }
    }

    let map_point = map_estimate(data, prior, &prior.mean_params())?;
    let info = observed_information(data, prior, &map_point)?;
    let proposal_cov = initial_proposal_cov(&info);

    let rng = seeding::chain_rng(config.seed, chain_id);
    let mut state = ChainState::new(map_point.flatten(), data, prior, proposal_cov, rng)?;
    let d = state.position.len();

    let mut history = Matrix::with_row_capacity(config.burn_in, d);
    let mut draws = Matrix::with_row_capacity(config.retained(), d);

    let started = Instant::now();
    for iter in 1..=config.iterations {
        mh_step(&mut state, data, prior);
        if iter <= config.burn_in {
            history.push_row(&state.position);
            if iter % config.adapt_interval == 0 {
                let cov = adapt_covariance(&history, &state.proposal_cov, config.adapt_fraction);
                state.set_proposal_cov(cov);
            }
        } else {
            let j = iter - config.burn_in;
            if j % config.thin == 0 {
                draws.push_row(&state.position);
            }
        }
    }
    let sampling_seconds = started.elapsed().as_secs_f64();

    Ok(PosteriorChain {
        draws,
        n_theta: prior.n_coef(),
        chain_id,
        accept_count: state.accept_count,
        iterations: config.iterations,
        map_point: Some(map_point),
        final_proposal_cov: Some(state.proposal_cov.clone()),
        sampling_seconds,
        config: config.clone(),
    })
}

/// Independent chains with decorrelated streams, merged in chain-id order.
pub fn run_chains<R: Real>(
    data: &CurrentStatusDataset<R>,
    prior: &PriorSpec<R>,
    config: &SamplerConfig,
) -> Result<Vec<PosteriorChain<R>>> {
    (0..config.n_chains as u64)
        .into_par_iter()
        .map(|chain_id| run_chain(data, prior, config, chain_id))
        .collect()
}
