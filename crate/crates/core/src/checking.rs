//! Model comparison and adequacy: conditional predictive ordinates, the log
//! pseudo-marginal likelihood, and the deviance information criterion.
//!
//! CPO_i is the harmonic mean over retained draws of the probability the
//! model assigns to observation i's censoring interval; it is evaluated in
//! the log domain. Deviance is -2 times the log-likelihood (additive
//! constant fixed at zero), so DIC = 2 * mean deviance - deviance at the
//! posterior means.

use serde::Serialize;

use crate::data::CurrentStatusDataset;
use crate::error::{Error, Result};
use crate::model;
use crate::real::{log_sum_exp2, Real};
use crate::sampler::PosteriorChain;
use crate::summary::posterior_mean;

/// Scaled CPO values below this are flagged as outliers.
pub const OUTLIER_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport<R> {
    pub cpo: Vec<R>,
    pub scaled_cpo: Vec<R>,
    pub lpml: R,
    pub dbar: R,
    pub dhat: R,
    pub p_d: R,
    pub dic: R,
    /// observations whose harmonic mean collapsed to zero
    pub zero_cpo_count: usize,
    /// scaled CPO entries below the outlier threshold
    pub outlier_count: usize,
}

/// Per-observation CPO: inverse mean of inverse interval probabilities over
/// the retained draws. A draw assigning probability zero collapses that
/// observation's CPO to zero (flagged by the caller via `zero_cpo_count`).
pub fn cpo<R: Real>(chain: &PosteriorChain<R>, data: &CurrentStatusDataset<R>) -> Result<Vec<R>> {
    let m0 = chain.m0();
    if m0 == 0 {
        return Err(Error::EmptyChain);
    }
    let n = data.n();
    // log-sum-exp accumulators of -log P_i over draws
    let mut lse_neg = vec![R::neg_infinity(); n];
    let mut buf = Vec::with_capacity(n);
    for m in 0..m0 {
        let params = chain.params_at(m);
        model::fill_obs_log_probs(&params.theta, &params.eta, data, &mut buf);
        for (acc, &lp) in lse_neg.iter_mut().zip(&buf) {
            *acc = log_sum_exp2(*acc, -lp);
        }
    }
    let log_m0 = R::of(m0 as f64).ln();
    Ok(lse_neg.into_iter().map(|v| (log_m0 - v).exp()).collect())
}

/// Sum of log CPO values; -infinity (with the zero flagged upstream) when
/// any CPO collapsed to zero.
pub fn lpml<R: Real>(cpo_values: &[R]) -> R {
    cpo_values.iter().fold(R::zero(), |acc, &c| acc + c.ln())
}

/// Each CPO divided by the maximum, so the largest value is exactly one.
pub fn scaled_cpo<R: Real>(cpo_values: &[R]) -> Result<Vec<R>> {
    let max = cpo_values.iter().fold(R::neg_infinity(), |a, &b| a.max(b));
    if !(max > R::zero()) {
        return Err(Error::invalid("all CPO values are zero"));
    }
    Ok(cpo_values.iter().map(|&c| c / max).collect())
}

/// Deviance summaries over the retained draws.
pub struct DevianceSummary<R> {
    pub dbar: R,
    pub dhat: R,
    pub p_d: R,
    pub dic: R,
}

pub fn dic<R: Real>(
    chain: &PosteriorChain<R>,
    data: &CurrentStatusDataset<R>,
) -> Result<DevianceSummary<R>> {
    let m0 = chain.m0();
    if m0 == 0 {
        return Err(Error::EmptyChain);
    }
    let neg_two = R::of(-2.0);
    let mut sum = R::zero();
    for m in 0..m0 {
        let params = chain.params_at(m);
        let deviance = neg_two * model::log_likelihood(&params, data);
        if !deviance.is_finite() {
            return Err(Error::NonFiniteDeviance { draw: m });
        }
        sum = sum + deviance;
    }
    let dbar = sum / R::of(m0 as f64);
    let (theta_mean, eta_mean) = posterior_mean(chain)?;
    let at_mean = crate::model::ModelParams {
        theta: theta_mean,
        eta: eta_mean,
    };
    let dhat = neg_two * model::log_likelihood(&at_mean, data);
    Ok(DevianceSummary {
        dbar,
        dhat,
        p_d: dbar - dhat,
        dic: R::of(2.0) * dbar - dhat,
    })
}

/// Full adequacy report for one chain (or pooled chains).
pub fn check_report<R: Real>(
    chain: &PosteriorChain<R>,
    data: &CurrentStatusDataset<R>,
) -> Result<CheckReport<R>> {
    let cpo_values = cpo(chain, data)?;
    let zero_cpo_count = cpo_values.iter().filter(|&&c| !(c > R::zero())).count();
    let lpml_value = lpml(&cpo_values);
    let scaled = scaled_cpo(&cpo_values)?;
    let threshold = R::of(OUTLIER_THRESHOLD);
    let outlier_count = scaled.iter().filter(|&&s| s < threshold).count();
    let dev = dic(chain, data)?;
    Ok(CheckReport {
        cpo: cpo_values,
        scaled_cpo: scaled,
        lpml: lpml_value,
        dbar: dev.dbar,
        dhat: dev.dhat,
        p_d: dev.p_d,
        dic: dev.dic,
        zero_cpo_count,
        outlier_count,
    })
}

/// (index, monitoring time, scaled CPO) rows for the adequacy plot data.
pub fn scaled_cpo_table<R: Real>(scaled: &[R], data: &CurrentStatusDataset<R>) -> String {
    let mut out = String::from("index\ttime\tscaled_cpo\n");
    for (i, (s, obs)) in scaled.iter().zip(data.observations()).enumerate() {
        out.push_str(&format!("{}\t{}\t{}\n", i + 1, obs.time, s));
    }
    out
}
