//! Model evaluation: step-function baseline CDF, population survival, cure
//! fraction, log-likelihood, log-priors, and the unnormalized log-posterior.
//!
//! The population survival of a subject with covariates x is
//! `exp(-exp(theta'x) * F(t))`, where F is a non-decreasing step function
//! with jumps at the monitoring grid knots parameterized through
//! `eta_l = log(-log r_l)`, so that F(s_L) = 1 - exp(-sum_{l<=L} exp(eta_l)).
//! The cure fraction is the t -> infinity limit `exp(-exp(theta'x))`.

use crate::data::{CurrentStatusDataset, MonitoringGrid, Observation};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::real::{log1m_exp_neg, log_sum_exp2, Real};

/// Regression coefficients theta and step-baseline parameters eta, the joint
/// vector the sampler walks over.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<R> {
    pub theta: Vec<R>,
    pub eta: Vec<R>,
}

impl<R: Real> ModelParams<R> {
    pub fn new(theta: Vec<R>, eta: Vec<R>) -> Result<Self> {
        let p = ModelParams { theta, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .theta
            .iter()
            .chain(self.eta.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.theta.len() + self.eta.len()
    }

    pub fn flatten(&self) -> Vec<R> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.theta);
        v.extend_from_slice(&self.eta);
        v
    }

    pub fn from_flat(n_theta: usize, flat: &[R]) -> Self {
        ModelParams {
            theta: flat[..n_theta].to_vec(),
            eta: flat[n_theta..].to_vec(),
        }
    }
}

/// Covariance specification for the eta prior: first-order autoregressive
/// (`scale * rho^|i-j|`) or an explicit symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub enum EtaCovariance<R> {
    Ar1 { scale: R, rho: R },
    Explicit(Matrix<R>),
}

/// Normal priors: independent theta coordinates and a correlated eta block.
#[derive(Debug, Clone)]
pub struct PriorSpec<R> {
    tau: Vec<R>,
    sigma_theta_diag: Vec<R>,
    mu: Vec<R>,
    eta_cov: EtaCovariance<R>,
    // cached pieces for the Explicit branch
    eta_chol: Option<Cholesky<R>>,
}

impl<R: Real> PriorSpec<R> {
    pub fn new(
        tau: Vec<R>,
        sigma_theta_diag: Vec<R>,
        mu: Vec<R>,
        eta_cov: EtaCovariance<R>,
    ) -> Result<Self> {
        if tau.len() != sigma_theta_diag.len() {
            return Err(Error::Dimension {
                what: "theta prior variance",
                expected: tau.len(),
                actual: sigma_theta_diag.len(),
            });
        }
        if tau.iter().any(|v| !v.is_finite()) || mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("prior means must be finite"));
        }
        if sigma_theta_diag
            .iter()
            .any(|&v| !(v > R::zero()) || !v.is_finite())
        {
            return Err(Error::invalid("theta prior variances must be positive"));
        }
        let eta_chol = match &eta_cov {
            EtaCovariance::Ar1 { scale, rho } => {
                if !(*rho > R::zero() && *rho < R::one()) {
                    return Err(Error::invalid("AR(1) correlation must lie in (0, 1)"));
                }
                if !(*scale > R::zero()) || !scale.is_finite() {
                    return Err(Error::invalid("AR(1) scale must be positive"));
                }
                None
            }
            EtaCovariance::Explicit(m) => {
                if m.nrows() != mu.len() || m.ncols() != mu.len() {
                    return Err(Error::Dimension {
                        what: "eta covariance",
                        expected: mu.len(),
                        actual: m.nrows(),
                    });
                }
                let tol = R::of(1e-10);
                for i in 0..m.nrows() {
                    for j in 0..i {
                        let scale = R::one().max(m[(i, j)].abs());
                        if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                            return Err(Error::invalid("eta covariance must be symmetric"));
                        }
                    }
                }
                Some(Cholesky::new(m)?)
            }
        };
        Ok(PriorSpec {
            tau,
            sigma_theta_diag,
            mu,
            eta_cov,
            eta_chol,
        })
    }

    pub fn n_coef(&self) -> usize {
        self.tau.len()
    }

    pub fn n_knots(&self) -> usize {
        self.mu.len()
    }

    pub fn theta_mean(&self) -> &[R] {
        &self.tau
    }

    pub fn theta_variances(&self) -> &[R] {
        &self.sigma_theta_diag
    }

    pub fn eta_mean(&self) -> &[R] {
        &self.mu
    }

    pub fn eta_covariance_matrix(&self) -> Result<Matrix<R>> {
        match &self.eta_cov {
            EtaCovariance::Ar1 { scale, rho } => ar1_covariance(self.mu.len(), *rho, *scale),
            EtaCovariance::Explicit(m) => Ok(m.clone()),
        }
    }

    /// Prior mode, the default starting point for MAP search.
    pub fn mean_params(&self) -> ModelParams<R> {
        ModelParams {
            theta: self.tau.clone(),
            eta: self.mu.clone(),
        }
    }

    fn log_density_theta(&self, theta: &[R]) -> R {
        let half = R::of(0.5);
        let ln_2pi = R::of((2.0 * std::f64::consts::PI).ln());
        let mut lp = R::zero();
        for ((&t, &m), &v) in theta.iter().zip(&self.tau).zip(&self.sigma_theta_diag) {
            let z = t - m;
            lp = lp - half * (ln_2pi + v.ln() + z * z / v);
        }
        lp
    }

    fn log_density_eta(&self, eta: &[R]) -> R {
        let n = self.mu.len();
        let half = R::of(0.5);
        let ln_2pi = R::of((2.0 * std::f64::consts::PI).ln());
        match &self.eta_cov {
            EtaCovariance::Ar1 { scale, rho } => {
                // closed-form tridiagonal inverse of the AR(1) correlation
                let z: Vec<R> = eta.iter().zip(&self.mu).map(|(&a, &b)| a - b).collect();
                let (q, log_det) = if n == 1 {
                    (z[0] * z[0] / *scale, scale.ln())
                } else {
                    let rho2 = *rho * *rho;
                    let one_m = R::one() - rho2;
                    let mut quad = z[0] * z[0] + z[n - 1] * z[n - 1];
                    for zi in z.iter().take(n - 1).skip(1) {
                        quad = quad + (R::one() + rho2) * *zi * *zi;
                    }
                    let mut cross = R::zero();
                    for i in 0..n - 1 {
                        cross = cross + z[i] * z[i + 1];
                    }
                    quad = quad - R::of(2.0) * *rho * cross;
                    let log_det = R::of(n as f64) * scale.ln() + R::of((n - 1) as f64) * one_m.ln();
                    (quad / (one_m * *scale), log_det)
                };
                -half * (R::of(n as f64) * ln_2pi + log_det + q)
            }
            EtaCovariance::Explicit(_) => {
                let chol = self.eta_chol.as_ref().expect("cached at construction");
                crate::linalg::mvn_log_density(eta, &self.mu, chol)
            }
        }
    }
}

/// AR(1) covariance: entry (i, j) = scale * rho^|i-j|.
pub fn ar1_covariance<R: Real>(n0: usize, rho: R, scale: R) -> Result<Matrix<R>> {
    if n0 < 1 {
        return Err(Error::invalid("AR(1) covariance needs at least one knot"));
    }
    if !(rho > R::zero() && rho < R::one()) {
        return Err(Error::invalid("AR(1) correlation must lie in (0, 1)"));
    }
    if !(scale > R::zero()) || !scale.is_finite() {
        return Err(Error::invalid("AR(1) scale must be positive"));
    }
    Ok(Matrix::from_fn(n0, n0, |i, j| {
        let lag = i.abs_diff(j) as i32;
        scale * rho.powi(lag)
    }))
}

/// Cumulative log-hazard log(sum_{l<=L} exp(eta_l)) per knot, accumulated in
/// log-sum-exp form so extreme eta neither overflow nor vanish.
fn cumulative_log_hazard<R: Real>(eta: &[R]) -> Vec<R> {
    let mut out = Vec::with_capacity(eta.len());
    let mut acc = R::neg_infinity();
    for &e in eta {
        acc = log_sum_exp2(acc, e);
        out.push(acc);
    }
    out
}

/// log F(s_L) per knot, with F = 1 - exp(-H).
fn log_step_cdf_at_knots<R: Real>(eta: &[R]) -> Vec<R> {
    cumulative_log_hazard(eta)
        .into_iter()
        .map(|log_h| log1m_exp_neg(log_h.exp()))
        .collect()
}

/// Step-function baseline CDF at time t: 0 before the first knot, then
/// 1 - exp(-sum_{l: s_l <= t} exp(eta_l)).
pub fn step_cdf<R: Real>(eta: &[R], grid: &MonitoringGrid<R>, t: R) -> R {
    debug_assert_eq!(eta.len(), grid.n0());
    match grid.index_at_or_below(t) {
        None => R::zero(),
        Some(l) => {
            let mut acc = R::neg_infinity();
            for &e in &eta[..=l] {
                acc = log_sum_exp2(acc, e);
            }
            -(-acc.exp()).exp_m1()
        }
    }
}

fn check_profile<R: Real>(theta: &[R], x: &[R]) -> Result<()> {
    if theta.len() != x.len() {
        return Err(Error::Dimension {
            what: "covariate vector",
            expected: theta.len(),
            actual: x.len(),
        });
    }
    if x.is_empty() || x[0] != R::one() {
        return Err(Error::invalid("covariate vector must start with 1"));
    }
    Ok(())
}

fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).fold(R::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Population survival exp(-exp(theta'x) F(t)).
pub fn pop_survival<R: Real>(
    params: &ModelParams<R>,
    grid: &MonitoringGrid<R>,
    x: &[R],
    t: R,
) -> Result<R> {
    check_profile(&params.theta, x)?;
    let f = step_cdf(&params.eta, grid, t);
    Ok((-(dot(&params.theta, x)).exp() * f).exp())
}

/// Cured proportion exp(-exp(theta'x)), the t -> infinity survival limit.
pub fn cure_fraction<R: Real>(theta: &[R], x: &[R]) -> Result<R> {
    check_profile(theta, x)?;
    Ok((-dot(theta, x).exp()).exp())
}

/// Probability that the latent event time falls in the interval the single
/// examination pins down: (0, u] when the event was seen, (u, inf) otherwise.
pub fn interval_probability<R: Real>(
    params: &ModelParams<R>,
    grid: &MonitoringGrid<R>,
    obs: &Observation<R>,
) -> Result<R> {
    check_profile(&params.theta, &obs.covariates)?;
    let s = pop_survival(params, grid, &obs.covariates, obs.time)?;
    Ok(if obs.event { R::one() - s } else { s })
}

/// Per-observation log interval probabilities for one parameter value,
/// written into `out`. This is the workhorse behind the likelihood and the
/// predictive-ordinate computations.
pub(crate) fn fill_obs_log_probs<R: Real>(
    theta: &[R],
    eta: &[R],
    data: &CurrentStatusDataset<R>,
    out: &mut Vec<R>,
) {
    out.clear();
    if data.n() == 0 {
        return;
    }
    let log_f = log_step_cdf_at_knots(eta);
    for (obs, &l) in data.observations().iter().zip(data.knot_index()) {
        let lp = dot(theta, &obs.covariates);
        // z = exp(theta'x) * F(u) evaluated as exp(lp + log F) for stability
        let z = (lp + log_f[l]).exp();
        let term = if obs.event { log1m_exp_neg(z) } else { -z };
        out.push(term);
    }
}

/// Log-likelihood of the current status data under the step-baseline model.
pub fn log_likelihood<R: Real>(params: &ModelParams<R>, data: &CurrentStatusDataset<R>) -> R {
    if data.n() > 0 {
        debug_assert_eq!(params.eta.len(), data.grid().n0());
        debug_assert_eq!(params.theta.len(), data.n_covariates());
    }
    let mut buf = Vec::new();
    fill_obs_log_probs(&params.theta, &params.eta, data, &mut buf);
    buf.into_iter().fold(R::zero(), |acc, t| acc + t)
}

/// Log prior density including normalizing constants.
pub fn log_prior<R: Real>(params: &ModelParams<R>, prior: &PriorSpec<R>) -> R {
    debug_assert_eq!(params.theta.len(), prior.n_coef());
    debug_assert_eq!(params.eta.len(), prior.n_knots());
    prior.log_density_theta(&params.theta) + prior.log_density_eta(&params.eta)
}

/// Unnormalized log-posterior: log prior plus log likelihood.
pub fn log_posterior<R: Real>(
    params: &ModelParams<R>,
    data: &CurrentStatusDataset<R>,
    prior: &PriorSpec<R>,
) -> R {
    log_prior(params, prior) + log_likelihood(params, data)
}

/// Log-posterior on the flattened [theta, eta] vector the sampler uses.
pub fn log_posterior_flat<R: Real>(
    flat: &[R],
    data: &CurrentStatusDataset<R>,
    prior: &PriorSpec<R>,
) -> R {
    let params = ModelParams::from_flat(prior.n_coef(), flat);
    log_posterior(&params, data, prior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_grid, Observation};
    use approx::assert_relative_eq;

    fn grid(knots: &[f64]) -> MonitoringGrid<f64> {
        build_grid(knots).unwrap()
    }

    fn obs(time: f64, event: bool, x: &[f64]) -> Observation<f64> {
        let mut cov = vec![1.0];
        cov.extend_from_slice(x);
        Observation::new(time, event, cov).unwrap()
    }

    #[test]
    fn ar1_definition_small() {
        let m = ar1_covariance(2, 0.3, 1.0).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 0.3);
        assert_eq!(m[(1, 0)], 0.3);
        assert_eq!(m[(1, 1)], 1.0);
    }

    #[test]
    fn ar1_ten_knots_lag_two() {
        let m = ar1_covariance(10, 0.3, 1.0).unwrap();
        assert_relative_eq!(m[(0, 2)], 0.09, max_relative = 1e-14);
    }

    #[test]
    fn ar1_scaled_entries_and_positive_definite() {
        let m = ar1_covariance(3, 0.5, 0.1).unwrap();
        assert_relative_eq!(m[(0, 0)], 0.1);
        assert_relative_eq!(m[(0, 1)], 0.05);
        assert_relative_eq!(m[(0, 2)], 0.025);
        assert_relative_eq!(m[(1, 2)], 0.05);
        // eigenvalue oracle: Jacobi sweeps on the 3x3
        let eigs = jacobi_eigenvalues(&m);
        assert!(eigs.iter().all(|&e| e > 0.0), "eigs {eigs:?}");
    }

    #[test]
    fn ar1_rejects_bad_arguments() {
        assert!(ar1_covariance(0, 0.3, 1.0_f64).is_err());
        assert!(ar1_covariance(3, 1.0, 1.0_f64).is_err());
        assert!(ar1_covariance(3, 0.0, 1.0_f64).is_err());
        assert!(ar1_covariance(3, 0.3, 0.0_f64).is_err());
    }

    /// Plain Jacobi rotation eigenvalue iteration, used only as a test oracle.
    fn jacobi_eigenvalues(m: &Matrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _ in 0..200 {
            let mut off = 0.0;
            let (mut p, mut q) = (0, 1);
            for i in 0..n {
                for j in i + 1..n {
                    if a[(i, j)].abs() > off {
                        off = a[(i, j)].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
            let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / a[(p, q)];
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut next = a.clone();
            for k in 0..n {
                let akp = a[(k, p)];
                let akq = a[(k, q)];
                next[(k, p)] = c * akp - s * akq;
                next[(k, q)] = s * akp + c * akq;
            }
            a = next.clone();
            for k in 0..n {
                let apk = a[(p, k)];
                let aqk = a[(q, k)];
                next[(p, k)] = c * apk - s * aqk;
                next[(q, k)] = s * apk + c * aqk;
            }
            a = next;
        }
        (0..n).map(|i| a[(i, i)]).collect()
    }

    #[test]
    fn ar1_positive_definite_up_to_fifty_knots() {
        for &rho in &[0.05, 0.3, 0.5, 0.9, 0.99] {
            for &n0 in &[2usize, 10, 25, 50] {
                let m = ar1_covariance(n0, rho, 1.0).unwrap();
                let eigs = jacobi_eigenvalues(&m);
                assert!(
                    eigs.iter().all(|&e| e > 0.0),
                    "rho={rho} n0={n0} min eig {:?}",
                    eigs.iter().cloned().fold(f64::INFINITY, f64::min)
                );
            }
        }
    }

    #[test]
    fn step_cdf_before_first_knot_is_zero() {
        let g = grid(&[1.0, 2.0]);
        assert_eq!(step_cdf(&[0.3, -0.2], &g, 0.5), 0.0);
    }

    #[test]
    fn step_cdf_single_knot_half() {
        let g = grid(&[1.0]);
        let eta = [(-(0.5_f64.ln())).ln()]; // log(-log 0.5)
        assert_relative_eq!(step_cdf(&eta, &g, 1.0), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn step_cdf_two_zero_etas() {
        let g = grid(&[1.0, 2.0]);
        let f = step_cdf(&[0.0, 0.0], &g, 2.5);
        assert_relative_eq!(f, 1.0 - (-2.0_f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(f, 0.864_664_716_763_387_3, max_relative = 1e-10);
    }

    #[test]
    fn step_cdf_monotone_in_t() {
        let g = grid(&[0.5, 1.0, 1.5, 2.0]);
        let eta = [-1.0, 0.4, -0.3, 2.0];
        let mut prev = 0.0;
        for i in 0..50 {
            let t = 0.05 * i as f64;
            let f = step_cdf(&eta, &g, t);
            assert!(f >= prev, "not monotone at t={t}");
            assert!((0.0..1.0).contains(&f));
            prev = f;
        }
    }

    #[test]
    fn pop_survival_limits_and_value() {
        let g = grid(&[1.0, 2.0]);
        let params = ModelParams::new(vec![0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(pop_survival(&params, &g, &[1.0], 0.5).unwrap(), 1.0);
        let s = pop_survival(&params, &g, &[1.0], 3.0).unwrap();
        // theta'x = 0, F = 1 - e^{-2}
        assert_relative_eq!(s, (-(1.0 - (-2.0_f64).exp())).exp(), max_relative = 1e-12);
        assert_relative_eq!(s, 0.421_194, max_relative = 1e-5);
        // tail never drops below the cure fraction
        let cure = cure_fraction(&params.theta, &[1.0]).unwrap();
        assert!(s >= cure);
    }

    #[test]
    fn cure_fraction_values() {
        assert_relative_eq!(
            cure_fraction(&[0.0], &[1.0]).unwrap(),
            (-1.0_f64).exp(),
            max_relative = 1e-12
        );
        // lung tumor plug-ins
        let theta = [-0.2702, 0.8102];
        assert_relative_eq!(
            cure_fraction(&theta, &[1.0, 0.0]).unwrap(),
            0.4662,
            epsilon = 5e-5
        );
        assert_relative_eq!(
            cure_fraction(&theta, &[1.0, 1.0]).unwrap(),
            0.1798,
            epsilon = 5e-5
        );
        // intercept-only baseline
        assert_relative_eq!(
            cure_fraction(&[-1.7986, 0.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            0.8474,
            epsilon = 5e-5
        );
    }

    #[test]
    fn cure_fraction_dimension_mismatch() {
        assert!(cure_fraction(&[0.0, 1.0], &[1.0]).is_err());
        assert!(cure_fraction(&[0.0], &[0.5]).is_err());
    }

    #[test]
    fn interval_probability_cases() {
        let g = grid(&[1.0]);
        let params = ModelParams::new(vec![0.0], vec![(-(0.5_f64.ln())).ln()]).unwrap();
        // delta = 1 at the knot: 1 - exp(-0.5)
        let o1 = obs(1.0, true, &[]);
        assert_relative_eq!(
            interval_probability(&params, &g, &o1).unwrap(),
            1.0 - (-0.5_f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            interval_probability(&params, &g, &o1).unwrap(),
            0.393_469,
            max_relative = 1e-5
        );
        let o0 = obs(1.0, false, &[]);
        let sum = interval_probability(&params, &g, &o0).unwrap()
            + interval_probability(&params, &g, &o1).unwrap();
        assert_relative_eq!(sum, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn log_likelihood_empty_and_single() {
        let g = grid(&[1.0]);
        let empty =
            CurrentStatusDataset::from_parts(Vec::<Observation<f64>>::new(), g.clone()).unwrap();
        let params = ModelParams::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(log_likelihood(&params, &empty), 0.0);

        let params = ModelParams::new(vec![0.0], vec![(-(0.5_f64.ln())).ln()]).unwrap();
        let one = CurrentStatusDataset::from_observations(vec![obs(1.0, false, &[])]).unwrap();
        assert_relative_eq!(log_likelihood(&params, &one), -0.5, max_relative = 1e-12);
    }

    /// Direct scalar re-implementation of the censored-likelihood product,
    /// term by term, with no shared code.
    #[test]
    fn log_likelihood_matches_scalar_oracle() {
        let data = CurrentStatusDataset::from_observations(vec![
            obs(0.5, true, &[0.7]),
            obs(1.0, false, &[-0.4]),
            obs(1.5, true, &[1.2]),
        ])
        .unwrap();
        let theta = [0.3_f64, -0.6];
        let eta = [-0.5_f64, 0.2, 0.9];
        let params = ModelParams::new(theta.to_vec(), eta.to_vec()).unwrap();

        let mut oracle = 0.0_f64;
        for (u, d, x1) in [(0.5, 1.0, 0.7), (1.0, 0.0, -0.4), (1.5, 1.0, 1.2)] {
            let mut hazard = 0.0_f64;
            for (l, &s) in [0.5, 1.0, 1.5].iter().enumerate() {
                if s <= u {
                    hazard += eta[l].exp();
                }
            }
            let f: f64 = 1.0 - (-hazard).exp();
            let elp = (theta[0] + theta[1] * x1).exp();
            let spop = (-elp * f).exp();
            oracle += if d == 1.0 {
                (1.0 - spop).ln()
            } else {
                spop.ln()
            };
        }
        assert_relative_eq!(log_likelihood(&params, &data), oracle, epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_decomposes_over_observations() {
        let all = vec![
            obs(0.5, true, &[0.7]),
            obs(1.0, false, &[-0.4]),
            obs(1.5, true, &[1.2]),
            obs(0.5, false, &[0.1]),
        ];
        let data = CurrentStatusDataset::from_observations(all.clone()).unwrap();
        let params = ModelParams::new(vec![0.2, 0.1], vec![-0.3, 0.4, -0.8]).unwrap();
        let total = log_likelihood(&params, &data);
        // split at every cut point; parts must share the full grid
        for cut in 1..all.len() {
            let left =
                CurrentStatusDataset::from_parts(all[..cut].to_vec(), data.grid().clone()).unwrap();
            let right =
                CurrentStatusDataset::from_parts(all[cut..].to_vec(), data.grid().clone()).unwrap();
            let sum = log_likelihood(&params, &left) + log_likelihood(&params, &right);
            assert_relative_eq!(total, sum, epsilon = 1e-12);
        }
    }

    fn unit_prior(k1: usize, n0: usize) -> PriorSpec<f64> {
        PriorSpec::new(
            vec![0.0; k1],
            vec![1.0; k1],
            vec![0.0; n0],
            EtaCovariance::Explicit(Matrix::identity(n0)),
        )
        .unwrap()
    }

    #[test]
    fn log_prior_at_means_is_normalizer_only() {
        let prior = PriorSpec::new(
            vec![0.5, -1.0],
            vec![2.0, 3.0],
            vec![0.1],
            EtaCovariance::Ar1 {
                scale: 0.7,
                rho: 0.4,
            },
        )
        .unwrap();
        let params = ModelParams::new(vec![0.5, -1.0], vec![0.1]).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let want = -0.5 * ((two_pi.powi(2) * 2.0 * 3.0).ln() + (two_pi * 0.7).ln());
        assert_relative_eq!(log_prior(&params, &prior), want, max_relative = 1e-12);
    }

    #[test]
    fn log_prior_univariate_standard_normal_at_one() {
        let prior = unit_prior(1, 1);
        let params = ModelParams::new(vec![1.0], vec![0.0]).unwrap();
        let want = -(2.0 * std::f64::consts::PI).ln() - 0.5;
        assert_relative_eq!(log_prior(&params, &prior), want, max_relative = 1e-12);
    }

    /// Dense-solve oracle for the AR(1) closed form: straightforward Gaussian
    /// elimination on the expanded covariance, implemented only here.
    #[test]
    fn ar1_log_density_matches_dense_oracle() {
        let n0 = 3;
        let (scale, rho) = (0.8_f64, 0.3_f64);
        let mu = vec![0.2, -0.1, 0.5];
        let prior = PriorSpec::new(
            vec![0.0],
            vec![1.0],
            mu.clone(),
            EtaCovariance::Ar1 { scale, rho },
        )
        .unwrap();
        let eta = vec![0.7, -0.9, 0.15];

        // oracle: build Sigma, solve with partial-pivot elimination
        let mut sig = vec![vec![0.0; n0]; n0];
        for (i, row) in sig.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = scale * rho.powi((i as i32 - j as i32).abs());
            }
        }
        let z: Vec<f64> = eta.iter().zip(&mu).map(|(a, b)| a - b).collect();
        let (solved, det) = gauss_solve(&sig, &z);
        let quad: f64 = z.iter().zip(&solved).map(|(a, b)| a * b).sum();
        let want = -0.5 * (n0 as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad)
            - 0.5 * ((2.0 * std::f64::consts::PI).ln() + 0.0 + 0.0);
        // strip the theta part (theta at mean, variance 1: contributes -0.5 ln(2pi))
        let params = ModelParams::new(vec![0.0], eta).unwrap();
        let got = log_prior(&params, &prior);
        assert_relative_eq!(got, want, epsilon = 1e-10);
    }

    fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        let mut det = 1.0;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                .unwrap();
            if piv != col {
                m.swap(col, piv);
                x.swap(col, piv);
                det = -det;
            }
            det *= m[col][col];
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                x[row] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            x[col] /= m[col][col];
            for row in 0..col {
                x[row] -= m[row][col] * x[col];
                m[row][col] = 0.0;
            }
        }
        (x, det)
    }

    #[test]
    fn explicit_covariance_requires_spd() {
        let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0]]);
        assert!(PriorSpec::new(
            vec![0.0],
            vec![1.0],
            vec![0.0, 0.0],
            EtaCovariance::Explicit(asym)
        )
        .is_err());
        let indef = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(PriorSpec::new(
            vec![0.0],
            vec![1.0],
            vec![0.0, 0.0],
            EtaCovariance::Explicit(indef)
        )
        .is_err());
    }

    #[test]
    fn log_posterior_reduces_to_prior_on_empty_data() {
        let g = grid(&[1.0]);
        let empty = CurrentStatusDataset::from_parts(Vec::<Observation<f64>>::new(), g).unwrap();
        let prior = unit_prior(1, 1);
        let params = ModelParams::new(vec![0.3], vec![-0.4]).unwrap();
        assert_relative_eq!(
            log_posterior(&params, &empty, &prior),
            log_prior(&params, &prior),
            max_relative = 1e-14
        );
    }

    #[test]
    fn log_posterior_is_sum_of_parts() {
        let data = CurrentStatusDataset::from_observations(vec![
            obs(0.5, true, &[0.7]),
            obs(1.0, false, &[-0.4]),
            obs(1.5, true, &[1.2]),
        ])
        .unwrap();
        let prior = unit_prior(2, 3);
        let params = ModelParams::new(vec![0.2, -0.3], vec![0.1, 0.5, -0.2]).unwrap();
        assert_relative_eq!(
            log_posterior(&params, &data, &prior),
            log_prior(&params, &prior) + log_likelihood(&params, &data),
            max_relative = 1e-14
        );
    }

    #[test]
    fn flat_prior_posterior_tracks_likelihood() {
        let data = CurrentStatusDataset::from_observations(vec![
            obs(0.5, true, &[0.7]),
            obs(1.0, false, &[-0.4]),
        ])
        .unwrap();
        let flat = PriorSpec::new(
            vec![0.0, 0.0],
            vec![1e4, 1e4],
            vec![0.0, 0.0],
            EtaCovariance::Explicit(Matrix::identity(2).scaled(1e4)),
        )
        .unwrap();
        let p1 = ModelParams::new(vec![0.2, -0.1], vec![0.0, 0.3]).unwrap();
        let p2 = ModelParams::new(vec![-0.4, 0.5], vec![0.2, -0.6]).unwrap();
        let post_gap = log_posterior(&p1, &data, &flat) - log_posterior(&p2, &data, &flat);
        let lik_gap = log_likelihood(&p1, &data) - log_likelihood(&p2, &data);
        assert!((post_gap - lik_gap).abs() < 1e-2);
    }

    /// Central-difference gradients at two step sizes must agree, a
    /// smoothness sanity check on the posterior surface.
    #[test]
    fn posterior_gradient_step_size_consistency() {
        let data = CurrentStatusDataset::from_observations(vec![
            obs(0.5, true, &[0.7]),
            obs(1.0, false, &[-0.4]),
            obs(1.5, true, &[1.2]),
        ])
        .unwrap();
        let prior = unit_prior(2, 3);
        let at: Vec<f64> = vec![0.2, -0.3, 0.1, 0.5, -0.2];
        let grad = |h_scale: f64| -> Vec<f64> {
            (0..at.len())
                .map(|i| {
                    let h = h_scale * (1.0 + at[i].abs());
                    let mut plus = at.clone();
                    plus[i] += h;
                    let mut minus = at.clone();
                    minus[i] -= h;
                    (log_posterior_flat(&plus, &data, &prior)
                        - log_posterior_flat(&minus, &data, &prior))
                        / (2.0 * h)
                })
                .collect()
        };
        let g4 = grad(1e-4);
        let g5 = grad(1e-5);
        for (a, b) in g4.iter().zip(&g5) {
            let denom = 1.0_f64.max(a.abs());
            assert!((a - b).abs() / denom < 1e-3, "{a} vs {b}");
        }
    }
}
