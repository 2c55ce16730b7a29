//! Derivative-free minimization and finite-difference curvature, used to seed
//! the sampler: a Nelder-Mead simplex for the posterior mode and a
//! central-difference Hessian for the proposal covariance.

use crate::linalg::Matrix;
use crate::real::Real;

pub struct NelderMeadResult<R> {
    pub x: Vec<R>,
    pub f: R,
    pub evaluations: usize,
    pub converged: bool,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink
/// 1/2) on an objective to be minimized. Convergence is declared when the
/// simplex function-value spread falls below `tol * max(1, |f_best|)`.
pub fn nelder_mead<R: Real>(
    f: impl Fn(&[R]) -> R,
    x0: &[R],
    max_evals: usize,
    tol: R,
) -> NelderMeadResult<R> {
    let d = x0.len();
    let mut evals = 0usize;
    let eval = |x: &[R], evals: &mut usize| -> R {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            R::infinity()
        } else {
            v
        }
    };

    // initial simplex: x0 plus one step along each axis
    let mut simplex: Vec<(Vec<R>, R)> = Vec::with_capacity(d + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..d {
        let mut xi = x0.to_vec();
        xi[i] = xi[i] + R::of(0.1) * (R::one() + xi[i].abs());
        let fi = eval(&xi, &mut evals);
        simplex.push((xi, fi));
    }

    let order = |s: &mut Vec<(Vec<R>, R)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("NaN mapped to infinity"));
    };
    order(&mut simplex);

    let mut converged = false;
    while evals < max_evals {
        let spread = simplex[d].1 - simplex[0].1;
        if spread <= tol * R::one().max(simplex[0].1.abs()) {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![R::zero(); d];
        for (x, _) in simplex.iter().take(d) {
            for (c, &xi) in centroid.iter_mut().zip(x) {
                *c = *c + xi;
            }
        }
        let df = R::of(d as f64);
        for c in &mut centroid {
            *c = *c / df;
        }

        let worst = simplex[d].clone();
        let point_along = |t: R| -> Vec<R> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let reflected = point_along(R::one());
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = point_along(R::of(2.0));
            let fe = eval(&expanded, &mut evals);
            simplex[d] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                point_along(R::of(0.5))
            } else {
                point_along(R::of(-0.5))
            };
            let fc = eval(&contracted, &mut evals);
            if fc < worst.1.min(fr) {
                simplex[d] = (contracted, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                let half = R::of(0.5);
                for entry in simplex.iter_mut().skip(1) {
                    for (xi, &bi) in entry.0.iter_mut().zip(&best) {
                        *xi = bi + half * (*xi - bi);
                    }
                    entry.1 = eval(&entry.0.clone(), &mut evals);
                }
            }
        }
        order(&mut simplex);
    }

    NelderMeadResult {
        x: simplex[0].0.clone(),
        f: simplex[0].1,
        evaluations: evals,
        converged,
    }
}

/// Central-difference Hessian with per-coordinate step h_i = h0 * (1 + |x_i|).
pub fn numerical_hessian<R: Real>(f: impl Fn(&[R]) -> R, x: &[R], h0: R) -> Matrix<R> {
    let d = x.len();
    let h: Vec<R> = x.iter().map(|&xi| h0 * (R::one() + xi.abs())).collect();
    let f0 = f(x);
    let mut hess = Matrix::zeros(d, d);
    let mut work = x.to_vec();
    for i in 0..d {
        // diagonal: (f(x+h) - 2 f(x) + f(x-h)) / h^2
        work[i] = x[i] + h[i];
        let fp = f(&work);
        work[i] = x[i] - h[i];
        let fm = f(&work);
        work[i] = x[i];
        hess[(i, i)] = (fp - R::of(2.0) * f0 + fm) / (h[i] * h[i]);
        for j in i + 1..d {
            let probe = |si: R, sj: R, work: &mut Vec<R>| -> R {
                work[i] = x[i] + si * h[i];
                work[j] = x[j] + sj * h[j];
                let v = f(work);
                work[i] = x[i];
                work[j] = x[j];
                v
            };
            let fpp = probe(R::one(), R::one(), &mut work);
            let fpm = probe(R::one(), -R::one(), &mut work);
            let fmp = probe(-R::one(), R::one(), &mut work);
            let fmm = probe(-R::one(), -R::one(), &mut work);
            let v = (fpp - fpm - fmp + fmm) / (R::of(4.0) * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimizes_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2) + 2.0;
        let r = nelder_mead(f, &[0.0, 0.0], 4000, 1e-10);
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 1.5, epsilon = 1e-4);
        assert_relative_eq!(r.x[1], -0.5, epsilon = 1e-4);
        assert_relative_eq!(r.f, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn minimizes_one_dimensional_objective() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2);
        let r = nelder_mead(f, &[-2.0], 2000, 1e-12);
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 3.0, epsilon = 1e-5);
    }

    #[test]
    fn handles_rosenbrock_reasonably() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], 20000, 1e-12);
        assert!(r.f < 1e-8, "f = {}", r.f);
    }

    #[test]
    fn nan_objective_treated_as_infinite() {
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                (x[0] - 2.0).powi(2)
            }
        };
        let r = nelder_mead(f, &[1.0], 2000, 1e-10);
        assert_relative_eq!(r.x[0], 2.0, epsilon = 1e-4);
    }

    /// Quadratic with known curvature: the numerical Hessian must recover Q.
    #[test]
    fn hessian_recovers_known_quadratic_curvature() {
        let q = [[4.0, 1.0, 0.0], [1.0, 3.0, -0.5], [0.0, -0.5, 2.0]];
        let f = |x: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += 0.5 * x[i] * q[i][j] * x[j];
                }
            }
            s + 0.7 * x[0] - 0.2 * x[2] + 5.0
        };
        let h = numerical_hessian(f, &[0.3, -0.8, 1.1], 1e-4);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(h[(i, j)], q[i][j], epsilon = 1e-4);
            }
        }
    }
}
