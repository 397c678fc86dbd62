//! Gaussian mixture drivers: classical EM and the spherical
//! fixed-point weight update.
//!
//! Both share every piece of machinery except the mixture weight
//! update: EM sets the weights to the average responsibilities, the
//! fixed-point method multiplies each weight by the squared shifted
//! responsibility sum and renormalizes. Means and covariances always
//! take the usual M-step, so the two solvers walk the same parameter
//! space and share fixed points.

use ndarray::{Array1, Array2};

use super::{f_gap_met, SolverConfig, StopReason};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, norm2, Rng};
use crate::problems::{m_step, GmmProblem};

/// A mixture weight below this is treated as a collapsed component.
pub const COLLAPSE_WEIGHT: f64 = 1e-12;

/// Starting point for a mixture fit.
#[derive(Clone, Debug)]
pub enum GmmInit {
    /// Deterministic random initialization: uniform weights, means
    /// scattered around the data mean at the scale of the per-feature
    /// spread, diagonal covariances from the pooled variance.
    Seeded(u64),
    /// Explicit parameters. Weights must be positive; they are
    /// normalized to sum to one.
    Given {
        weights: Array1<f64>,
        means: Vec<Array1<f64>>,
        covariances: Vec<Array2<f64>>,
    },
}

/// A fitted mixture. `loglik_trace[j]` is the log-likelihood after `j`
/// parameter updates, so the trace has `iterations + 1` entries.
#[derive(Clone, Debug)]
pub struct GmmFit {
    pub weights: Array1<f64>,
    pub means: Vec<Array1<f64>>,
    pub covariances: Vec<Array2<f64>>,
    pub loglik_trace: Vec<f64>,
    pub best_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl GmmFit {
    pub fn final_loglik(&self) -> f64 {
        *self
            .loglik_trace
            .last()
            .expect("log-likelihood trace is never empty")
    }
}

#[derive(Clone, Copy)]
enum WeightUpdate {
    Em,
    FixedPoint,
}

/// Expectation-maximization. The log-likelihood trace is
/// non-decreasing up to the covariance floor's interference.
pub fn em_gmm(problem: &GmmProblem, init: &GmmInit, cfg: &SolverConfig) -> Result<GmmFit> {
    run(problem, init, cfg, WeightUpdate::Em)
}

/// EM with the weight step replaced by the spherical fixed-point
/// update `pi_k <- pi_k (sigma + t_k)^2 / Z`, where `t_k` is the
/// responsibility mass of component `k` divided by its weight and
/// `sigma` defaults to 1 (`cfg.shift` overrides). Shares its fixed
/// points with [`em_gmm`].
pub fn gmm_sci_pi(problem: &GmmProblem, init: &GmmInit, cfg: &SolverConfig) -> Result<GmmFit> {
    run(problem, init, cfg, WeightUpdate::FixedPoint)
}

fn resolve_init(
    problem: &GmmProblem,
    init: &GmmInit,
) -> Result<(Array1<f64>, Vec<Array1<f64>>, Vec<Array2<f64>>)> {
    let k = problem.components();
    let q = problem.feature_dim();
    match init {
        GmmInit::Given {
            weights,
            means,
            covariances,
        } => {
            if weights.len() != k || means.len() != k || covariances.len() != k {
                return Err(Error::Input(format!(
                    "init expects {} components, got weights/means/covariances of {}/{}/{}",
                    k,
                    weights.len(),
                    means.len(),
                    covariances.len()
                )));
            }
            if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::Input(
                    "initial weights must be positive and finite".into(),
                ));
            }
            for (c, m) in means.iter().enumerate() {
                if m.len() != q {
                    return Err(Error::Input(format!(
                        "initial mean {} has dimension {}, expected {}",
                        c,
                        m.len(),
                        q
                    )));
                }
            }
            for (c, s) in covariances.iter().enumerate() {
                if s.dim() != (q, q) {
                    return Err(Error::Input(format!(
                        "initial covariance {} has shape {:?}, expected ({}, {})",
                        c,
                        s.dim(),
                        q,
                        q
                    )));
                }
            }
            let total = weights.sum();
            Ok((weights / total, means.clone(), covariances.clone()))
        }
        GmmInit::Seeded(seed) => {
            let mut rng = Rng::new(*seed);
            let data = problem.data();
            let n = problem.observations() as f64;
            let mut mean = Array1::zeros(q);
            for row in data.outer_iter() {
                mean = mean + row;
            }
            mean /= n;
            let mut var = Array1::zeros(q);
            for row in data.outer_iter() {
                for j in 0..q {
                    let d = row[j] - mean[j];
                    var[j] += d * d;
                }
            }
            var /= n;
            let std = var.mapv(f64::sqrt);
            let weights = Array1::from_elem(k, 1.0 / k as f64);
            let mut means = Vec::with_capacity(k);
            for _ in 0..k {
                let g = rng.normal_vec(q);
                means.push(&mean + &(&std * &g));
            }
            let mut cov = Array2::zeros((q, q));
            for j in 0..q {
                cov[[j, j]] = var[j] + problem.cov_floor();
            }
            let covs = vec![cov; k];
            Ok((weights, means, covs))
        }
    }
}

fn run(
    problem: &GmmProblem,
    init: &GmmInit,
    cfg: &SolverConfig,
    update: WeightUpdate,
) -> Result<GmmFit> {
    cfg.validate()?;
    let (mut pi, mut means, mut covs) = resolve_init(problem, init)?;
    let k = problem.components();
    let n = problem.observations() as f64;
    let sigma = cfg.shift.unwrap_or(1.0);

    let mut trace: Vec<f64> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIter;
    let mut converged = false;

    for iter in 0..cfg.max_iter {
        let log_dens = problem.log_densities(&means, &covs)?;
        let x = pi.mapv(f64::sqrt);
        let (resp, ll) = problem.responsibilities(&x, &log_dens)?;
        trace.push(ll);
        if ll > best {
            best = ll;
        }
        if f_gap_met(cfg, ll) {
            stop = StopReason::FTol;
            converged = true;
            break;
        }

        let mut col_mass = Array1::zeros(k);
        for c in 0..k {
            col_mass[c] = resp.column(c).sum();
        }
        let pi_new = match update {
            WeightUpdate::Em => &col_mass / n,
            WeightUpdate::FixedPoint => {
                let mut w = Array1::zeros(k);
                for c in 0..k {
                    let t = col_mass[c] / pi[c];
                    let s = sigma + t;
                    w[c] = pi[c] * s * s;
                }
                let total = w.sum();
                if !(total > 0.0) || !total.is_finite() {
                    return Err(Error::Numeric(
                        "weight fixed-point update degenerated".into(),
                    ));
                }
                w / total
            }
        };
        for c in 0..k {
            if !(pi_new[c] >= COLLAPSE_WEIGHT) {
                return Err(Error::Numeric(format!(
                    "component {} has collapsed (weight {:e})",
                    c, pi_new[c]
                )));
            }
        }

        let (means_new, covs_new) = m_step(problem.data(), &resp, problem.cov_floor())?;

        let mut step = norm2(&(&pi_new - &pi));
        for c in 0..k {
            step = step.max(norm2(&(&means_new[c] - &means[c])));
            step = step.max(frobenius(&(&covs_new[c] - &covs[c])));
        }
        pi = pi_new;
        means = means_new;
        covs = covs_new;
        iterations = iter + 1;
        if step < cfg.x_tol {
            stop = StopReason::XTol;
            converged = true;
            break;
        }
    }

    // The loop records the likelihood before each update; top the trace
    // up so the final parameters are scored too.
    if trace.len() == iterations {
        let log_dens = problem.log_densities(&means, &covs)?;
        let x = pi.mapv(f64::sqrt);
        let (_, ll) = problem.responsibilities(&x, &log_dens)?;
        trace.push(ll);
        if ll > best {
            best = ll;
        }
    }

    Ok(GmmFit {
        weights: pi,
        means,
        covariances: covs,
        loglik_trace: trace,
        best_loglik: best,
        converged,
        iterations,
        stop_reason: stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Two clearly separated 1-D clusters around 0 and 5.
    fn two_cluster_data(n_per: usize, seed: u64) -> Array2<f64> {
        let mut rng = Rng::new(seed);
        let mut data = Array2::zeros((2 * n_per, 1));
        for i in 0..n_per {
            data[[i, 0]] = 0.5 * rng.normal();
            data[[n_per + i, 0]] = 5.0 + 0.5 * rng.normal();
        }
        data
    }

    #[test]
    fn em_recovers_separated_clusters() {
        let data = two_cluster_data(60, 9);
        let p = GmmProblem::new(data, 2, None).unwrap();
        let fit = em_gmm(&p, &GmmInit::Seeded(3), &SolverConfig::default()).unwrap();
        assert!(fit.converged, "stop reason {:?}", fit.stop_reason);
        let mut centers: Vec<f64> = fit.means.iter().map(|m| m[0]).collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((centers[0] - 0.0).abs() <= 0.3, "centers {:?}", centers);
        assert!((centers[1] - 5.0).abs() <= 0.3, "centers {:?}", centers);
        assert!((fit.weights[0] - 0.5).abs() <= 0.05);
        assert!((fit.weights.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn em_loglik_is_monotone() {
        let data = two_cluster_data(40, 21);
        let p = GmmProblem::new(data, 2, None).unwrap();
        let cfg = SolverConfig {
            max_iter: 60,
            x_tol: 0.0,
            ..SolverConfig::default()
        };
        let fit = em_gmm(&p, &GmmInit::Seeded(5), &cfg).unwrap();
        for w in fit.loglik_trace.windows(2) {
            // The covariance floor nudges the exact EM step, so allow
            // a sliver of slack.
            assert!(
                w[1] >= w[0] - 1e-7 * (1.0 + w[0].abs()),
                "log-likelihood dropped: {} -> {}",
                w[0],
                w[1]
            );
        }
        assert_eq!(fit.loglik_trace.len(), fit.iterations + 1);
    }

    #[test]
    fn fixed_point_update_reaches_the_em_fixed_point() {
        let data = two_cluster_data(50, 77);
        let p = GmmProblem::new(data, 2, None).unwrap();
        let cfg = SolverConfig {
            x_tol: 1e-10,
            ..SolverConfig::default()
        };
        let em = em_gmm(&p, &GmmInit::Seeded(11), &cfg).unwrap();
        let fp = gmm_sci_pi(&p, &GmmInit::Seeded(11), &cfg).unwrap();
        assert!(em.converged && fp.converged);
        // Same initialization, same basin: the two weight updates share
        // fixed points.
        let a = em.final_loglik();
        let b = fp.final_loglik();
        assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{} vs {}", a, b);
        for (u, v) in em.weights.iter().zip(fp.weights.iter()) {
            assert!((u - v).abs() <= 1e-4, "weights {} vs {}", u, v);
        }
        // At an EM fixed point the weights equal the mean
        // responsibilities.
        let log_dens = p.log_densities(&em.means, &em.covariances).unwrap();
        let x = em.weights.mapv(f64::sqrt);
        let (resp, _) = p.responsibilities(&x, &log_dens).unwrap();
        let n = p.observations() as f64;
        for c in 0..2 {
            let avg = resp.column(c).sum() / n;
            assert!((em.weights[c] - avg).abs() <= 1e-8);
        }
    }

    #[test]
    fn seeded_runs_are_deterministic() {
        let data = two_cluster_data(30, 1);
        let p = GmmProblem::new(data, 2, None).unwrap();
        let cfg = SolverConfig::default();
        let f1 = gmm_sci_pi(&p, &GmmInit::Seeded(4), &cfg).unwrap();
        let f2 = gmm_sci_pi(&p, &GmmInit::Seeded(4), &cfg).unwrap();
        assert_eq!(f1.weights, f2.weights);
        assert_eq!(f1.loglik_trace, f2.loglik_trace);
        assert_eq!(f1.means, f2.means);
    }

    #[test]
    fn given_init_is_validated() {
        let data = two_cluster_data(10, 2);
        let p = GmmProblem::new(data, 2, None).unwrap();
        let bad_weights = GmmInit::Given {
            weights: array![0.5, -0.5],
            means: vec![array![0.0], array![5.0]],
            covariances: vec![Array2::eye(1), Array2::eye(1)],
        };
        assert!(matches!(
            em_gmm(&p, &bad_weights, &SolverConfig::default()),
            Err(Error::Input(_))
        ));
        let wrong_count = GmmInit::Given {
            weights: array![1.0],
            means: vec![array![0.0]],
            covariances: vec![Array2::eye(1)],
        };
        assert!(em_gmm(&p, &wrong_count, &SolverConfig::default()).is_err());
    }

    #[test]
    fn collapsed_component_is_a_numeric_error() {
        let data = two_cluster_data(20, 6);
        let p = GmmProblem::new(data, 2, None).unwrap();
        // The second component sits absurdly far away with a tight
        // covariance: its responsibilities underflow to zero.
        let init = GmmInit::Given {
            weights: array![0.5, 0.5],
            means: vec![array![2.5], array![1.0e8]],
            covariances: vec![Array2::eye(1), Array2::eye(1) * 1e-4],
        };
        let err = em_gmm(&p, &init, &SolverConfig::default()).unwrap_err();
        match err {
            Error::Numeric(msg) => assert!(msg.contains("component 1"), "message: {}", msg),
            other => panic!("expected a numeric error, got {:?}", other),
        }
    }

    #[test]
    fn shared_seed_gives_both_methods_the_same_start() {
        let data = two_cluster_data(25, 13);
        let p = GmmProblem::new(data, 2, None).unwrap();
        let cfg = SolverConfig {
            max_iter: 1,
            x_tol: 0.0,
            ..SolverConfig::default()
        };
        let em = em_gmm(&p, &GmmInit::Seeded(99), &cfg).unwrap();
        let fp = gmm_sci_pi(&p, &GmmInit::Seeded(99), &cfg).unwrap();
        assert_eq!(em.loglik_trace[0], fp.loglik_trace[0]);
    }
}
