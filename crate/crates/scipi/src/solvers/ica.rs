//! One-unit ICA extraction on whitened data.
//!
//! [`fast_ica`] is the classical kurtosis fixed point
//! `x <- E[z (z^T x)^3] - 3 x` (normalized); [`ica_sci_pi`] applies
//! the generic fixed-point update to the squared-kurtosis objective of
//! [`KurtosisIca`], so its iterates coincide with what [`super::sci_pi`]
//! produces on that problem. Both updates carry their own scaling, so
//! the spherical shift in the configuration is ignored here.

use ndarray::Array1;

use super::{f_gap_met, SolveResult, SolverConfig, StopReason, Tracer, ZERO_GRADIENT_NORM};
use crate::error::{Error, Result};
use crate::linalg::{norm2, normalize_unit};
use crate::problems::{KurtosisIca, ScaleInvariantProblem};

/// Classical one-unit FastICA with the cubic nonlinearity.
///
/// The fixed-point direction is sign-blind, so each new iterate is
/// flipped toward the previous one; that makes the step norm measure
/// genuine movement and keeps the trace comparable.
pub fn fast_ica(problem: &KurtosisIca, x0: &Array1<f64>, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::Input(format!(
            "start point has dimension {}, problem expects {}",
            x0.len(),
            problem.dim()
        )));
    }
    let w = problem.data();
    let n = w.nrows() as f64;
    let mut x = normalize_unit(x0)?;
    let mut tracer = Tracer::new(cfg, problem.dim(), false)?;
    tracer.record(problem.value(&x)?, &x, None);

    let mut iterations = 0;
    let mut stop = StopReason::MaxIter;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let s = w.dot(&x);
        let s2 = s.iter().map(|t| t * t).sum::<f64>();
        let cubed = s.mapv(|t| t * t * t);
        let mut u = w.t().dot(&cubed) / n;
        u.scaled_add(-3.0 * s2 / n, &x);
        let un = norm2(&u);
        if !un.is_finite() {
            return Err(Error::Numeric("update direction is not finite".into()));
        }
        if un < ZERO_GRADIENT_NORM {
            stop = StopReason::ZeroGradient;
            break;
        }
        let mut x_new = u / un;
        if x_new.dot(&x) < 0.0 {
            x_new.mapv_inplace(|t| -t);
        }
        let step = norm2(&(&x_new - &x));
        x = x_new;
        iterations += 1;
        let f = problem.value(&x)?;
        tracer.record_step(step);
        tracer.record(f, &x, None);
        if step < cfg.x_tol {
            stop = StopReason::XTol;
            converged = true;
            break;
        }
        if f_gap_met(cfg, f) {
            stop = StopReason::FTol;
            converged = true;
            break;
        }
    }
    Ok(tracer.finish(x, None, converged, iterations, stop))
}

/// The fixed-point update for the squared-kurtosis objective,
/// `x <- W^T [((W x)^4 - 3) (W x)^3]` normalized.
///
/// This is the gradient direction of [`KurtosisIca`] up to a positive
/// constant, so the iterates match [`super::sci_pi`] on that problem.
pub fn ica_sci_pi(
    problem: &KurtosisIca,
    x0: &Array1<f64>,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::Input(format!(
            "start point has dimension {}, problem expects {}",
            x0.len(),
            problem.dim()
        )));
    }
    let w = problem.data();
    let mut x = normalize_unit(x0)?;
    let mut tracer = Tracer::new(cfg, problem.dim(), false)?;
    tracer.record(problem.value(&x)?, &x, None);

    let mut iterations = 0;
    let mut stop = StopReason::MaxIter;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let s = w.dot(&x);
        let weights = s.mapv(|t| (t.powi(4) - 3.0) * t.powi(3));
        let u = w.t().dot(&weights);
        let un = norm2(&u);
        if !un.is_finite() {
            return Err(Error::Numeric("update direction is not finite".into()));
        }
        if un < ZERO_GRADIENT_NORM {
            stop = StopReason::ZeroGradient;
            break;
        }
        let x_new = u / un;
        let step = norm2(&(&x_new - &x));
        x = x_new;
        iterations += 1;
        let f = problem.value(&x)?;
        tracer.record_step(step);
        tracer.record(f, &x, None);
        if step < cfg.x_tol {
            stop = StopReason::XTol;
            converged = true;
            break;
        }
        if f_gap_met(cfg, f) {
            stop = StopReason::FTol;
            converged = true;
            break;
        }
    }
    Ok(tracer.finish(x, None, converged, iterations, stop))
}
