//! Predicted and measured convergence rates.
//!
//! Near a solution `x*` the fixed-point iteration contracts the
//! alignment error `1 - (x^T x*)^2` linearly, and the factor is
//! governed by the Hessian at the solution: with
//! `lambda* = grad f(x*)^T x*` and `lambda_bar_2` the spectral norm of
//! the Hessian restricted to the orthogonal complement of `x*`, the
//! squared-error contraction factor is `(lambda_bar_2 / lambda*)^2`.
//! Two-block and partially invariant problems get a 2x2 coupling
//! matrix whose spectral radius plays the same role for the unsquared
//! block errors. The empirical counterparts fit a line to the log
//! error trace of an actual run.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{norm2, projected_hessian_norm, spectral_norm, sym_eig, EigSort};
use crate::problems::{BlockProblem, PartialProblem, ScaleInvariantProblem};
use crate::solvers::SolveResult;

use super::invariance::STATIONARITY_TOL;

/// Window for the log-linear fit of an error trace: points with error
/// in `[FIT_FLOOR, FIT_CEIL]` participate.
pub const FIT_FLOOR: f64 = 1e-12;
pub const FIT_CEIL: f64 = 1e-3;
/// Minimum number of trace points inside the window for a fit.
pub const FIT_MIN_POINTS: usize = 10;

/// Local rate report for the single-block iteration.
#[derive(Clone, Debug)]
pub struct RateReport {
    /// Multiplier `grad f(x*)^T x*`.
    pub lambda_star: f64,
    /// Spectral norm of the Hessian projected off `x*`.
    pub lambda_bar_2: f64,
    /// Hessian spectrum at `x*`, by descending magnitude.
    pub eigenvalues: Vec<f64>,
    /// Matching eigenvectors, one per column.
    pub eigenvectors: Array2<f64>,
    /// `(lambda_bar_2 / lambda*)^2`, the predicted contraction factor
    /// of the squared alignment error; present only when the local
    /// convergence condition holds.
    pub rho_predicted: Option<f64>,
    /// Measured contraction factor, when a trace has been fitted.
    pub rho_empirical: Option<f64>,
    /// `lambda* > 0` and `lambda_bar_2 < lambda*`.
    pub condition_ok: bool,
}

/// Compute the local rate ingredients at a stationary point.
///
/// The point must lie on the unit sphere and satisfy the first-order
/// condition to [`STATIONARITY_TOL`]; otherwise this fails with a
/// precondition error quoting the measured residual. A nonpositive
/// multiplier or a closing eigengap is not an error: the report comes
/// back with `condition_ok == false` and no predicted factor.
pub fn predicted_rate<P>(problem: &P, x_star: &Array1<f64>) -> Result<RateReport>
where
    P: ScaleInvariantProblem + ?Sized,
{
    if x_star.len() != problem.dim() {
        return Err(Error::Input(format!(
            "point has dimension {}, problem expects {}",
            x_star.len(),
            problem.dim()
        )));
    }
    let n = norm2(x_star);
    if !n.is_finite() || (n - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "point must lie on the unit sphere (norm {})",
            n
        )));
    }
    let g = problem.gradient(x_star)?;
    let lambda_star = g.dot(x_star);
    let kkt = norm2(&(&g - &(x_star * lambda_star)));
    if kkt > STATIONARITY_TOL * (1.0 + norm2(&g)) {
        return Err(Error::Precondition(format!(
            "point is not stationary: KKT residual {:e}",
            kkt
        )));
    }
    let h = problem.hessian(x_star)?;
    let lambda_bar_2 = projected_hessian_norm(&h, x_star)?;
    let eig = sym_eig(&h, EigSort::AbsDesc)?;
    let condition_ok = lambda_star > 0.0 && lambda_bar_2 < lambda_star;
    let rho_predicted = if condition_ok {
        let r = lambda_bar_2 / lambda_star;
        Some(r * r)
    } else {
        None
    };
    Ok(RateReport {
        lambda_star,
        lambda_bar_2,
        eigenvalues: eig.values.clone(),
        eigenvectors: eig.vectors.clone(),
        rho_predicted,
        rho_empirical: None,
        condition_ok,
    })
}

/// Rate report for the two-block iterations (joint or partial).
///
/// `rho` bounds the per-iteration contraction of the unsquared block
/// error pair, so a squared error trace contracts at `rho^2`.
#[derive(Clone, Debug)]
pub struct BlockRateReport {
    pub lambda_star: f64,
    pub lambda_bar_2: f64,
    pub s_star: f64,
    pub s_bar_2: f64,
    /// Spectral norm of the cross-derivative block.
    pub nu: f64,
    /// Spectral radius of the coupling matrix (closed form); present
    /// only when `condition_ok`.
    pub rho: Option<f64>,
    /// The same radius through the symmetric eigensolver, as a
    /// cross-check.
    pub rho_eig: Option<f64>,
    /// Whether the coupling is weak enough for local convergence.
    pub coupling_ok: bool,
    /// Positivity of the multipliers and both eigengaps.
    pub condition_ok: bool,
}

/// Spectral radius of the 2x2 coupling matrix
/// `[[a, e/b], [e/c, d]]` with `a, d >= 0`, `e >= 0`, `b, c > 0`.
///
/// Off-diagonal entries enter only through their product
/// `e^2 / (b c)`, so the matrix is similar to a symmetric one and the
/// radius has the closed form
/// `(a + d)/2 + sqrt((a - d)^2/4 + e^2/(b c))`. When `e == 0` the
/// result is exactly `max(a, d)`, with no square-root roundoff.
pub fn spectral_radius_2x2(a: f64, d: f64, e: f64, b: f64, c: f64) -> Result<f64> {
    for (name, v) in [("a", a), ("d", d), ("e", e), ("b", b), ("c", c)] {
        if !v.is_finite() {
            return Err(Error::Input(format!("{} must be finite, got {}", name, v)));
        }
    }
    if a < 0.0 || d < 0.0 || e < 0.0 {
        return Err(Error::Input(
            "entries a, d, e must be nonnegative".into(),
        ));
    }
    if b <= 0.0 || c <= 0.0 {
        return Err(Error::Input("scales b and c must be positive".into()));
    }
    if e == 0.0 {
        return Ok(a.max(d));
    }
    let mid = 0.5 * (a + d);
    let half_gap = 0.5 * (a - d);
    let disc = (half_gap * half_gap + e * e / (b * c)).sqrt();
    Ok((mid + disc).max((mid - disc).abs()))
}

fn radius_via_eigensolver(a: f64, d: f64, e: f64, b: f64, c: f64) -> Result<f64> {
    let g = (e * e / (b * c)).sqrt();
    let m = ndarray::array![[a, g], [g, d]];
    let eig = sym_eig(&m, EigSort::AbsDesc)?;
    Ok(eig.values[0].abs())
}

/// Local rate of the two-block iteration at a joint stationary point.
///
/// Both blocks must be stationary (KKT residual within
/// [`STATIONARITY_TOL`] of zero, relative to the gradient size). The
/// coupling matrix is built from the two projected Hessian norms, the
/// two multipliers, and the spectral norm `nu` of the cross block;
/// `coupling_ok` reports whether
/// `nu^2 < (lambda* - lambda_bar_2)(s* - s_bar_2)`.
pub fn predicted_block_rate<P>(
    problem: &P,
    x_star: &Array1<f64>,
    y_star: &Array1<f64>,
) -> Result<BlockRateReport>
where
    P: BlockProblem + ?Sized,
{
    if x_star.len() != problem.dim_x() || y_star.len() != problem.dim_y() {
        return Err(Error::Input(format!(
            "point has dimensions ({}, {}), problem expects ({}, {})",
            x_star.len(),
            y_star.len(),
            problem.dim_x(),
            problem.dim_y()
        )));
    }
    for (name, v) in [("x", x_star), ("y", y_star)] {
        let n = norm2(v);
        if !n.is_finite() || (n - 1.0).abs() > 1e-8 {
            return Err(Error::Precondition(format!(
                "{} must lie on the unit sphere (norm {})",
                name, n
            )));
        }
    }
    let gx = problem.gradient_x(x_star, y_star)?;
    let gy = problem.gradient_y(x_star, y_star)?;
    let lambda_star = gx.dot(x_star);
    let s_star = gy.dot(y_star);
    let kkt_x = norm2(&(&gx - &(x_star * lambda_star)));
    if kkt_x > STATIONARITY_TOL * (1.0 + norm2(&gx)) {
        return Err(Error::Precondition(format!(
            "x block is not stationary: KKT residual {:e}",
            kkt_x
        )));
    }
    let kkt_y = norm2(&(&gy - &(y_star * s_star)));
    if kkt_y > STATIONARITY_TOL * (1.0 + norm2(&gy)) {
        return Err(Error::Precondition(format!(
            "y block is not stationary: KKT residual {:e}",
            kkt_y
        )));
    }

    let hxx = problem.hessian_xx(x_star, y_star)?;
    let hyy = problem.hessian_yy(x_star, y_star)?;
    let lambda_bar_2 = projected_hessian_norm(&hxx, x_star)?;
    let s_bar_2 = projected_hessian_norm(&hyy, y_star)?;
    let nu = spectral_norm(&problem.hessian_yx(x_star, y_star)?)?;

    let condition_ok =
        lambda_star > 0.0 && s_star > 0.0 && lambda_bar_2 < lambda_star && s_bar_2 < s_star;
    let coupling_ok =
        condition_ok && nu * nu < (lambda_star - lambda_bar_2) * (s_star - s_bar_2);
    let (rho, rho_eig) = if condition_ok {
        let a = lambda_bar_2 / lambda_star;
        let d = s_bar_2 / s_star;
        (
            Some(spectral_radius_2x2(a, d, nu, lambda_star, s_star)?),
            Some(radius_via_eigensolver(a, d, nu, lambda_star, s_star)?),
        )
    } else {
        (None, None)
    };
    Ok(BlockRateReport {
        lambda_star,
        lambda_bar_2,
        s_star,
        s_bar_2,
        nu,
        rho,
        rho_eig,
        coupling_ok,
        condition_ok,
    })
}

/// Local rate of the partial iteration (normalized step in `x`,
/// gradient ascent with step `alpha` in `y`) at a joint stationary
/// point.
///
/// Requires curvature bounds `0 < mu <= L` on the concave `y` block;
/// `alpha` defaults to the optimal `2 / (L + mu)`. The `y` side enters
/// the coupling matrix through `s* = 1/alpha` and
/// `s_bar_2 = max(|1 - alpha mu|, |1 - alpha L|) / alpha`; the
/// coupling condition specializes to
/// `nu^2 < mu (lambda* - lambda_bar_2)`.
pub fn predicted_partial_rate<P>(
    problem: &P,
    x_star: &Array1<f64>,
    y_star: &Array1<f64>,
    alpha: Option<f64>,
) -> Result<BlockRateReport>
where
    P: PartialProblem + ?Sized,
{
    if x_star.len() != problem.dim_x() || y_star.len() != problem.dim_y() {
        return Err(Error::Input(format!(
            "point has dimensions ({}, {}), problem expects ({}, {})",
            x_star.len(),
            y_star.len(),
            problem.dim_x(),
            problem.dim_y()
        )));
    }
    let (mu, l) = problem.concavity().ok_or_else(|| {
        Error::Unsupported("the problem reports no curvature bounds for its y block".into())
    })?;
    if !(mu > 0.0) || !mu.is_finite() || !l.is_finite() {
        return Err(Error::Input(format!(
            "curvature bounds must be positive and finite, got ({}, {})",
            mu, l
        )));
    }
    if mu > l {
        return Err(Error::Input(format!(
            "curvature bounds are inverted: mu = {} exceeds L = {}",
            mu, l
        )));
    }
    let alpha = match alpha {
        Some(a) => {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Input(format!(
                    "step size must be positive and finite, got {}",
                    a
                )));
            }
            a
        }
        None => 2.0 / (l + mu),
    };

    let n = norm2(x_star);
    if !n.is_finite() || (n - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "x must lie on the unit sphere (norm {})",
            n
        )));
    }
    let gx = problem.gradient_x(x_star, y_star)?;
    let lambda_star = gx.dot(x_star);
    let kkt_x = norm2(&(&gx - &(x_star * lambda_star)));
    if kkt_x > STATIONARITY_TOL * (1.0 + norm2(&gx)) {
        return Err(Error::Precondition(format!(
            "x block is not stationary: KKT residual {:e}",
            kkt_x
        )));
    }
    let gy = problem.gradient_y(x_star, y_star)?;
    let gy_norm = norm2(&gy);
    if gy_norm > STATIONARITY_TOL * (1.0 + lambda_star.abs()) {
        return Err(Error::Precondition(format!(
            "y block is not stationary: gradient norm {:e}",
            gy_norm
        )));
    }

    let hxx = problem.hessian_xx(x_star, y_star)?;
    let lambda_bar_2 = projected_hessian_norm(&hxx, x_star)?;
    let nu = spectral_norm(&problem.hessian_yx(x_star, y_star)?)?;

    let s_star = 1.0 / alpha;
    let s_bar_2 = (1.0 - alpha * mu).abs().max((1.0 - alpha * l).abs()) / alpha;

    let condition_ok = lambda_star > 0.0 && lambda_bar_2 < lambda_star && s_bar_2 < s_star;
    let coupling_ok = condition_ok && nu * nu < mu * (lambda_star - lambda_bar_2);
    let (rho, rho_eig) = if condition_ok {
        let a = lambda_bar_2 / lambda_star;
        let d = s_bar_2 / s_star;
        (
            Some(spectral_radius_2x2(a, d, nu, lambda_star, s_star)?),
            Some(radius_via_eigensolver(a, d, nu, lambda_star, s_star)?),
        )
    } else {
        (None, None)
    };
    Ok(BlockRateReport {
        lambda_star,
        lambda_bar_2,
        s_star,
        s_bar_2,
        nu,
        rho,
        rho_eig,
        coupling_ok,
        condition_ok,
    })
}

/// Fit the contraction factor of an error sequence: a least-squares
/// line through `ln e_k` over the window `[FIT_FLOOR, FIT_CEIL]`,
/// returned as `exp(slope)`, the fitted per-iteration ratio
/// `e_{k+1} / e_k`.
///
/// Fails with an insufficient-data error when fewer than
/// [`FIT_MIN_POINTS`] trace points fall inside the window (the run
/// either never got close enough or jumped straight through it).
pub fn empirical_rate_from_errors(errors: &[f64]) -> Result<f64> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (k, &e) in errors.iter().enumerate() {
        if e.is_finite() && e >= FIT_FLOOR && e <= FIT_CEIL {
            points.push((k as f64, e.ln()));
        }
    }
    if points.len() < FIT_MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "only {} error values inside the fit window [{:e}, {:e}]; need {}",
            points.len(),
            FIT_FLOOR,
            FIT_CEIL,
            FIT_MIN_POINTS
        )));
    }
    let n = points.len() as f64;
    let kbar = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, y) in &points {
        num += (k - kbar) * (y - ybar);
        den += (k - kbar) * (k - kbar);
    }
    if den == 0.0 {
        return Err(Error::InsufficientData(
            "fit window has no spread in iteration index".into(),
        ));
    }
    Ok((num / den).exp())
}

/// Measured contraction factor of the squared alignment error
/// `1 - (x_k^T x_ref)^2` along a solver run. Needs the per-iterate
/// history, which solvers keep for dimensions up to the configured
/// cap.
pub fn empirical_rate(res: &SolveResult, x_ref: &Array1<f64>) -> Result<f64> {
    let hist = res.iterate_trace.as_ref().ok_or_else(|| {
        Error::InsufficientData(
            "the run kept no iterate history (dimension above the trace cap)".into(),
        )
    })?;
    let r = crate::linalg::normalize_unit(x_ref)?;
    let errors: Vec<f64> = hist
        .iter()
        .map(|x| {
            let c = x.dot(&r);
            1.0 - c * c
        })
        .collect();
    empirical_rate_from_errors(&errors)
}
