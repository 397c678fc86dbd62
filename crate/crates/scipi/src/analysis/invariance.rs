//! Empirical detection and verification of scale invariance.
//!
//! Multiplicatively invariant objectives satisfy `f(c x) = |c|^p f(x)`
//! and two differential identities at every point:
//! `grad f(x)^T x = p f(x)` and `H(x) x = (p - 1) grad f(x)`.
//! Additively invariant ones (`f(c x) = f(x) + log_a |c|`) satisfy
//! `grad f(x)^T x = 1 / ln a` and `H(x) x = -grad f(x)`. These are the
//! backbone of everything the rate analysis does, so they get their
//! own checkers here.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::linalg::{norm2, Rng};
use crate::problems::{InvarianceKind, ScaleInvariantProblem};

/// Residual tolerance for the scalar gradient identity, relative to
/// `1 + |f|`.
pub const GRADIENT_IDENTITY_TOL: f64 = 1e-8;
/// Residual tolerance for the Hessian identity, relative to
/// `1 + ||grad f||`.
pub const HESSIAN_IDENTITY_TOL: f64 = 1e-6;
/// Maximum relative misfit for the sampling-based classifier.
pub const CLASSIFY_TOL: f64 = 1e-6;
/// Stationarity residual allowed before a point counts as a solution,
/// relative to `1 + ||grad f||`.
pub const STATIONARITY_TOL: f64 = 1e-6;

/// What the sampling classifier concluded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Classification {
    Multiplicative { degree: f64 },
    Additive { base: f64 },
    /// Neither model fit the samples (e.g. a sum of invariant terms of
    /// different degrees, or an objective with no invariance at all).
    Inconclusive,
}

/// Probe an objective with random points and scales and decide which
/// invariance model fits.
///
/// For every sampled unit vector `x` and scale `c` in {0.5, 2, 3} the
/// classifier first fits a multiplicative degree to `f(cx) / f(x)` and
/// accepts it when every sample reproduces `f(cx)` to a relative
/// [`CLASSIFY_TOL`] with a positive degree; otherwise it fits the
/// additive increment `f(cx) - f(x)` against `ln c`. Samples where the
/// objective vanishes or cannot be evaluated are skipped; if none
/// remain the classifier reports insufficient data as an error.
pub fn classify_invariance<P>(problem: &P, samples: usize, seed: u64) -> Result<Classification>
where
    P: ScaleInvariantProblem + ?Sized,
{
    if samples == 0 {
        return Err(Error::Input("need at least one sample".into()));
    }
    const SCALES: [f64; 3] = [0.5, 2.0, 3.0];
    let mut rng = Rng::new(seed);
    // (f(x), c, f(cx)) triples over usable sample points.
    let mut triples: Vec<(f64, f64, f64)> = Vec::new();
    for _ in 0..samples {
        let x = rng.unit_sphere(problem.dim());
        let fx = match problem.value(&x) {
            Ok(v) if v.is_finite() && v != 0.0 => v,
            _ => continue,
        };
        let mut row = Vec::with_capacity(SCALES.len());
        for &c in SCALES.iter() {
            match problem.value(&(&x * c)) {
                Ok(v) if v.is_finite() => row.push((fx, c, v)),
                _ => {
                    row.clear();
                    break;
                }
            }
        }
        triples.extend(row);
    }
    if triples.is_empty() {
        return Err(Error::InsufficientData(
            "no usable sample points for classification".into(),
        ));
    }

    // Multiplicative fit: p = ln(f(cx)/f(x)) / ln c, averaged.
    let mut degrees = Vec::new();
    let mut ratios_ok = true;
    for &(fx, c, fcx) in &triples {
        let ratio = fcx / fx;
        if !(ratio > 0.0) {
            ratios_ok = false;
            break;
        }
        degrees.push(ratio.ln() / c.ln());
    }
    if ratios_ok {
        let p = degrees.iter().sum::<f64>() / degrees.len() as f64;
        if p > 0.0 {
            let fits = triples.iter().all(|&(fx, c, fcx)| {
                (fcx - c.abs().powf(p) * fx).abs() <= CLASSIFY_TOL * (1.0 + fcx.abs())
            });
            if fits {
                return Ok(Classification::Multiplicative { degree: p });
            }
        }
    }

    // Additive fit: f(cx) - f(x) = m ln c with m = 1 / ln a.
    let m = triples
        .iter()
        .map(|&(fx, c, fcx)| (fcx - fx) / c.ln())
        .sum::<f64>()
        / triples.len() as f64;
    if m != 0.0 && m.is_finite() {
        let fits = triples
            .iter()
            .all(|&(fx, c, fcx)| ((fcx - fx) - m * c.ln()).abs() <= CLASSIFY_TOL);
        if fits {
            return Ok(Classification::Additive { base: (1.0 / m).exp() });
        }
    }
    Ok(Classification::Inconclusive)
}

/// Residuals of the two differential identities at a point.
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub kind: InvarianceKind,
    /// `|grad f^T x - p f|` or `|grad f^T x - 1/ln a|`.
    pub gradient_residual: f64,
    /// `||H x - (p-1) grad f||` or `||H x + grad f||`.
    pub hessian_residual: f64,
    pub gradient_ok: bool,
    pub hessian_ok: bool,
}

impl IdentityReport {
    pub fn ok(&self) -> bool {
        self.gradient_ok && self.hessian_ok
    }
}

/// Verify the differential identities of the problem's declared
/// invariance kind at `x` (any nonzero point, not just unit vectors).
///
/// Only plainly multiplicative or additive problems carry these
/// identities; for the other kinds this is an unsupported operation.
pub fn check_identities<P>(problem: &P, x: &Array1<f64>) -> Result<IdentityReport>
where
    P: ScaleInvariantProblem + ?Sized,
{
    if x.len() != problem.dim() {
        return Err(Error::Input(format!(
            "point has dimension {}, problem expects {}",
            x.len(),
            problem.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || x.iter().all(|&v| v == 0.0) {
        return Err(Error::Input("point must be finite and nonzero".into()));
    }
    let kind = problem.kind();
    let f = problem.value(x)?;
    let g = problem.gradient(x)?;
    let h = problem.hessian(x)?;
    let gx = g.dot(x);
    let hx = h.dot(x);
    let gnorm = norm2(&g);

    let (grad_target, hess_target): (f64, Array1<f64>) = match kind {
        InvarianceKind::Multiplicative { degree } => (degree * f, &g * (degree - 1.0)),
        InvarianceKind::Additive { base } => {
            let ln_a = base.ln();
            if ln_a == 0.0 || !ln_a.is_finite() {
                return Err(Error::Domain(format!(
                    "additive base must be positive and not 1, got {}",
                    base
                )));
            }
            (1.0 / ln_a, -&g)
        }
        other => {
            return Err(Error::Unsupported(format!(
                "identity checks apply to multiplicative or additive objectives, not {}",
                other.label()
            )));
        }
    };

    let gradient_residual = (gx - grad_target).abs();
    let hessian_residual = norm2(&(&hx - &hess_target));
    Ok(IdentityReport {
        kind,
        gradient_residual,
        hessian_residual,
        gradient_ok: gradient_residual <= GRADIENT_IDENTITY_TOL * (1.0 + f.abs()),
        hessian_ok: hessian_residual <= HESSIAN_IDENTITY_TOL * (1.0 + gnorm),
    })
}

/// The eigenvector property at a stationary point.
#[derive(Clone, Debug)]
pub struct EigenvectorReport {
    /// Multiplier `lambda* = grad f(x*)^T x*`.
    pub lambda_star: f64,
    /// `p - 1` for multiplicative objectives, `-1` for additive ones.
    pub kappa: f64,
    /// `||H x* - kappa lambda* x*||`.
    pub residual: f64,
    pub ok: bool,
}

fn require_stationary<P>(problem: &P, x: &Array1<f64>) -> Result<(f64, Array1<f64>)>
where
    P: ScaleInvariantProblem + ?Sized,
{
    if x.len() != problem.dim() {
        return Err(Error::Input(format!(
            "point has dimension {}, problem expects {}",
            x.len(),
            problem.dim()
        )));
    }
    let n = norm2(x);
    if !n.is_finite() || (n - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "point must lie on the unit sphere (norm {})",
            n
        )));
    }
    let g = problem.gradient(x)?;
    let lambda = g.dot(x);
    let kkt = norm2(&(&g - &(x * lambda)));
    if kkt > STATIONARITY_TOL * (1.0 + norm2(&g)) {
        return Err(Error::Precondition(format!(
            "point is not stationary: KKT residual {:e}",
            kkt
        )));
    }
    Ok((lambda, g))
}

/// At a stationary point `x*`, check that `x*` is an eigenvector of
/// the Hessian with eigenvalue `kappa lambda*`.
///
/// Fails with a precondition error (reporting the measured KKT
/// residual) when `x*` is not stationary to [`STATIONARITY_TOL`].
pub fn check_eigenvector_property<P>(problem: &P, x_star: &Array1<f64>) -> Result<EigenvectorReport>
where
    P: ScaleInvariantProblem + ?Sized,
{
    let kappa = match problem.kind() {
        InvarianceKind::Multiplicative { degree } => degree - 1.0,
        InvarianceKind::Additive { .. } => -1.0,
        other => {
            return Err(Error::Unsupported(format!(
                "the eigenvector property applies to multiplicative or additive objectives, not {}",
                other.label()
            )));
        }
    };
    let (lambda_star, _) = require_stationary(problem, x_star)?;
    let hx = problem.hessian(x_star)?.dot(x_star);
    let residual = norm2(&(&hx - &(x_star * (kappa * lambda_star))));
    Ok(EigenvectorReport {
        lambda_star,
        kappa,
        residual,
        ok: residual <= 1e-6 * (1.0 + (kappa * lambda_star).abs()),
    })
}

/// Map a stationary point to the corresponding solution of the
/// unconstrained dual formulation: `x* / f(x*)^(1/p)` for a
/// multiplicative objective (requires `f(x*) > 0`), `a^(1 - f(x*)) x*`
/// for an additive one. In both cases the objective evaluates to
/// exactly 1 at the image, which makes the map easy to validate.
pub fn dual_map<P>(problem: &P, x_star: &Array1<f64>) -> Result<Array1<f64>>
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
    let f = problem.value(x_star)?;
    match problem.kind() {
        InvarianceKind::Multiplicative { degree } => {
            if !(f > 0.0) {
                return Err(Error::Domain(format!(
                    "the dual map of a multiplicative objective needs f(x*) > 0, got {}",
                    f
                )));
            }
            Ok(x_star / f.powf(1.0 / degree))
        }
        InvarianceKind::Additive { base } => {
            if !(base > 0.0) || base == 1.0 {
                return Err(Error::Domain(format!(
                    "additive base must be positive and not 1, got {}",
                    base
                )));
            }
            Ok(x_star * base.powf(1.0 - f))
        }
        other => Err(Error::Unsupported(format!(
            "the dual map applies to multiplicative or additive objectives, not {}",
            other.label()
        ))),
    }
}
