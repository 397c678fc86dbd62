//! Objectives with scale-invariant structure.
//!
//! A problem here is "maximize f(x) subject to ||x|| = 1" where f
//! carries one of the invariance kinds below. The solvers only ever
//! talk to the [`ScaleInvariantProblem`] trait (and its block/partial
//! cousins), so new objectives slot in without touching solver code.

mod block;
mod gmm;
mod ica;
mod klnmf;
mod lp_pca;
mod mixture;
mod partial;
mod quadratic;

pub use block::{BilinearBlock, BlockProblem, CoupledBlock, SeparableBlock};
pub use gmm::{GmmFixedParams, GmmProblem};
pub(crate) use gmm::m_step;
pub use ica::KurtosisIca;
pub use klnmf::KlnmfSubproblem;
pub use lp_pca::LpPca;
pub use mixture::Mixture;
pub use partial::{PartialProblem, QuadraticPartial};
pub use quadratic::Quadratic;

use ndarray::{Array1, Array2};

use crate::error::Result;

/// How an objective reacts to rescaling its argument.
///
/// * `Multiplicative { degree: p }`: `f(c x) = |c|^p f(x)` with `p > 0`.
/// * `Additive { base: a }`: `f(c x) = f(x) + log_a |c|` with
///   `a > 0`, `a != 1`.
/// * `SumOfScaleInvariant`: a sum of multiplicatively invariant terms
///   of different degrees; the per-degree identities do not hold for
///   the sum, but the fixed-point iteration still applies.
/// * `None`: no invariance is claimed (e.g. after a shift that breaks
///   it).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InvarianceKind {
    Multiplicative { degree: f64 },
    Additive { base: f64 },
    SumOfScaleInvariant,
    None,
}

impl InvarianceKind {
    pub fn label(&self) -> String {
        match self {
            InvarianceKind::Multiplicative { degree } => {
                format!("multiplicative(degree={})", degree)
            }
            InvarianceKind::Additive { base } => format!("additive(base={})", base),
            InvarianceKind::SumOfScaleInvariant => "sum-of-scale-invariant".into(),
            InvarianceKind::None => "none".into(),
        }
    }
}

/// A smooth objective on `R^d` meant to be maximized on the unit
/// sphere.
///
/// `value` and `gradient` must be implemented; `hessian` defaults to a
/// central finite difference of the gradient and should be overridden
/// when an analytic form is available. All three may fail, e.g. when
/// evaluated outside the objective's domain.
pub trait ScaleInvariantProblem {
    fn dim(&self) -> usize;
    fn kind(&self) -> InvarianceKind;
    fn value(&self, x: &Array1<f64>) -> Result<f64>;
    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>>;
    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        crate::analysis::finite_diff_hessian(&|z: &Array1<f64>| self.gradient(z), x, None)
    }
}

impl<P: ScaleInvariantProblem + ?Sized> ScaleInvariantProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kind(&self) -> InvarianceKind {
        (**self).kind()
    }
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        (**self).hessian(x)
    }
}

impl<P: ScaleInvariantProblem + ?Sized> ScaleInvariantProblem for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kind(&self) -> InvarianceKind {
        (**self).kind()
    }
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        (**self).hessian(x)
    }
}

/// `f(x) + sigma * ||x||^2`: the standard shift that leaves the sphere
/// fixed points alone while moving the Hessian spectrum by `2 sigma`.
///
/// Running the plain fixed-point iteration on the shifted problem is
/// exactly the shifted iteration on the original one. The shift
/// preserves multiplicative invariance of degree 2 (both terms are
/// quadratic under scaling); every other kind degrades to
/// [`InvarianceKind::None`] unless `sigma == 0`.
#[derive(Clone, Debug)]
pub struct Shifted<P> {
    inner: P,
    sigma: f64,
}

impl<P: ScaleInvariantProblem> Shifted<P> {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

/// Wrap a problem with a spherical shift. See [`Shifted`].
pub fn apply_shift<P: ScaleInvariantProblem>(inner: P, sigma: f64) -> Shifted<P> {
    Shifted { inner, sigma }
}

impl<P: ScaleInvariantProblem> ScaleInvariantProblem for Shifted<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn kind(&self) -> InvarianceKind {
        if self.sigma == 0.0 {
            return self.inner.kind();
        }
        match self.inner.kind() {
            InvarianceKind::Multiplicative { degree } if degree == 2.0 => {
                InvarianceKind::Multiplicative { degree }
            }
            _ => InvarianceKind::None,
        }
    }

    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        Ok(self.inner.value(x)? + self.sigma * x.dot(x))
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let mut g = self.inner.gradient(x)?;
        g.scaled_add(2.0 * self.sigma, x);
        Ok(g)
    }

    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        let mut h = self.inner.hessian(x)?;
        for i in 0..h.nrows() {
            h[[i, i]] += 2.0 * self.sigma;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn shift_moves_value_gradient_and_hessian_consistently() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let p = Quadratic::new(a).unwrap();
        let s = apply_shift(p.clone(), 1.5);
        let x = array![0.6, 0.8];
        assert!((s.value(&x).unwrap() - (p.value(&x).unwrap() + 1.5)).abs() <= 1e-15);
        let gs = s.gradient(&x).unwrap();
        let gp = p.gradient(&x).unwrap();
        assert!((gs[0] - (gp[0] + 3.0 * 0.6)).abs() <= 1e-15);
        let hs = s.hessian(&x).unwrap();
        assert!((hs[[0, 0]] - 5.0).abs() <= 1e-12);
        assert!((hs[[0, 1]] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn shift_keeps_degree_two_invariance_only() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let q = apply_shift(Quadratic::new(a).unwrap(), 0.7);
        assert_eq!(q.kind(), InvarianceKind::Multiplicative { degree: 2.0 });

        let l = array![[1.0, 2.0], [3.0, 4.0]];
        let m = apply_shift(Mixture::new(l.clone(), 0.0).unwrap(), 0.7);
        assert_eq!(m.kind(), InvarianceKind::None);
        let unshifted = apply_shift(Mixture::new(l, 0.0).unwrap(), 0.0);
        assert!(matches!(unshifted.kind(), InvarianceKind::Additive { .. }));
    }
}
