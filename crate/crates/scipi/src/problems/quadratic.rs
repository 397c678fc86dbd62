use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::problems::{InvarianceKind, ScaleInvariantProblem};

/// `f(x) = x^T A x / 2` for a symmetric `A`.
///
/// The canonical multiplicatively invariant objective (degree 2). Its
/// fixed-point iteration reduces to classical power iteration on `A`,
/// which makes it the reference case for everything else in the crate.
#[derive(Clone, Debug)]
pub struct Quadratic {
    a: Array2<f64>,
}

const ASYMMETRY_TOL: f64 = 1e-10;

impl Quadratic {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (n, m) = a.dim();
        if n != m {
            return Err(Error::Input(format!(
                "quadratic matrix must be square, got {}x{}",
                n, m
            )));
        }
        if n == 0 {
            return Err(Error::Input("quadratic matrix must be non-empty".into()));
        }
        let mut max_abs = 0f64;
        for &v in a.iter() {
            if !v.is_finite() {
                return Err(Error::Input("quadratic matrix has non-finite entries".into()));
            }
            max_abs = max_abs.max(v.abs());
        }
        let mut asym = 0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max((a[[i, j]] - a[[j, i]]).abs());
            }
        }
        if asym > ASYMMETRY_TOL * (1.0 + max_abs) {
            return Err(Error::Input(format!(
                "quadratic matrix must be symmetric (max |a_ij - a_ji| = {:.3e})",
                asym
            )));
        }
        let mut sym = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                sym[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]]);
            }
        }
        Ok(Quadratic { a: sym })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    fn check_dim(&self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.a.nrows() {
            return Err(Error::Input(format!(
                "expected a point of dimension {}, got {}",
                self.a.nrows(),
                x.len()
            )));
        }
        Ok(())
    }
}

impl ScaleInvariantProblem for Quadratic {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn kind(&self) -> InvarianceKind {
        InvarianceKind::Multiplicative { degree: 2.0 }
    }

    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(0.5 * x.dot(&self.a.dot(x)))
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x)?;
        Ok(self.a.dot(x))
    }

    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        Ok(self.a.clone())
    }
}
