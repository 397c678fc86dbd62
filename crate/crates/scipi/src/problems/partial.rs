use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, sym_eig, EigSort};
use crate::problems::Quadratic;
use crate::problems::ScaleInvariantProblem;

/// An objective that is scale invariant in `x` (maximized on the unit
/// sphere) but free in a second argument `y`, where it is concave and
/// maximized without constraint.
///
/// The partial iteration alternates a normalized gradient step in `x`
/// with either an exact maximization in `y` (when the implementor has
/// one) or an ascent step `y + alpha * grad_y f`. For the latter, the
/// rate analysis wants the strong concavity interval: `concavity`
/// returns `(mu, L)` such that `mu I <= -hessian_yy <= L I` near the
/// solution, when known.
pub trait PartialProblem {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn value(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64>;
    fn gradient_x(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>>;

    fn gradient_y(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        crate::analysis::finite_diff_gradient(&|z: &Array1<f64>| self.value(x, z), y, None)
    }

    /// Whether `exact_y_step` is available.
    fn has_exact_y_step(&self) -> bool {
        false
    }

    /// The maximizer of `f(x, .)` from the current pair, for problems
    /// that can compute it in closed form (e.g. an M-step).
    fn exact_y_step(&self, _x: &Array1<f64>, _y: &Array1<f64>) -> Result<Array1<f64>> {
        Err(Error::Unsupported("this problem has no exact y step".into()))
    }

    /// Strong concavity bounds `(mu, L)` of `-f(x, .)`, when known.
    fn concavity(&self) -> Option<(f64, f64)> {
        None
    }

    fn hessian_xx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        crate::analysis::finite_diff_hessian(
            &|z: &Array1<f64>| self.gradient_x(z, y),
            x,
            None,
        )
    }

    /// Mixed block `d(grad_y f)/dx`, shaped `dim_y x dim_x`.
    fn hessian_yx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        crate::analysis::finite_diff_jacobian(
            &|z: &Array1<f64>| self.gradient_y(z, y),
            x,
            None,
        )
    }
}

/// A quadratic form in `x` whose magnitude is modulated by `y`, minus a
/// quadratic penalty pulling `y` toward a base point:
///
/// `f(x, y) = (1 + e^T (y - y0)) * x^T A x / 2 - (y - y0)^T B (y - y0) / 2`
///
/// with `B` positive definite. For fixed `y` this is multiplicatively
/// invariant of degree 2 in `x`; for fixed `x` it is a strongly concave
/// quadratic in `y` with curvature interval `[lambda_min(B),
/// lambda_max(B)]` and exact maximizer `y0 + B^{-1} e * (x^T A x / 2)`.
/// That makes it a fully transparent test bed: every quantity in the
/// partial rate bound has a closed form.
#[derive(Clone, Debug)]
pub struct QuadraticPartial {
    qa: Quadratic,
    b: Array2<f64>,
    b_chol: Array2<f64>,
    e: Array1<f64>,
    y0: Array1<f64>,
    mu: f64,
    l: f64,
}

impl QuadraticPartial {
    pub fn new(a: Array2<f64>, b: Array2<f64>, e: Array1<f64>, y0: Array1<f64>) -> Result<Self> {
        let qa = Quadratic::new(a)?;
        let qb = Quadratic::new(b)?;
        let b = qb.matrix().clone();
        if e.len() != b.nrows() || y0.len() != b.nrows() {
            return Err(Error::Input(format!(
                "modulation and base point must have dimension {}, got {} and {}",
                b.nrows(),
                e.len(),
                y0.len()
            )));
        }
        if e.iter().any(|v| !v.is_finite()) || y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("modulation terms must be finite".into()));
        }
        let b_chol = cholesky(&b)
            .map_err(|_| Error::Input("penalty matrix must be positive definite".into()))?;
        let eigs = sym_eig(&b, EigSort::ValueDesc)?;
        let l = eigs.values[0];
        let mu = *eigs.values.last().expect("non-empty spectrum");
        Ok(QuadraticPartial {
            qa,
            b,
            b_chol,
            e,
            y0,
            mu,
            l,
        })
    }

    pub fn base_matrix(&self) -> &Array2<f64> {
        self.qa.matrix()
    }

    fn check_pair(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<()> {
        if x.len() != self.dim_x() || y.len() != self.dim_y() {
            return Err(Error::Input(format!(
                "expected block dimensions ({}, {}), got ({}, {})",
                self.dim_x(),
                self.dim_y(),
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    fn modulation(&self, y: &Array1<f64>) -> f64 {
        1.0 + self.e.dot(&(y - &self.y0))
    }
}

impl PartialProblem for QuadraticPartial {
    fn dim_x(&self) -> usize {
        self.qa.dim()
    }

    fn dim_y(&self) -> usize {
        self.b.nrows()
    }

    fn value(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64> {
        self.check_pair(x, y)?;
        let dy = y - &self.y0;
        Ok(self.modulation(y) * self.qa.value(x)? - 0.5 * dy.dot(&self.b.dot(&dy)))
    }

    fn gradient_x(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_pair(x, y)?;
        Ok(self.qa.gradient(x)? * self.modulation(y))
    }

    fn gradient_y(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_pair(x, y)?;
        let dy = y - &self.y0;
        Ok(&self.e * self.qa.value(x)? - &self.b.dot(&dy))
    }

    fn has_exact_y_step(&self) -> bool {
        true
    }

    fn exact_y_step(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_pair(x, y)?;
        let rhs = &self.e * self.qa.value(x)?;
        Ok(&self.y0 + &cholesky_solve(&self.b_chol, &rhs))
    }

    fn concavity(&self) -> Option<(f64, f64)> {
        Some((self.mu, self.l))
    }

    fn hessian_xx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        self.check_pair(x, y)?;
        Ok(self.qa.hessian(x)? * self.modulation(y))
    }

    fn hessian_yx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        self.check_pair(x, y)?;
        let ax = self.qa.gradient(x)?;
        let mut h = Array2::zeros((self.dim_y(), self.dim_x()));
        for i in 0..self.dim_y() {
            for j in 0..self.dim_x() {
                h[[i, j]] = self.e[i] * ax[j];
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> QuadraticPartial {
        QuadraticPartial::new(
            array![[2.0, 0.0], [0.0, 1.0]],
            array![[3.0, 0.0], [0.0, 1.0]],
            array![0.2, -0.1],
            array![0.5, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn exact_y_step_maximizes_over_y() {
        let p = sample();
        let x = array![0.6, 0.8];
        let y = array![0.0, 0.0];
        let ys = p.exact_y_step(&x, &y).unwrap();
        // The gradient in y vanishes at the exact step.
        let gy = p.gradient_y(&x, &ys).unwrap();
        assert!(gy.iter().all(|v| v.abs() <= 1e-12));
        // And moving away only lowers the value.
        let f_star = p.value(&x, &ys).unwrap();
        for delta in [array![0.01, 0.0], array![0.0, -0.02]] {
            let f = p.value(&x, &(&ys + &delta)).unwrap();
            assert!(f < f_star);
        }
    }

    #[test]
    fn concavity_interval_is_the_penalty_spectrum() {
        let p = sample();
        assert_eq!(p.concavity(), Some((1.0, 3.0)));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = sample();
        let x = array![0.6, -0.8];
        let y = array![0.3, 1.4];
        let gx = p.gradient_x(&x, &y).unwrap();
        let fd_gx = crate::analysis::finite_diff_gradient(
            &|z: &Array1<f64>| p.value(z, &y),
            &x,
            Option::None,
        )
        .unwrap();
        for (a, b) in gx.iter().zip(fd_gx.iter()) {
            assert!((a - b).abs() <= 1e-8);
        }
        let gy = p.gradient_y(&x, &y).unwrap();
        let fd_gy = crate::analysis::finite_diff_gradient(
            &|z: &Array1<f64>| p.value(&x, z),
            &y,
            Option::None,
        )
        .unwrap();
        for (a, b) in gy.iter().zip(fd_gy.iter()) {
            assert!((a - b).abs() <= 1e-8);
        }
        let hyx = p.hessian_yx(&x, &y).unwrap();
        let fd_yx = crate::analysis::finite_diff_jacobian(
            &|z: &Array1<f64>| p.gradient_y(z, &y),
            &x,
            Option::None,
        )
        .unwrap();
        for (a, b) in hyx.iter().zip(fd_yx.iter()) {
            assert!((a - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn rejects_indefinite_penalty() {
        assert!(QuadraticPartial::new(
            array![[1.0]],
            array![[0.0]],
            array![1.0],
            array![0.0]
        )
        .is_err());
    }
}
