use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::problems::{InvarianceKind, ScaleInvariantProblem};

/// Kurtosis-based one-unit ICA objective on whitened data.
///
/// For whitened rows `w_i` (so that the empirical covariance is the
/// identity), maximizing
///
/// `f(x) = mean_i ( (w_i^T x)^4 - 3 )^2`
///
/// over the sphere drives `w_i^T x` toward a direction of extreme
/// excess kurtosis. Expanding the square gives homogeneous terms of
/// degrees 8, 4 and 0, so `f` is a sum of multiplicatively invariant
/// pieces rather than invariant of a single degree.
#[derive(Clone, Debug)]
pub struct KurtosisIca {
    w: Array2<f64>,
}

impl KurtosisIca {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        let (n, d) = w.dim();
        if n == 0 || d == 0 {
            return Err(Error::Input("ica data must be non-empty".into()));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("ica data has non-finite entries".into()));
        }
        Ok(KurtosisIca { w })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.w
    }

    fn check_dim(&self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.w.ncols() {
            return Err(Error::Input(format!(
                "expected a point of dimension {}, got {}",
                self.w.ncols(),
                x.len()
            )));
        }
        Ok(())
    }
}

impl ScaleInvariantProblem for KurtosisIca {
    fn dim(&self) -> usize {
        self.w.ncols()
    }

    fn kind(&self) -> InvarianceKind {
        InvarianceKind::SumOfScaleInvariant
    }

    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let n = self.w.nrows() as f64;
        let s = self.w.dot(x);
        Ok(s.iter()
            .map(|&si| {
                let k = si.powi(4) - 3.0;
                k * k
            })
            .sum::<f64>()
            / n)
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x)?;
        let n = self.w.nrows() as f64;
        let s = self.w.dot(x);
        let weights = s.mapv(|si| (si.powi(4) - 3.0) * si.powi(3));
        Ok(self.w.t().dot(&weights) * (8.0 / n))
    }

    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        let d = self.w.ncols();
        let n = self.w.nrows() as f64;
        let s = self.w.dot(x);
        // d/ds of 8 (s^4 - 3) s^3 = 8 (7 s^6 - 9 s^2).
        let weights = s.mapv(|si| 8.0 * (7.0 * si.powi(6) - 9.0 * si.powi(2)) / n);
        let mut h = Array2::zeros((d, d));
        for (i, row) in self.w.outer_iter().enumerate() {
            let w = weights[i];
            for a in 0..d {
                if row[a] == 0.0 {
                    continue;
                }
                let fa = w * row[a];
                for b in 0..d {
                    h[[a, b]] += fa * row[b];
                }
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn value_and_gradient_match_hand_computation() {
        let p = KurtosisIca::new(array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let x = array![0.6, 0.8];
        assert!((p.value(&x).unwrap() - 5.219219626666666).abs() <= 1e-14);
        let g = p.gradient(&x).unwrap();
        assert!((g[0] - 4.504917333333326).abs() <= 1e-13);
        assert!((g[1] - 2.621508266666659).abs() <= 1e-13);
    }

    #[test]
    fn analytic_hessian_matches_finite_differences() {
        let p = KurtosisIca::new(array![[1.0, 0.2], [-0.4, 1.0], [0.7, 0.7]]).unwrap();
        let x = array![0.9, -0.5];
        let h = p.hessian(&x).unwrap();
        let fd = crate::analysis::finite_diff_hessian(
            &|z: &Array1<f64>| p.gradient(z),
            &x,
            Option::None,
        )
        .unwrap();
        for (a, b) in h.iter().zip(fd.iter()) {
            assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "{} vs {}", a, b);
        }
    }

    #[test]
    fn kind_is_a_sum_of_invariant_terms() {
        let p = KurtosisIca::new(array![[1.0]]).unwrap();
        assert_eq!(p.kind(), InvarianceKind::SumOfScaleInvariant);
    }
}
