use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::problems::{InvarianceKind, ScaleInvariantProblem};

/// `f(x) = mean_i (r_i^T x)^p` for data rows `r_i` and an integer
/// power `p > 2`: the L_p-norm analogue of PCA's variance objective.
///
/// `p = 2` is deliberately not accepted here; that case is an ordinary
/// quadratic and belongs to [`crate::problems::Quadratic`].
#[derive(Clone, Debug)]
pub struct LpPca {
    rows: Array2<f64>,
    p: u32,
}

impl LpPca {
    pub fn new(rows: Array2<f64>, p: u32) -> Result<Self> {
        if p <= 2 {
            return Err(Error::Unsupported(format!(
                "lp-pca expects an integer power above 2, got {}",
                p
            )));
        }
        let (n, d) = rows.dim();
        if n == 0 || d == 0 {
            return Err(Error::Input("lp-pca data must be non-empty".into()));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("lp-pca data has non-finite entries".into()));
        }
        Ok(LpPca { rows, p })
    }

    pub fn power(&self) -> u32 {
        self.p
    }

    fn check_dim(&self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.rows.ncols() {
            return Err(Error::Input(format!(
                "expected a point of dimension {}, got {}",
                self.rows.ncols(),
                x.len()
            )));
        }
        Ok(())
    }

    fn scores(&self, x: &Array1<f64>) -> Array1<f64> {
        self.rows.dot(x)
    }
}

impl ScaleInvariantProblem for LpPca {
    fn dim(&self) -> usize {
        self.rows.ncols()
    }

    fn kind(&self) -> InvarianceKind {
        InvarianceKind::Multiplicative {
            degree: self.p as f64,
        }
    }

    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let n = self.rows.nrows() as f64;
        let p = self.p as i32;
        Ok(self.scores(x).iter().map(|s| s.powi(p)).sum::<f64>() / n)
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x)?;
        let n = self.rows.nrows() as f64;
        let p = self.p as i32;
        let weights = self.scores(x).mapv(|s| s.powi(p - 1));
        Ok(self.rows.t().dot(&weights) * (self.p as f64 / n))
    }

    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        let d = self.rows.ncols();
        let n = self.rows.nrows() as f64;
        let p = self.p as i32;
        let c = (self.p as f64) * (self.p as f64 - 1.0) / n;
        let weights = self.scores(x).mapv(|s| s.powi(p - 2));
        let mut h = Array2::zeros((d, d));
        for (i, r) in self.rows.outer_iter().enumerate() {
            let w = c * weights[i];
            for a in 0..d {
                for b in 0..d {
                    h[[a, b]] += w * r[a] * r[b];
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
    fn quartic_case_matches_hand_computation() {
        let p = LpPca::new(array![[1.0, 0.0], [1.0, 1.0]], 4).unwrap();
        let x = array![0.6, 0.8];
        assert!((p.value(&x).unwrap() - 1.9855999999999996).abs() <= 1e-15);
        let g = p.gradient(&x).unwrap();
        assert!((g[0] - 5.919999999999998).abs() <= 1e-14);
        assert!((g[1] - 5.487999999999999).abs() <= 1e-14);
    }

    #[test]
    fn analytic_hessian_matches_finite_differences() {
        let p = LpPca::new(array![[1.0, 0.5, 0.0], [0.2, -1.0, 0.7], [0.0, 0.3, 1.1]], 4).unwrap();
        let x = array![0.5, -0.4, 0.3];
        let h = p.hessian(&x).unwrap();
        let fd = crate::analysis::finite_diff_hessian(
            &|z: &Array1<f64>| p.gradient(z),
            &x,
            Option::None,
        )
        .unwrap();
        for (a, b) in h.iter().zip(fd.iter()) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn power_at_or_below_two_is_unsupported() {
        let rows = array![[1.0, 0.0]];
        assert!(matches!(
            LpPca::new(rows.clone(), 2),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(LpPca::new(rows, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn declared_kind_has_the_right_degree() {
        let p = LpPca::new(array![[1.0, 0.0]], 6).unwrap();
        assert_eq!(p.kind(), InvarianceKind::Multiplicative { degree: 6.0 });
    }
}
