use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::problems::{InvarianceKind, ScaleInvariantProblem};

/// Mixture-proportion likelihood on the sphere.
///
/// For a non-negative likelihood matrix `L` (rows are observations,
/// columns are mixture components), the proportions live on the
/// simplex. Substituting `pi_k = x_k^2` turns the average log-likelihood
///
/// `f(x) = mean_j log( (L x^2)_j + eps )`
///
/// into a sphere-constrained problem. With `eps = 0` the objective is
/// additively scale invariant with `f(c x) = f(x) + 2 ln|c|`, i.e.
/// base `sqrt(e)`, and `grad f(x)^T x = 2` everywhere on the domain.
/// A positive `eps` regularizes rows that can reach zero mass but
/// breaks exact invariance, so such instances declare
/// [`InvarianceKind::None`].
#[derive(Clone, Debug)]
pub struct Mixture {
    l: Array2<f64>,
    eps: f64,
}

impl Mixture {
    pub fn new(l: Array2<f64>, eps: f64) -> Result<Self> {
        let (n, d) = l.dim();
        if n == 0 || d == 0 {
            return Err(Error::Input("mixture likelihood matrix must be non-empty".into()));
        }
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("mixture likelihood matrix has non-finite entries".into()));
        }
        if l.iter().any(|&v| v < 0.0) {
            return Err(Error::Input("mixture likelihoods must be non-negative".into()));
        }
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::Input(format!(
                "mixture smoothing must be a non-negative finite number, got {}",
                eps
            )));
        }
        if eps == 0.0 {
            for (j, row) in l.outer_iter().enumerate() {
                if row.iter().all(|&v| v == 0.0) {
                    return Err(Error::Input(format!(
                        "likelihood row {} is identically zero; with eps = 0 the log-likelihood is unbounded below",
                        j
                    )));
                }
            }
        }
        Ok(Mixture { l, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn likelihoods(&self) -> &Array2<f64> {
        &self.l
    }

    fn check_dim(&self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.l.ncols() {
            return Err(Error::Input(format!(
                "expected a point of dimension {}, got {}",
                self.l.ncols(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Row masses `(L x^2)_j + eps`, failing if any is non-positive
    /// (the log has nothing to act on there).
    fn masses(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let x2 = x.mapv(|v| v * v);
        let m = self.l.dot(&x2) + self.eps;
        for (j, &mj) in m.iter().enumerate() {
            if !(mj > 0.0) {
                return Err(Error::Domain(format!(
                    "row {} has non-positive mass {} at this point",
                    j, mj
                )));
            }
        }
        Ok(m)
    }
}

impl ScaleInvariantProblem for Mixture {
    fn dim(&self) -> usize {
        self.l.ncols()
    }

    fn kind(&self) -> InvarianceKind {
        if self.eps == 0.0 {
            InvarianceKind::Additive {
                base: 0.5f64.exp(),
            }
        } else {
            InvarianceKind::None
        }
    }

    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let m = self.masses(x)?;
        Ok(m.iter().map(|v| v.ln()).sum::<f64>() / self.l.nrows() as f64)
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x)?;
        let m = self.masses(x)?;
        let n = self.l.nrows() as f64;
        let u = m.mapv(|v| 1.0 / v);
        let lt_u = self.l.t().dot(&u);
        Ok(Array1::from_shape_fn(x.len(), |k| 2.0 * x[k] * lt_u[k] / n))
    }

    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        let m = self.masses(x)?;
        let d = self.l.ncols();
        let n = self.l.nrows() as f64;
        let u = m.mapv(|v| 1.0 / v);
        let lt_u = self.l.t().dot(&u);
        let mut h = Array2::zeros((d, d));
        for k in 0..d {
            h[[k, k]] = 2.0 * lt_u[k] / n;
        }
        // Minus (4/n) * D_x L^T diag(u^2) L D_x.
        for (j, row) in self.l.outer_iter().enumerate() {
            let w = 4.0 * u[j] * u[j] / n;
            for a in 0..d {
                if row[a] == 0.0 {
                    continue;
                }
                let fa = w * row[a] * x[a];
                for b in 0..d {
                    h[[a, b]] -= fa * row[b] * x[b];
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
    fn value_gradient_hessian_match_hand_computation() {
        let p = Mixture::new(array![[1.0, 2.0], [3.0, 4.0]], 0.0).unwrap();
        let x = array![0.6, 0.8];
        assert!((p.value(&x).unwrap() - 0.8933399617423783).abs() <= 1e-15);
        let g = p.gradient(&x).unwrap();
        assert!((g[0] - 0.8603591530420797).abs() <= 1e-15);
        assert!((g[1] - 1.85473063521844).abs() <= 1e-14);
        // The additive identity: grad f . x = 2 exactly (up to roundoff).
        assert!((g.dot(&x) - 2.0).abs() <= 1e-14);
        let h = p.hessian(&x).unwrap();
        let want = array![
            [0.6771627546153438, -1.5833210072641073],
            [-1.5833210072641073, -1.1309225385749697]
        ];
        for (a, b) in h.iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-13, "{} vs {}", a, b);
        }
    }

    #[test]
    fn zero_mass_row_is_a_domain_error() {
        // Component 1 puts no mass on row 1, so x = e_1 has log(0) there.
        let p = Mixture::new(array![[2.0, 0.0], [0.0, 2.0]], 0.0).unwrap();
        let x = array![1.0, 0.0];
        assert!(matches!(p.value(&x), Err(Error::Domain(_))));
        assert!(matches!(p.gradient(&x), Err(Error::Domain(_))));
        // A positive eps removes the failure.
        let q = Mixture::new(array![[2.0, 0.0], [0.0, 2.0]], 0.1).unwrap();
        assert!(q.value(&x).is_ok());
    }

    #[test]
    fn constructor_rejects_bad_matrices() {
        assert!(Mixture::new(array![[1.0, -0.5]], 0.0).is_err());
        assert!(Mixture::new(array![[1.0, f64::NAN]], 0.0).is_err());
        // All-zero row is only representable with positive eps.
        assert!(Mixture::new(array![[0.0, 0.0], [1.0, 1.0]], 0.0).is_err());
        assert!(Mixture::new(array![[0.0, 0.0], [1.0, 1.0]], 0.5).is_ok());
        assert!(Mixture::new(array![[1.0]], -0.1).is_err());
    }

    #[test]
    fn eps_zero_declares_additive_invariance() {
        let p = Mixture::new(array![[1.0, 2.0]], 0.0).unwrap();
        match p.kind() {
            InvarianceKind::Additive { base } => {
                assert!((base - 0.5f64.exp()).abs() <= 1e-15);
            }
            other => panic!("unexpected kind {:?}", other),
        }
        let q = Mixture::new(array![[1.0, 2.0]], 0.01).unwrap();
        assert_eq!(q.kind(), InvarianceKind::None);
    }

    #[test]
    fn analytic_hessian_matches_finite_differences() {
        let p = Mixture::new(array![[1.0, 2.0, 0.3], [3.0, 4.0, 1.0], [0.5, 0.1, 2.0]], 0.0)
            .unwrap();
        let x = array![0.5, -0.6, 0.4];
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
}
