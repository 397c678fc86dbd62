use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::problems::{InvarianceKind, ScaleInvariantProblem};

/// One column subproblem of KL-divergence NMF, on the sphere.
///
/// Minimizing `D_KL(v || W h)` over `h >= 0` for a fixed non-negative
/// `W` is, after dropping terms constant in `h`, equivalent to
/// maximizing `sum_i v_i log (W h)_i - sum_k (sum_i W_ik) h_k`. On the
/// slice where the linear penalty is constant this collapses to a
/// simplex-constrained problem: rescaling columns by their sums and
/// the simplex by `sum_i v_i` gives
///
/// `f(x) = sum_i v_i log( (Wt x^2)_i )`,  `Wt_ik = W_ik * sum(v) / sum_i W_ik`,
///
/// with `h_bar_k = x_k^2` on the unit simplex. The objective is
/// additively invariant: `f(c x) = f(x) + 2 sum(v) ln|c|`, so the base
/// is `exp(1 / (2 sum v))` and `grad f(x)^T x = 2 sum(v)` identically.
/// [`KlnmfSubproblem::recover_h`] maps a simplex point back to the
/// unnormalized `h` that solves the original column problem.
#[derive(Clone, Debug)]
pub struct KlnmfSubproblem {
    w_tilde: Array2<f64>,
    v: Array1<f64>,
    col_sums: Array1<f64>,
    v_sum: f64,
}

impl KlnmfSubproblem {
    pub fn new(w: Array2<f64>, v: Array1<f64>) -> Result<Self> {
        let (n, k) = w.dim();
        if n == 0 || k == 0 {
            return Err(Error::Input("nmf basis must be non-empty".into()));
        }
        if v.len() != n {
            return Err(Error::Input(format!(
                "target vector has length {}, expected {}",
                v.len(),
                n
            )));
        }
        if w.iter().any(|x| !x.is_finite()) || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("nmf inputs have non-finite entries".into()));
        }
        if w.iter().any(|&x| x < 0.0) || v.iter().any(|&x| x < 0.0) {
            return Err(Error::Input("nmf inputs must be non-negative".into()));
        }
        let v_sum = v.sum();
        if !(v_sum > 0.0) {
            return Err(Error::Input("target vector must have positive total mass".into()));
        }
        let col_sums = Array1::from_shape_fn(k, |c| w.column(c).sum());
        for (c, &s) in col_sums.iter().enumerate() {
            if !(s > 0.0) {
                return Err(Error::Input(format!(
                    "basis column {} sums to zero; the subproblem scaling is undefined",
                    c
                )));
            }
        }
        let mut w_tilde = w;
        for c in 0..k {
            let scale = v_sum / col_sums[c];
            w_tilde.column_mut(c).mapv_inplace(|x| x * scale);
        }
        Ok(KlnmfSubproblem {
            w_tilde,
            v,
            col_sums,
            v_sum,
        })
    }

    pub fn scaled_basis(&self) -> &Array2<f64> {
        &self.w_tilde
    }

    pub fn target(&self) -> &Array1<f64> {
        &self.v
    }

    pub fn target_sum(&self) -> f64 {
        self.v_sum
    }

    /// Map a point on the unit simplex (`h_bar`) back to the scale of
    /// the original column problem: `h_k = h_bar_k * sum(v) / sum_i W_ik`.
    pub fn recover_h(&self, h_bar: &Array1<f64>) -> Result<Array1<f64>> {
        if h_bar.len() != self.col_sums.len() {
            return Err(Error::Input(format!(
                "expected a simplex point of dimension {}, got {}",
                self.col_sums.len(),
                h_bar.len()
            )));
        }
        Ok(Array1::from_shape_fn(h_bar.len(), |k| {
            h_bar[k] * self.v_sum / self.col_sums[k]
        }))
    }

    fn check_dim(&self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.w_tilde.ncols() {
            return Err(Error::Input(format!(
                "expected a point of dimension {}, got {}",
                self.w_tilde.ncols(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Mixture masses `(Wt x^2)_i`; rows with `v_i = 0` are allowed to
    /// be zero (their objective term vanishes), all others must be
    /// strictly positive.
    fn masses(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let x2 = x.mapv(|v| v * v);
        let m = self.w_tilde.dot(&x2);
        for (i, &mi) in m.iter().enumerate() {
            if self.v[i] > 0.0 && !(mi > 0.0) {
                return Err(Error::Domain(format!(
                    "row {} has non-positive mass {} at this point",
                    i, mi
                )));
            }
        }
        Ok(m)
    }
}

impl ScaleInvariantProblem for KlnmfSubproblem {
    fn dim(&self) -> usize {
        self.w_tilde.ncols()
    }

    fn kind(&self) -> InvarianceKind {
        InvarianceKind::Additive {
            base: (1.0 / (2.0 * self.v_sum)).exp(),
        }
    }

    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let m = self.masses(x)?;
        let mut f = 0.0;
        for (i, &vi) in self.v.iter().enumerate() {
            if vi > 0.0 {
                f += vi * m[i].ln();
            }
        }
        Ok(f)
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x)?;
        let m = self.masses(x)?;
        let u = Array1::from_shape_fn(m.len(), |i| {
            if self.v[i] > 0.0 {
                self.v[i] / m[i]
            } else {
                0.0
            }
        });
        let wt_u = self.w_tilde.t().dot(&u);
        Ok(Array1::from_shape_fn(x.len(), |k| 2.0 * x[k] * wt_u[k]))
    }

    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        let m = self.masses(x)?;
        let d = self.w_tilde.ncols();
        let u = Array1::from_shape_fn(m.len(), |i| {
            if self.v[i] > 0.0 {
                self.v[i] / m[i]
            } else {
                0.0
            }
        });
        let wt_u = self.w_tilde.t().dot(&u);
        let mut h = Array2::zeros((d, d));
        for k in 0..d {
            h[[k, k]] = 2.0 * wt_u[k];
        }
        for (i, row) in self.w_tilde.outer_iter().enumerate() {
            if self.v[i] == 0.0 {
                continue;
            }
            let w = 4.0 * self.v[i] / (m[i] * m[i]);
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
