use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, forward_solve};
use crate::problems::partial::PartialProblem;
use crate::problems::{InvarianceKind, ScaleInvariantProblem};

const LN_2PI: f64 = 1.8378770664093453;

/// Gaussian mixture log-likelihood with the weights reparameterized
/// onto the sphere.
///
/// For observations `d_i` and component parameters `(mu_k, Sigma_k)`,
///
/// `f(x, y) = sum_i log( sum_k x_k^2 N(d_i; mu_k, Sigma_k) )`
///
/// where `y` packs all means and covariances. For fixed `y` this is
/// additively scale invariant in `x` (base `exp(1/(2n))`, so
/// `grad_x f . x = 2n`), which is what lets the weight update run as a
/// fixed-point iteration on the sphere while the means and covariances
/// follow an M-step.
#[derive(Clone, Debug)]
pub struct GmmProblem {
    data: Array2<f64>,
    k: usize,
    cov_floor: f64,
}

impl GmmProblem {
    /// `cov_floor` defaults to `1e-6`; it is added to every estimated
    /// covariance diagonal to keep the densities evaluable.
    pub fn new(data: Array2<f64>, k: usize, cov_floor: Option<f64>) -> Result<Self> {
        let (n, q) = data.dim();
        if n == 0 || q == 0 {
            return Err(Error::Input("gmm data must be non-empty".into()));
        }
        if k == 0 {
            return Err(Error::Input("gmm needs at least one component".into()));
        }
        if n <= k {
            return Err(Error::Input(format!(
                "gmm needs more observations than components, got n = {} with k = {}",
                n, k
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("gmm data has non-finite entries".into()));
        }
        let cov_floor = cov_floor.unwrap_or(1e-6);
        if !cov_floor.is_finite() || cov_floor < 0.0 {
            return Err(Error::Input(format!(
                "covariance floor must be non-negative and finite, got {}",
                cov_floor
            )));
        }
        Ok(GmmProblem { data, k, cov_floor })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn observations(&self) -> usize {
        self.data.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn cov_floor(&self) -> f64 {
        self.cov_floor
    }

    /// Pack means and covariances into the flat `y` layout: all means
    /// first (component-major), then all covariances (row-major).
    pub fn pack_y(&self, means: &[Array1<f64>], covs: &[Array2<f64>]) -> Result<Array1<f64>> {
        let q = self.feature_dim();
        if means.len() != self.k || covs.len() != self.k {
            return Err(Error::Input(format!(
                "expected {} means and covariances, got {} and {}",
                self.k,
                means.len(),
                covs.len()
            )));
        }
        let mut y = Array1::zeros(self.dim_y());
        let mut at = 0;
        for m in means {
            if m.len() != q {
                return Err(Error::Input("mean dimension mismatch".into()));
            }
            for &v in m.iter() {
                y[at] = v;
                at += 1;
            }
        }
        for c in covs {
            if c.dim() != (q, q) {
                return Err(Error::Input("covariance dimension mismatch".into()));
            }
            for i in 0..q {
                for j in 0..q {
                    y[at] = c[[i, j]];
                    at += 1;
                }
            }
        }
        Ok(y)
    }

    /// Inverse of [`GmmProblem::pack_y`]. Covariances are symmetrized
    /// on the way out so downstream factorizations behave.
    pub fn unpack_y(&self, y: &Array1<f64>) -> Result<(Vec<Array1<f64>>, Vec<Array2<f64>>)> {
        let q = self.feature_dim();
        if y.len() != self.dim_y() {
            return Err(Error::Input(format!(
                "parameter vector has length {}, expected {}",
                y.len(),
                self.dim_y()
            )));
        }
        let mut means = Vec::with_capacity(self.k);
        let mut covs = Vec::with_capacity(self.k);
        let mut at = 0;
        for _ in 0..self.k {
            means.push(Array1::from_shape_fn(q, |i| y[at + i]));
            at += q;
        }
        for _ in 0..self.k {
            let mut c = Array2::zeros((q, q));
            for i in 0..q {
                for j in 0..q {
                    c[[i, j]] = y[at];
                    at += 1;
                }
            }
            for i in 0..q {
                for j in (i + 1)..q {
                    let s = 0.5 * (c[[i, j]] + c[[j, i]]);
                    c[[i, j]] = s;
                    c[[j, i]] = s;
                }
            }
            covs.push(c);
        }
        Ok((means, covs))
    }

    /// `log N(d_i; mu_k, Sigma_k)` for every observation and component,
    /// via Cholesky factors of the covariances.
    pub fn log_densities(
        &self,
        means: &[Array1<f64>],
        covs: &[Array2<f64>],
    ) -> Result<Array2<f64>> {
        let n = self.observations();
        let q = self.feature_dim();
        if means.len() != self.k || covs.len() != self.k {
            return Err(Error::Input("parameter count mismatch".into()));
        }
        let mut out = Array2::zeros((n, self.k));
        for k in 0..self.k {
            let l = cholesky(&covs[k]).map_err(|e| {
                Error::Numeric(format!("component {} covariance is not positive definite ({})", k, e))
            })?;
            let logdet: f64 = (0..q).map(|i| l[[i, i]].ln()).sum::<f64>() * 2.0;
            for i in 0..n {
                let diff = Array1::from_shape_fn(q, |j| self.data[[i, j]] - means[k][j]);
                let z = forward_solve(&l, &diff);
                out[[i, k]] = -0.5 * (q as f64 * LN_2PI + logdet + z.dot(&z));
            }
        }
        Ok(out)
    }

    /// Freeze the component parameters, producing a single-block
    /// problem in the weights alone (used by identity checks and the
    /// weight-only fixed-point step).
    pub fn fixed_parameters(
        &self,
        means: &[Array1<f64>],
        covs: &[Array2<f64>],
    ) -> Result<GmmFixedParams> {
        Ok(GmmFixedParams {
            log_dens: self.log_densities(means, covs)?,
        })
    }

    /// Responsibilities `r_ik = x_k^2 p_ik / sum_l x_l^2 p_il` computed
    /// in log space, plus the log-likelihood of the current pair.
    pub fn responsibilities(
        &self,
        x: &Array1<f64>,
        log_dens: &Array2<f64>,
    ) -> Result<(Array2<f64>, f64)> {
        responsibilities_impl(x, log_dens)
    }
}

fn logsumexp_row(terms: &[f64]) -> Option<f64> {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    Some(m + s.ln())
}

fn responsibilities_impl(x: &Array1<f64>, log_dens: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let (n, k) = log_dens.dim();
    if x.len() != k {
        return Err(Error::Input(format!(
            "weight point has dimension {}, expected {}",
            x.len(),
            k
        )));
    }
    let log_w: Vec<f64> = x.iter().map(|&v| 2.0 * v.abs().ln()).collect();
    let mut resp = Array2::zeros((n, k));
    let mut ll = 0.0;
    let mut terms = vec![0.0; k];
    for i in 0..n {
        for c in 0..k {
            terms[c] = log_w[c] + log_dens[[i, c]];
        }
        let lse = logsumexp_row(&terms).ok_or_else(|| {
            Error::Domain(format!("observation {} has zero mixture mass", i))
        })?;
        for c in 0..k {
            resp[[i, c]] = (terms[c] - lse).exp();
        }
        ll += lse;
    }
    Ok((resp, ll))
}

/// A Gaussian mixture with means and covariances frozen: the
/// log-likelihood as a function of the sphere-parameterized weights
/// only.
#[derive(Clone, Debug)]
pub struct GmmFixedParams {
    log_dens: Array2<f64>,
}

impl GmmFixedParams {
    pub fn log_densities(&self) -> &Array2<f64> {
        &self.log_dens
    }

    /// `u_ik = p_ik / sum_l x_l^2 p_il`, the stable building block of
    /// the gradient and Hessian.
    fn density_ratios(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        let (n, k) = self.log_dens.dim();
        if x.len() != k {
            return Err(Error::Input(format!(
                "expected a point of dimension {}, got {}",
                k,
                x.len()
            )));
        }
        let log_w: Vec<f64> = x.iter().map(|&v| 2.0 * v.abs().ln()).collect();
        let mut u = Array2::zeros((n, k));
        let mut terms = vec![0.0; k];
        for i in 0..n {
            for c in 0..k {
                terms[c] = log_w[c] + self.log_dens[[i, c]];
            }
            let lse = logsumexp_row(&terms).ok_or_else(|| {
                Error::Domain(format!("observation {} has zero mixture mass", i))
            })?;
            for c in 0..k {
                u[[i, c]] = (self.log_dens[[i, c]] - lse).exp();
            }
        }
        Ok(u)
    }
}

impl ScaleInvariantProblem for GmmFixedParams {
    fn dim(&self) -> usize {
        self.log_dens.ncols()
    }

    fn kind(&self) -> InvarianceKind {
        InvarianceKind::Additive {
            base: (1.0 / (2.0 * self.log_dens.nrows() as f64)).exp(),
        }
    }

    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        let (_, ll) = responsibilities_impl(x, &self.log_dens)?;
        Ok(ll)
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let u = self.density_ratios(x)?;
        let k = self.dim();
        Ok(Array1::from_shape_fn(k, |c| {
            2.0 * x[c] * u.column(c).sum()
        }))
    }

    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        let u = self.density_ratios(x)?;
        let k = self.dim();
        let mut h = Array2::zeros((k, k));
        for c in 0..k {
            h[[c, c]] = 2.0 * u.column(c).sum();
        }
        for i in 0..u.nrows() {
            for a in 0..k {
                let fa = 4.0 * x[a] * u[[i, a]];
                if fa == 0.0 {
                    continue;
                }
                for b in 0..k {
                    h[[a, b]] -= fa * x[b] * u[[i, b]];
                }
            }
        }
        Ok(h)
    }
}

impl PartialProblem for GmmProblem {
    fn dim_x(&self) -> usize {
        self.k
    }

    fn dim_y(&self) -> usize {
        let q = self.feature_dim();
        self.k * q + self.k * q * q
    }

    fn value(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64> {
        let (means, covs) = self.unpack_y(y)?;
        let (_, ll) = responsibilities_impl(x, &self.log_densities(&means, &covs)?)?;
        Ok(ll)
    }

    fn gradient_x(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        let (means, covs) = self.unpack_y(y)?;
        self.fixed_parameters(&means, &covs)?.gradient(x)
    }

    fn has_exact_y_step(&self) -> bool {
        true
    }

    /// One M-step: responsibilities at the current `(x, y)`, then the
    /// weighted mean/covariance update (with the covariance floor).
    /// This is the EM surrogate maximization rather than a literal
    /// argmax of `f(x, .)`, but it never decreases the likelihood.
    fn exact_y_step(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        let (means, covs) = self.unpack_y(y)?;
        let log_dens = self.log_densities(&means, &covs)?;
        let (resp, _) = responsibilities_impl(x, &log_dens)?;
        let (new_means, new_covs) = m_step(&self.data, &resp, self.cov_floor)?;
        self.pack_y(&new_means, &new_covs)
    }

    fn hessian_xx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        let (means, covs) = self.unpack_y(y)?;
        self.fixed_parameters(&means, &covs)?.hessian(x)
    }
}

/// Weighted mean / covariance update from responsibilities. Shared by
/// the EM and fixed-point GMM solvers so both see the same M-step.
pub(crate) fn m_step(
    data: &Array2<f64>,
    resp: &Array2<f64>,
    cov_floor: f64,
) -> Result<(Vec<Array1<f64>>, Vec<Array2<f64>>)> {
    let (n, q) = data.dim();
    let k = resp.ncols();
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for c in 0..k {
        let mass: f64 = resp.column(c).sum();
        if !(mass > 1e-300) {
            return Err(Error::Numeric(format!(
                "component {} has collapsed (no responsibility mass)",
                c
            )));
        }
        let mut mu = Array1::zeros(q);
        for i in 0..n {
            let w = resp[[i, c]];
            for j in 0..q {
                mu[j] += w * data[[i, j]];
            }
        }
        mu.mapv_inplace(|v| v / mass);
        let mut cov = Array2::zeros((q, q));
        for i in 0..n {
            let w = resp[[i, c]];
            if w == 0.0 {
                continue;
            }
            for a in 0..q {
                let da = data[[i, a]] - mu[a];
                for b in 0..q {
                    cov[[a, b]] += w * da * (data[[i, b]] - mu[b]);
                }
            }
        }
        cov.mapv_inplace(|v| v / mass);
        for a in 0..q {
            cov[[a, a]] += cov_floor;
        }
        means.push(mu);
        covs.push(cov);
    }
    Ok((means, covs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn naive_value(
        data: &Array2<f64>,
        x: &Array1<f64>,
        means: &[Array1<f64>],
        vars: &[f64],
    ) -> f64 {
        // Plain-arithmetic reference for the 1-D case.
        let mut total = 0.0;
        for i in 0..data.nrows() {
            let mut mass = 0.0;
            for k in 0..x.len() {
                let d = data[[i, 0]] - means[k][0];
                let pdf = (-d * d / (2.0 * vars[k])).exp()
                    / (2.0 * std::f64::consts::PI * vars[k]).sqrt();
                mass += x[k] * x[k] * pdf;
            }
            total += mass.ln();
        }
        total
    }

    fn small_problem() -> (GmmProblem, Array1<f64>) {
        let data = array![[0.0], [0.4], [-0.3], [5.0], [5.5], [4.6]];
        let p = GmmProblem::new(data, 2, Some(0.0)).unwrap();
        let y = p
            .pack_y(
                &[array![0.0], array![5.0]],
                &[array![[1.0]], array![[1.5]]],
            )
            .unwrap();
        (p, y)
    }

    #[test]
    fn value_matches_naive_computation() {
        let (p, y) = small_problem();
        let x = array![0.8, 0.6];
        let got = p.value(&x, &y).unwrap();
        let want = naive_value(
            p.data(),
            &x,
            &[array![0.0], array![5.0]],
            &[1.0, 1.5],
        );
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "{} vs {}", got, want);
    }

    #[test]
    fn weight_gradient_matches_finite_differences_and_identity() {
        let (p, y) = small_problem();
        let (means, covs) = p.unpack_y(&y).unwrap();
        let fixed = p.fixed_parameters(&means, &covs).unwrap();
        let x = array![0.8, -0.6];
        let g = fixed.gradient(&x).unwrap();
        let fd = crate::analysis::finite_diff_gradient(
            &|z: &Array1<f64>| fixed.value(z),
            &x,
            Option::None,
        )
        .unwrap();
        for (a, b) in g.iter().zip(fd.iter()) {
            assert!((a - b).abs() <= 1e-7, "{} vs {}", a, b);
        }
        // Additive invariance: grad f . x = 2n on the sphere (and anywhere).
        assert!((g.dot(&x) - 2.0 * p.observations() as f64).abs() <= 1e-9);

        let h = fixed.hessian(&x).unwrap();
        let fd_h = crate::analysis::finite_diff_hessian(
            &|z: &Array1<f64>| fixed.gradient(z),
            &x,
            Option::None,
        )
        .unwrap();
        for (a, b) in h.iter().zip(fd_h.iter()) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{} vs {}", a, b);
        }
    }

    #[test]
    fn m_step_recovers_separated_clusters() {
        let (p, y) = small_problem();
        let x = array![std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
        let y2 = p.exact_y_step(&x, &y).unwrap();
        let (means, _covs) = p.unpack_y(&y2).unwrap();
        // Soft assignments pull the hard-cluster means (~0.033, ~5.033)
        // toward each other by a hair.
        assert!((means[0][0] - 0.1 / 3.0).abs() <= 0.05);
        assert!((means[1][0] - 15.1 / 3.0).abs() <= 0.05);
        // The M-step does not decrease the likelihood.
        let before = p.value(&x, &y).unwrap();
        let after = p.value(&x, &y2).unwrap();
        assert!(after >= before - 1e-12);
    }

    #[test]
    fn pack_unpack_round_trip_symmetrizes() {
        let data = array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.5], [0.3, 2.0]];
        let p = GmmProblem::new(data, 1, None).unwrap();
        let y = p
            .pack_y(&[array![0.5, -0.5]], &[array![[2.0, 0.3], [0.3, 1.0]]])
            .unwrap();
        let (means, covs) = p.unpack_y(&y).unwrap();
        assert_eq!(means[0], array![0.5, -0.5]);
        assert_eq!(covs[0][[0, 1]], covs[0][[1, 0]]);
    }

    #[test]
    fn constructor_guards() {
        assert!(GmmProblem::new(array![[0.0], [1.0]], 2, None).is_err());
        assert!(GmmProblem::new(array![[0.0], [1.0], [2.0]], 2, None).is_ok());
        assert!(GmmProblem::new(array![[f64::NAN], [1.0], [2.0]], 1, None).is_err());
        assert!(GmmProblem::new(array![[0.0], [1.0], [2.0]], 2, Some(-1.0)).is_err());
    }

    #[test]
    fn non_positive_definite_covariance_is_a_numeric_error() {
        let (p, _) = small_problem();
        let y = p
            .pack_y(
                &[array![0.0], array![5.0]],
                &[array![[0.0]], array![[1.0]]],
            )
            .unwrap();
        assert!(matches!(
            p.value(&array![0.8, 0.6], &y),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn log_densities_match_scalar_gaussian_formula() {
        let data = array![[1.0], [0.0], [2.5]];
        let p = GmmProblem::new(data, 1, None).unwrap();
        let ld = p
            .log_densities(&[array![0.0]], &[array![[4.0]]])
            .unwrap();
        // log N(1; 0, 4) = -0.5 (ln(2 pi 4) + 1/4).
        let want = -0.5 * ((8.0 * std::f64::consts::PI).ln() + 0.25);
        assert!((ld[[0, 0]] - want).abs() <= 1e-14);
    }
}
