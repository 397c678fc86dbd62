use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::norm2;

/// Default central-difference step: `eps^(1/3) * (1 + ||x||)`, the
/// usual balance between truncation and rounding error for second-order
/// differences.
pub fn default_fd_step(x: &Array1<f64>) -> f64 {
    f64::EPSILON.powf(1.0 / 3.0) * (1.0 + norm2(x))
}

fn resolve_step(x: &Array1<f64>, step: Option<f64>) -> Result<f64> {
    match step {
        Option::None => Ok(default_fd_step(x)),
        Some(h) if h > 0.0 && h.is_finite() => Ok(h),
        Some(h) => Err(Error::Config(format!(
            "finite difference step must be positive and finite, got {}",
            h
        ))),
    }
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_gradient<F>(f: &F, x: &Array1<f64>, step: Option<f64>) -> Result<Array1<f64>>
where
    F: Fn(&Array1<f64>) -> Result<f64> + ?Sized,
{
    let h = resolve_step(x, step)?;
    let d = x.len();
    let mut g = Array1::zeros(d);
    let mut xp = x.clone();
    for i in 0..d {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp)?;
        xp[i] = xi - h;
        let fm = f(&xp)?;
        xp[i] = xi;
        let gi = (fp - fm) / (2.0 * h);
        if !gi.is_finite() {
            return Err(Error::Numeric(format!(
                "finite difference gradient is not finite at coordinate {}",
                i
            )));
        }
        g[i] = gi;
    }
    Ok(g)
}

/// Central-difference Jacobian of a vector-valued map: column `j`
/// holds `d g / d x_j`. No symmetry is assumed or imposed.
pub fn finite_diff_jacobian<G>(g: &G, x: &Array1<f64>, step: Option<f64>) -> Result<Array2<f64>>
where
    G: Fn(&Array1<f64>) -> Result<Array1<f64>> + ?Sized,
{
    let h = resolve_step(x, step)?;
    let d = x.len();
    let mut xp = x.clone();
    let mut out: Option<Array2<f64>> = Option::None;
    for j in 0..d {
        let xj = x[j];
        xp[j] = xj + h;
        let gp = g(&xp)?;
        xp[j] = xj - h;
        let gm = g(&xp)?;
        xp[j] = xj;
        if gp.len() != gm.len() {
            return Err(Error::Input("map output length varies between evaluations".into()));
        }
        let m = out.get_or_insert_with(|| Array2::zeros((gp.len(), d)));
        if gp.len() != m.nrows() {
            return Err(Error::Input("map output length varies between evaluations".into()));
        }
        for i in 0..gp.len() {
            let v = (gp[i] - gm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "finite difference jacobian is not finite at entry ({}, {})",
                    i, j
                )));
            }
            m[[i, j]] = v;
        }
    }
    out.ok_or_else(|| Error::Input("cannot differentiate over an empty point".into()))
}

/// Central-difference Jacobian of a gradient, symmetrized into a
/// Hessian estimate.
pub fn finite_diff_hessian<G>(grad: &G, x: &Array1<f64>, step: Option<f64>) -> Result<Array2<f64>>
where
    G: Fn(&Array1<f64>) -> Result<Array1<f64>> + ?Sized,
{
    let h = resolve_step(x, step)?;
    let d = x.len();
    let mut m = Array2::zeros((d, d));
    let mut xp = x.clone();
    for j in 0..d {
        let xj = x[j];
        xp[j] = xj + h;
        let gp = grad(&xp)?;
        xp[j] = xj - h;
        let gm = grad(&xp)?;
        xp[j] = xj;
        if gp.len() != d || gm.len() != d {
            return Err(Error::Input(
                "gradient length does not match the point dimension".into(),
            ));
        }
        for i in 0..d {
            let v = (gp[i] - gm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "finite difference hessian is not finite at entry ({}, {})",
                    i, j
                )));
            }
            m[[i, j]] = v;
        }
    }
    // Exact symmetry by construction keeps downstream eigensolves happy.
    let mut sym = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            sym[[i, j]] = 0.5 * (m[[i, j]] + m[[j, i]]);
        }
    }
    Ok(sym)
}
