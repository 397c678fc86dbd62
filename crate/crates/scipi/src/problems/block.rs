use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::problems::Quadratic;
use crate::problems::ScaleInvariantProblem;

/// A two-block objective `f(x, y)` maximized over the product of two
/// unit spheres.
///
/// The block fixed-point iteration normalizes each block gradient in
/// turn, so implementors must provide both gradients; the Hessian
/// blocks default to finite differences and feed the two-block rate
/// analysis. `hessian_yx` is the `dim_y x dim_x` mixed block
/// `d(grad_y f)/dx`.
pub trait BlockProblem {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn value(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64>;
    fn gradient_x(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>>;
    fn gradient_y(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>>;

    fn hessian_xx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        crate::analysis::finite_diff_hessian(
            &|z: &Array1<f64>| self.gradient_x(z, y),
            x,
            None,
        )
    }

    fn hessian_yy(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        crate::analysis::finite_diff_hessian(
            &|z: &Array1<f64>| self.gradient_y(x, z),
            y,
            None,
        )
    }

    fn hessian_yx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        crate::analysis::finite_diff_jacobian(
            &|z: &Array1<f64>| self.gradient_y(z, y),
            x,
            None,
        )
    }
}

fn check_pair(dx: usize, dy: usize, x: &Array1<f64>, y: &Array1<f64>) -> Result<()> {
    if x.len() != dx || y.len() != dy {
        return Err(Error::Input(format!(
            "expected block dimensions ({}, {}), got ({}, {})",
            dx,
            dy,
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// `f(x, y) = x^T A x / 2 + y^T B y / 2`: no coupling at all. The block
/// iteration decomposes into two independent single-block runs, which
/// makes this the reference case for the two-block machinery.
#[derive(Clone, Debug)]
pub struct SeparableBlock {
    qa: Quadratic,
    qb: Quadratic,
}

impl SeparableBlock {
    pub fn new(a: Array2<f64>, b: Array2<f64>) -> Result<Self> {
        Ok(SeparableBlock {
            qa: Quadratic::new(a)?,
            qb: Quadratic::new(b)?,
        })
    }

    pub fn blocks(&self) -> (&Quadratic, &Quadratic) {
        (&self.qa, &self.qb)
    }
}

impl BlockProblem for SeparableBlock {
    fn dim_x(&self) -> usize {
        self.qa.dim()
    }

    fn dim_y(&self) -> usize {
        self.qb.dim()
    }

    fn value(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64> {
        Ok(self.qa.value(x)? + self.qb.value(y)?)
    }

    fn gradient_x(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        self.qa.gradient(x)
    }

    fn gradient_y(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        self.qb.gradient(y)
    }

    fn hessian_xx(&self, x: &Array1<f64>, _y: &Array1<f64>) -> Result<Array2<f64>> {
        self.qa.hessian(x)
    }

    fn hessian_yy(&self, _x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        self.qb.hessian(y)
    }

    fn hessian_yx(&self, _x: &Array1<f64>, _y: &Array1<f64>) -> Result<Array2<f64>> {
        Ok(Array2::zeros((self.dim_y(), self.dim_x())))
    }
}

/// `f(x, y) = x^T C y`: pure coupling. The stationary pairs are the
/// singular vector pairs of `C`; the two-block iteration is then the
/// classical alternating power method for the top singular pair.
#[derive(Clone, Debug)]
pub struct BilinearBlock {
    c: Array2<f64>,
}

impl BilinearBlock {
    pub fn new(c: Array2<f64>) -> Result<Self> {
        let (n, m) = c.dim();
        if n == 0 || m == 0 {
            return Err(Error::Input("coupling matrix must be non-empty".into()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("coupling matrix has non-finite entries".into()));
        }
        Ok(BilinearBlock { c })
    }

    pub fn coupling(&self) -> &Array2<f64> {
        &self.c
    }
}

impl BlockProblem for BilinearBlock {
    fn dim_x(&self) -> usize {
        self.c.nrows()
    }

    fn dim_y(&self) -> usize {
        self.c.ncols()
    }

    fn value(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        Ok(x.dot(&self.c.dot(y)))
    }

    fn gradient_x(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        Ok(self.c.dot(y))
    }

    fn gradient_y(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        Ok(self.c.t().dot(x))
    }

    fn hessian_xx(&self, _x: &Array1<f64>, _y: &Array1<f64>) -> Result<Array2<f64>> {
        Ok(Array2::zeros((self.dim_x(), self.dim_x())))
    }

    fn hessian_yy(&self, _x: &Array1<f64>, _y: &Array1<f64>) -> Result<Array2<f64>> {
        Ok(Array2::zeros((self.dim_y(), self.dim_y())))
    }

    fn hessian_yx(&self, _x: &Array1<f64>, _y: &Array1<f64>) -> Result<Array2<f64>> {
        Ok(self.c.t().to_owned())
    }
}

/// Two quadratic blocks with a tunable quartic coupling term:
///
/// `f(x, y) = x^T A x / 2 + y^T B y / 2 + eps (x^T C y)^2 / 2`.
///
/// At `eps = 0` this is [`SeparableBlock`]; small `eps` produces a
/// genuinely coupled instance whose mixed Hessian norm enters the
/// two-block rate bound, while each block stays exactly quadratic in
/// itself (so the per-block eigenvector structure is preserved at any
/// stationary pair).
#[derive(Clone, Debug)]
pub struct CoupledBlock {
    qa: Quadratic,
    qb: Quadratic,
    c: Array2<f64>,
    eps: f64,
}

impl CoupledBlock {
    pub fn new(a: Array2<f64>, b: Array2<f64>, c: Array2<f64>, eps: f64) -> Result<Self> {
        let qa = Quadratic::new(a)?;
        let qb = Quadratic::new(b)?;
        if c.nrows() != qa.dim() || c.ncols() != qb.dim() {
            return Err(Error::Input(format!(
                "coupling matrix must be {}x{}, got {}x{}",
                qa.dim(),
                qb.dim(),
                c.nrows(),
                c.ncols()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) || !eps.is_finite() {
            return Err(Error::Input("coupling terms must be finite".into()));
        }
        Ok(CoupledBlock { qa, qb, c, eps })
    }
}

impl BlockProblem for CoupledBlock {
    fn dim_x(&self) -> usize {
        self.qa.dim()
    }

    fn dim_y(&self) -> usize {
        self.qb.dim()
    }

    fn value(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        let s = x.dot(&self.c.dot(y));
        Ok(self.qa.value(x)? + self.qb.value(y)? + 0.5 * self.eps * s * s)
    }

    fn gradient_x(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        let cy = self.c.dot(y);
        let s = x.dot(&cy);
        let mut g = self.qa.gradient(x)?;
        g.scaled_add(self.eps * s, &cy);
        Ok(g)
    }

    fn gradient_y(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        let ctx = self.c.t().dot(x);
        let s = ctx.dot(y);
        let mut g = self.qb.gradient(y)?;
        g.scaled_add(self.eps * s, &ctx);
        Ok(g)
    }

    fn hessian_xx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        let cy = self.c.dot(y);
        let mut h = self.qa.hessian(x)?;
        for a in 0..h.nrows() {
            for b in 0..h.ncols() {
                h[[a, b]] += self.eps * cy[a] * cy[b];
            }
        }
        Ok(h)
    }

    fn hessian_yy(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        let ctx = self.c.t().dot(x);
        let mut h = self.qb.hessian(y)?;
        for a in 0..h.nrows() {
            for b in 0..h.ncols() {
                h[[a, b]] += self.eps * ctx[a] * ctx[b];
            }
        }
        Ok(h)
    }

    fn hessian_yx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        check_pair(self.dim_x(), self.dim_y(), x, y)?;
        let cy = self.c.dot(y);
        let ctx = self.c.t().dot(x);
        let s = x.dot(&cy);
        let mut h = self.c.t().to_owned() * (self.eps * s);
        for a in 0..self.dim_y() {
            for b in 0..self.dim_x() {
                h[[a, b]] += self.eps * ctx[a] * cy[b];
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
    fn separable_blocks_have_zero_mixed_hessian() {
        let p = SeparableBlock::new(
            array![[2.0, 0.0], [0.0, 1.0]],
            array![[3.0, 1.0], [1.0, 2.0]],
        )
        .unwrap();
        let x = array![0.6, 0.8];
        let y = array![1.0, 0.0];
        let hyx = p.hessian_yx(&x, &y).unwrap();
        assert!(hyx.iter().all(|&v| v == 0.0));
        assert!((p.value(&x, &y).unwrap() - (0.5 * (2.0 * 0.36 + 0.64) + 1.5)).abs() <= 1e-15);
    }

    #[test]
    fn bilinear_gradients_are_the_coupling_products() {
        let p = BilinearBlock::new(array![[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let x = array![1.0, 0.0];
        let y = array![1.0, 0.0];
        let gx = p.gradient_x(&x, &y).unwrap();
        let gy = p.gradient_y(&x, &y).unwrap();
        assert_eq!(gx, array![2.0, 0.0]);
        assert_eq!(gy, array![2.0, 0.0]);
        assert_eq!(p.hessian_yx(&x, &y).unwrap(), array![[2.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn coupled_block_analytic_hessians_match_finite_differences() {
        let p = CoupledBlock::new(
            array![[2.0, 0.3], [0.3, 1.0]],
            array![[3.0, 0.0], [0.0, 1.5]],
            array![[0.5, -0.2], [0.1, 0.4]],
            0.3,
        )
        .unwrap();
        let x = array![0.6, -0.8];
        let y = array![0.28, 0.96];

        let hxx = p.hessian_xx(&x, &y).unwrap();
        let fd_xx = crate::analysis::finite_diff_hessian(
            &|z: &Array1<f64>| p.gradient_x(z, &y),
            &x,
            Option::None,
        )
        .unwrap();
        for (a, b) in hxx.iter().zip(fd_xx.iter()) {
            assert!((a - b).abs() <= 1e-7, "{} vs {}", a, b);
        }

        let hyx = p.hessian_yx(&x, &y).unwrap();
        let fd_yx = crate::analysis::finite_diff_jacobian(
            &|z: &Array1<f64>| p.gradient_y(z, &y),
            &x,
            Option::None,
        )
        .unwrap();
        for (a, b) in hyx.iter().zip(fd_yx.iter()) {
            assert!((a - b).abs() <= 1e-7, "{} vs {}", a, b);
        }

        // The gradient of the value matches the declared block gradients.
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
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let p = BilinearBlock::new(array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!(p.value(&array![1.0, 0.0], &array![1.0, 0.0]).is_err());
        assert!(CoupledBlock::new(
            array![[1.0, 0.0], [0.0, 1.0]],
            array![[1.0]],
            array![[1.0], [0.0], [0.0]],
            0.1
        )
        .is_err());
    }
}
