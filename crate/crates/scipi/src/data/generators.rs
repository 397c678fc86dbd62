//! Synthetic problem instances with known structure.
//!
//! Everything here is seeded and deterministic: the same seed and shape
//! arguments reproduce the same bytes on every platform, which is what the
//! golden-hash test at the bottom of this file pins down. Generators return
//! ground truth alongside the data whenever there is ground truth to return.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns, sym_eig, EigSort, Rng};

/// Relative eigenvalue floor below which a sample covariance is treated as
/// rank deficient and whitening refuses to proceed.
const WHITEN_EIG_FLOOR: f64 = 1e-12;

/// Symmetric matrix with a prescribed spectrum: `A = Q diag(ev) Q^T` for a
/// random orthonormal `Q`. Eigenvalues are used in the order given, so
/// `eigenvalues[0]` belongs to the first column of `Q`.
pub fn gen_spectrum_matrix(seed: u64, eigenvalues: &Array1<f64>) -> Result<Array2<f64>> {
    let d = eigenvalues.len();
    if d == 0 {
        return Err(Error::Input("spectrum must be nonempty".into()));
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("spectrum contains a non-finite value".into()));
    }
    let mut rng = Rng::new(seed);
    let q = orthonormal_columns(&rng.normal_mat(d, d))?;
    let mut scaled = q.clone();
    for (j, col) in scaled.columns_mut().into_iter().enumerate() {
        let lam = eigenvalues[j];
        for v in col {
            *v *= lam;
        }
    }
    let a = scaled.dot(&q.t());
    // Force exact symmetry; the product above is only symmetric to roundoff.
    let mut sym = a.clone();
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
            sym[[i, j]] = avg;
            sym[[j, i]] = avg;
        }
    }
    Ok(sym)
}

/// Strictly positive design matrix for mixture-proportion problems,
/// entries Uniform(0.1, 1.1). Rows are observations, columns components.
pub fn gen_mixture_design(seed: u64, rows: usize, cols: usize) -> Result<Array2<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::Input("design matrix must be nonempty".into()));
    }
    let mut rng = Rng::new(seed);
    Ok(rng.uniform_mat(rows, cols, 0.1, 1.1))
}

/// Exactly factorizable nonnegative matrix together with the factors that
/// produced it.
pub struct LowRankData {
    pub v: Array2<f64>,
    pub w: Array2<f64>,
    pub h: Array2<f64>,
}

/// Nonnegative `rows x cols` matrix of the given rank, `v = w h` with
/// uniform factors bounded away from zero so no column degenerates.
pub fn gen_lowrank_nonneg(seed: u64, rows: usize, cols: usize, rank: usize) -> Result<LowRankData> {
    if rows == 0 || cols == 0 {
        return Err(Error::Input("low-rank target must be nonempty".into()));
    }
    if rank == 0 || rank > rows.min(cols) {
        return Err(Error::Input(format!(
            "rank {} is out of range for a {}x{} matrix",
            rank, rows, cols
        )));
    }
    let mut rng = Rng::new(seed);
    let w = rng.uniform_mat(rows, rank, 0.1, 1.0);
    let h = rng.uniform_mat(rank, cols, 0.1, 1.0);
    let v = w.dot(&h);
    Ok(LowRankData { v, w, h })
}

/// Parameters the GMM sampler drew from.
pub struct GmmGroundTruth {
    pub weights: Array1<f64>,
    pub means: Vec<Array1<f64>>,
    pub covariances: Vec<Array2<f64>>,
}

pub struct GmmData {
    /// `n x dim`, rows grouped by component (component 0 first).
    pub data: Array2<f64>,
    pub truth: GmmGroundTruth,
}

/// Draw `n` points from a mixture of `components` unit-covariance Gaussians
/// whose means sit at `separation * c` along the first axis, `c = 0, 1, ...`.
/// Counts split as evenly as `n` allows, leftovers going to the earliest
/// components; the returned weights are the realized counts over `n`.
pub fn gen_gmm_data(
    seed: u64,
    n: usize,
    components: usize,
    dim: usize,
    separation: f64,
) -> Result<GmmData> {
    if components == 0 || dim == 0 {
        return Err(Error::Input("need at least one component and one dimension".into()));
    }
    if n < components {
        return Err(Error::Input(format!(
            "cannot spread {} points over {} components",
            n, components
        )));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::Input("separation must be finite and nonnegative".into()));
    }
    let mut rng = Rng::new(seed);
    let base = n / components;
    let extra = n % components;

    let mut means = Vec::with_capacity(components);
    let mut covariances = Vec::with_capacity(components);
    let mut weights = Array1::zeros(components);
    let mut data = Array2::zeros((n, dim));
    let mut row = 0;
    for c in 0..components {
        let count = base + usize::from(c < extra);
        let mut mean = Array1::zeros(dim);
        mean[0] = separation * c as f64;
        for _ in 0..count {
            for j in 0..dim {
                data[[row, j]] = mean[j] + rng.normal();
            }
            row += 1;
        }
        weights[c] = count as f64 / n as f64;
        means.push(mean);
        covariances.push(Array2::eye(dim));
    }
    Ok(GmmData {
        data,
        truth: GmmGroundTruth { weights, means, covariances },
    })
}

pub struct IcaData {
    /// `n x dim` whitened observations (sample covariance is the identity).
    pub whitened: Array2<f64>,
    /// Orthonormal columns; column `j` is the direction in whitened space
    /// that recovers source `j`.
    pub directions: Array2<f64>,
}

/// Independent unit-variance Laplace sources pushed through a random square
/// mixing matrix, then ZCA-whitened. The returned directions are the images
/// of the sources in whitened coordinates, orthonormalized; a kurtosis
/// solver that works should land on one of them (up to sign).
pub fn gen_ica_data(seed: u64, n: usize, dim: usize) -> Result<IcaData> {
    if dim == 0 {
        return Err(Error::Input("need at least one source".into()));
    }
    if n < 10 * dim {
        return Err(Error::Input(format!(
            "{} samples is too few to whiten {} dimensions",
            n, dim
        )));
    }
    let mut rng = Rng::new(seed);

    // Unit-variance Laplace sources: the standard draw has variance 2.
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut sources = Array2::zeros((n, dim));
    for i in 0..n {
        for j in 0..dim {
            sources[[i, j]] = scale * rng.laplace();
        }
    }
    let mixing = rng.normal_mat(dim, dim);
    let mixed = sources.dot(&mixing.t());

    // ZCA whitening from the sample covariance (data are zero-mean by
    // construction, so no centering step).
    let cov = mixed.t().dot(&mixed) / n as f64;
    let eig = sym_eig(&cov, EigSort::ValueDesc)?;
    let lam_max = eig.values[0];
    let lam_min = eig.values[dim - 1];
    if !(lam_min > WHITEN_EIG_FLOOR * lam_max) {
        return Err(Error::Numeric(format!(
            "mixed data is numerically rank deficient (eigenvalue ratio {:e})",
            lam_min / lam_max
        )));
    }
    let mut inv_sqrt = eig.vectors.clone();
    for (j, col) in inv_sqrt.columns_mut().into_iter().enumerate() {
        let s = eig.values[j].sqrt().recip();
        for v in col {
            *v *= s;
        }
    }
    let m = inv_sqrt.dot(&eig.vectors.t());
    let whitened = mixed.dot(&m);

    // In whitened coordinates the effective mixing matrix M A is orthogonal
    // up to sampling error; snap it to exactly orthonormal columns.
    let directions = orthonormal_columns(&m.dot(&mixing))?;
    Ok(IcaData { whitened, directions })
}
