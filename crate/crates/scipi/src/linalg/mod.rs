//! Dense kernels shared across the crate.
//!
//! Everything here is deliberately dependency-free and deterministic:
//! fixed iteration orders, explicit tie-breaking, no threading.

mod eig;
mod rng;

pub use eig::{sym_eig, EigSort, SymEig};
pub use rng::Rng;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Euclidean norm.
pub fn norm2(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `x / ||x||`, rejecting zero or non-finite input.
pub fn normalize_unit(x: &Array1<f64>) -> Result<Array1<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("cannot normalize a non-finite vector".into()));
    }
    let n = norm2(x);
    if n <= 0.0 {
        return Err(Error::Input("cannot normalize the zero vector".into()));
    }
    Ok(x / n)
}

/// Euclidean projection of `v` onto the simplex
/// `{ w : w_i >= 0, sum w_i = total }` by the sort-and-threshold rule.
///
/// Non-negativity of the output is exact (each coordinate is a
/// `max(.., 0.0)`); the sum matches `total` up to roundoff in the fixed
/// left-to-right summation order. The projection is the unique nearest
/// point, so applying it twice gives the same answer (up to roundoff in
/// the threshold).
pub fn project_simplex(v: &Array1<f64>, total: f64) -> Result<Array1<f64>> {
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Input(format!(
            "simplex total must be positive and finite, got {}",
            total
        )));
    }
    if v.is_empty() {
        return Err(Error::Input("cannot project an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("cannot project a non-finite vector".into()));
    }
    let mut u: Vec<f64> = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - total) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    Ok(v.mapv(|x| (x - tau).max(0.0)))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite
/// matrix: `A = L L^T`.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::Input(format!("cholesky needs a square matrix, got {}x{}", n, m)));
    }
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Numeric(format!(
                        "matrix is not positive definite (pivot {} at row {})",
                        s, i
                    )));
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solve `L z = b` for a lower-triangular `L` by forward substitution.
pub fn forward_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let t = l[[i, k]] * y[k];
            y[i] -= t;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Solve `L L^T x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let t = l[[i, k]] * y[k];
            y[i] -= t;
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[[k, i]] * y[k];
            y[i] -= t;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Orthonormalize the columns of `a` by modified Gram-Schmidt with one
/// reorthogonalization pass. Errors if the columns are numerically
/// dependent.
pub fn orthonormal_columns(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, k) = a.dim();
    if k > n {
        return Err(Error::Input(format!(
            "cannot orthonormalize {} columns in dimension {}",
            k, n
        )));
    }
    let mut q = a.to_owned();
    for j in 0..k {
        let start_norm = norm2(&q.column(j).to_owned());
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).to_owned();
                let r = qi.dot(&q.column(j));
                let mut col = q.column_mut(j);
                col.scaled_add(-r, &qi);
            }
        }
        let nrm = q.column(j).dot(&q.column(j)).sqrt();
        if !(nrm > 1e-12 * (1.0 + start_norm)) {
            return Err(Error::Input(format!(
                "column {} is numerically dependent on earlier columns",
                j
            )));
        }
        q.column_mut(j).mapv_inplace(|v| v / nrm);
    }
    Ok(q)
}

/// Spectral norm of `H (I - x x^T)`: the largest singular value of the
/// Hessian restricted to directions orthogonal to `x`. For `x` an
/// eigenvector of `H` this equals the largest `|lambda_i|` over the
/// remaining eigenvalues.
pub fn projected_hessian_norm(h: &Array2<f64>, x: &Array1<f64>) -> Result<f64> {
    let (n, m) = h.dim();
    if n != m || x.len() != n {
        return Err(Error::Input(format!(
            "projected_hessian_norm dimension mismatch: H is {}x{}, x has length {}",
            n,
            m,
            x.len()
        )));
    }
    // T = H (I - x x^T) = H - (H x) x^T, then ||T||_2^2 = lambda_max(T^T T).
    let hx = h.dot(x);
    let mut t = h.to_owned();
    for i in 0..n {
        for j in 0..n {
            t[[i, j]] -= hx[i] * x[j];
        }
    }
    let g = t.t().dot(&t);
    let e = sym_eig(&g, EigSort::ValueDesc)?;
    Ok(e.values[0].max(0.0).sqrt())
}

/// Spectral norm (largest singular value) of a rectangular matrix.
pub fn spectral_norm(a: &Array2<f64>) -> Result<f64> {
    let g = if a.nrows() <= a.ncols() {
        a.dot(&a.t())
    } else {
        a.t().dot(a)
    };
    let e = sym_eig(&g, EigSort::ValueDesc)?;
    Ok(e.values[0].max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn simplex_projection_matches_hand_checked_cases() {
        let cases: &[(&[f64], f64, &[f64])] = &[
            (&[1.0, 0.5, -0.5], 1.0, &[0.75, 0.25, 0.0]),
            (
                &[0.2, 0.3, 0.1],
                1.0,
                &[0.33333333333333337, 0.43333333333333335, 0.23333333333333334],
            ),
            (&[3.0, 1.0], 2.0, &[2.0, 0.0]),
            (&[-1.0, -2.0, -3.0], 1.0, &[1.0, 0.0, 0.0]),
        ];
        for (v, total, want) in cases {
            let got = project_simplex(&Array1::from(v.to_vec()), *total).unwrap();
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() <= 1e-15, "{:?} -> {:?}", v, got);
            }
        }
    }

    #[test]
    fn simplex_projection_is_feasible_and_idempotent() {
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let d = 1 + (rng.next_u64() % 8) as usize;
            let v = Array1::from_shape_fn(d, |_| 4.0 * rng.normal());
            let total = 0.25 + 3.0 * rng.uniform();
            let p = project_simplex(&v, total).unwrap();
            assert!(p.iter().all(|&x| x >= 0.0));
            let sum: f64 = p.sum();
            assert!((sum - total).abs() <= 1e-12 * (1.0 + total));
            let p2 = project_simplex(&p, total).unwrap();
            for (a, b) in p.iter().zip(p2.iter()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn simplex_projection_rejects_bad_input() {
        let v = array![1.0, 2.0];
        assert!(project_simplex(&v, 0.0).is_err());
        assert!(project_simplex(&v, -1.0).is_err());
        assert!(project_simplex(&array![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn cholesky_round_trip() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let rec = l.dot(&l.t());
        for i in 0..3 {
            for j in 0..3 {
                assert!((rec[[i, j]] - a[[i, j]]).abs() <= 1e-12);
            }
        }
        let b = array![1.0, -2.0, 0.5];
        let x = cholesky_solve(&l, &b);
        let r = a.dot(&x) - &b;
        assert!(norm2(&r) <= 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(cholesky(&a), Err(Error::Numeric(_))));
    }

    #[test]
    fn orthonormal_columns_produces_orthonormal_basis() {
        let mut rng = Rng::new(9);
        let a = rng.normal_mat(6, 4);
        let q = orthonormal_columns(&a).unwrap();
        let qtq = q.t().dot(&q);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[[i, j]] - want).abs() <= 1e-12);
            }
        }
        // Span is preserved: each original column is reproducible from Q.
        let coeff = q.t().dot(&a);
        let rec = q.dot(&coeff);
        for (x, y) in rec.iter().zip(a.iter()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn orthonormal_columns_rejects_dependent_input() {
        let a = array![[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]];
        assert!(orthonormal_columns(&a).is_err());
    }

    #[test]
    fn projected_hessian_norm_on_eigenvector_is_second_eigenvalue() {
        let h = array![[3.0, 0.0, 0.0], [0.0, -2.5, 0.0], [0.0, 0.0, 1.0]];
        let x = array![1.0, 0.0, 0.0];
        let got = projected_hessian_norm(&h, &x).unwrap();
        assert!((got - 2.5).abs() <= 1e-12);
    }

    #[test]
    fn spectral_norm_of_rectangular_matrix() {
        let a = array![[3.0, 0.0], [0.0, 4.0], [0.0, 0.0]];
        assert!((spectral_norm(&a).unwrap() - 4.0).abs() <= 1e-12);
        let b = array![[2.0, 0.0, 0.0]];
        assert!((spectral_norm(&b).unwrap() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn normalize_unit_rejects_zero() {
        assert!(normalize_unit(&array![0.0, 0.0]).is_err());
        let x = normalize_unit(&array![3.0, 4.0]).unwrap();
        assert!((norm2(&x) - 1.0).abs() <= 1e-15);
    }
}
