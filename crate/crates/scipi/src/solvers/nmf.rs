//! KL nonnegative matrix factorization with three interchangeable
//! column updates.
//!
//! The outer loop is the usual alternating scheme: update every column
//! of `H` against the fixed basis `W`, then every row of `W` through
//! the transposed view, then log the divergence. The three inner
//! updates are
//!
//! * `Multiplicative`: the classical ratio update,
//! * `ProjectedGradient`: a scaled gradient step followed by a simplex
//!   projection in the normalized frame,
//! * `SciPi`: the spherical fixed-point update applied to the
//!   equivalent simplex-constrained log objective.
//!
//! Each column subproblem `min_h KL(v || W h)` is, up to constants,
//! maximization of `sum_i v_i log (W h)_i` over a scaled simplex, which
//! is what makes the latter two updates meaningful.

use ndarray::{Array1, Array2};

use super::{f_gap_met, SolverConfig, StopReason};
use crate::error::{Error, Result};
use crate::linalg::project_simplex;

/// Ratios `v / (W h)` floor their denominator here.
pub const MASS_FLOOR: f64 = 1e-300;

/// Step factors tried when projected gradient is run without an
/// explicit `cfg.step`.
pub const PGD_STEP_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NmfMethod {
    Multiplicative,
    ProjectedGradient,
    SciPi,
}

impl NmfMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            NmfMethod::Multiplicative => "multiplicative",
            NmfMethod::ProjectedGradient => "projected-gradient",
            NmfMethod::SciPi => "sci-pi",
        }
    }
}

/// Starting factors for a factorization run.
#[derive(Clone, Debug)]
pub enum NmfInit {
    /// Uniform random factors smoothed by one multiplicative outer
    /// iteration. Deterministic in the seed, shared across methods.
    Seeded(u64),
    /// Explicit factors, used verbatim.
    Factors { w: Array2<f64>, h: Array2<f64> },
}

/// A factorization result. `kl_trace[j]` is the divergence after `j`
/// outer iterations (`kl_trace[0]` scores the initial factors), so the
/// trace has `iterations + 1` entries. `best_kl` is the smallest value
/// seen. `floor_hits` counts ratio evaluations during the main run
/// whose denominator had to be floored.
#[derive(Clone, Debug)]
pub struct NmfFit {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub kl_trace: Vec<f64>,
    pub best_kl: f64,
    /// The projected-gradient step factor actually used (grid-selected
    /// unless `cfg.step` pinned it); `None` for the other methods.
    pub step_factor: Option<f64>,
    pub floor_hits: usize,
    pub converged: bool,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl NmfFit {
    pub fn final_kl(&self) -> f64 {
        *self.kl_trace.last().expect("kl trace is never empty")
    }
}

/// Generalized Kullback-Leibler divergence
/// `sum_ij v log(v/m) - v + m` between a nonnegative matrix and its
/// model. Zero entries of `v` contribute `m`; model entries below
/// [`MASS_FLOOR`] are floored.
pub fn kl_divergence(v: &Array2<f64>, model: &Array2<f64>) -> Result<f64> {
    if v.dim() != model.dim() {
        return Err(Error::Input(format!(
            "shape mismatch: data is {:?}, model is {:?}",
            v.dim(),
            model.dim()
        )));
    }
    let mut hits = 0;
    kl_with_floor(v, model, &mut hits)
}

fn kl_with_floor(v: &Array2<f64>, model: &Array2<f64>, floor_hits: &mut usize) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in v.iter().zip(model.iter()) {
        if !a.is_finite() || *a < 0.0 || !b.is_finite() || *b < 0.0 {
            return Err(Error::Input(
                "divergence needs finite nonnegative entries".into(),
            ));
        }
        if *a > 0.0 {
            let m = if *b < MASS_FLOOR {
                *floor_hits += 1;
                MASS_FLOOR
            } else {
                *b
            };
            total += a * (a / m).ln() - a + m;
        } else {
            total += b;
        }
    }
    Ok(total)
}

/// Factorize `v` as `w h` with `rank` components by minimizing the
/// generalized KL divergence.
///
/// Runs until the factor change drops below `x_tol`, the configured
/// objective gap is met, or `max_iter` outer iterations have passed.
/// Fully deterministic for a given init.
pub fn nmf_solve(
    v: &Array2<f64>,
    rank: usize,
    method: NmfMethod,
    init: &NmfInit,
    cfg: &SolverConfig,
) -> Result<NmfFit> {
    cfg.validate()?;
    let (n, m) = v.dim();
    if n == 0 || m == 0 {
        return Err(Error::Input("data matrix must be non-empty".into()));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Input(
            "data matrix must be nonnegative and finite".into(),
        ));
    }
    if rank == 0 || rank > n.min(m) {
        return Err(Error::Input(format!(
            "rank must be between 1 and min(n, m) = {}, got {}",
            n.min(m),
            rank
        )));
    }

    let (mut w, mut h) = resolve_init(v, rank, init)?;
    let sigma = cfg.shift.unwrap_or(1.0);

    let step_factor = match method {
        NmfMethod::ProjectedGradient => Some(match cfg.step {
            Some(s) => s,
            None => pick_step_factor(v, &w, &h, sigma)?,
        }),
        _ => None,
    };

    let mut floor_hits = 0usize;
    let mut sink = 0usize; // floors during divergence evaluations are not counted
    let mut trace = vec![kl_with_floor(v, &w.dot(&h), &mut sink)?];
    let mut best = trace[0];
    let mut iterations = 0;
    let mut stop = StopReason::MaxIter;
    let mut converged = false;

    for iter in 0..cfg.max_iter {
        let w_prev = w.clone();
        let h_prev = h.clone();
        outer_iteration(v, &mut w, &mut h, method, sigma, step_factor, &mut floor_hits)?;
        let kl = kl_with_floor(v, &w.dot(&h), &mut sink)?;
        trace.push(kl);
        if kl < best {
            best = kl;
        }
        iterations = iter + 1;

        let dw = frob_delta(&w, &w_prev);
        let dh = frob_delta(&h, &h_prev);
        let step = dw.max(dh);
        if step < cfg.x_tol {
            stop = StopReason::XTol;
            converged = true;
            break;
        }
        // The divergence is minimized here, so compare through the
        // same gap rule the other solvers use.
        if f_gap_met(cfg, kl) {
            stop = StopReason::FTol;
            converged = true;
            break;
        }
    }

    Ok(NmfFit {
        w,
        h,
        kl_trace: trace,
        best_kl: best,
        step_factor,
        floor_hits,
        converged,
        iterations,
        stop_reason: stop,
    })
}

fn frob_delta(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn resolve_init(v: &Array2<f64>, rank: usize, init: &NmfInit) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, m) = v.dim();
    match init {
        NmfInit::Factors { w, h } => {
            if w.dim() != (n, rank) || h.dim() != (rank, m) {
                return Err(Error::Input(format!(
                    "factor shapes {:?} / {:?} do not match data {:?} at rank {}",
                    w.dim(),
                    h.dim(),
                    v.dim(),
                    rank
                )));
            }
            if w.iter().chain(h.iter()).any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Input(
                    "initial factors must be nonnegative and finite".into(),
                ));
            }
            Ok((w.clone(), h.clone()))
        }
        NmfInit::Seeded(seed) => {
            let mut rng = crate::linalg::Rng::new(*seed);
            let mut w = rng.uniform_mat(n, rank, 0.0, 1.0);
            let mut h = rng.uniform_mat(rank, m, 0.0, 1.0);
            // One multiplicative sweep turns the raw noise into a
            // sensible common starting point for every method.
            let mut sink = 0usize;
            outer_iteration(
                v,
                &mut w,
                &mut h,
                NmfMethod::Multiplicative,
                1.0,
                None,
                &mut sink,
            )?;
            Ok((w, h))
        }
    }
}

/// Try each grid factor for one outer iteration from the shared start
/// and keep the one with the lowest divergence (first wins ties).
fn pick_step_factor(v: &Array2<f64>, w0: &Array2<f64>, h0: &Array2<f64>, sigma: f64) -> Result<f64> {
    let mut best = PGD_STEP_GRID[0];
    let mut best_kl = f64::INFINITY;
    for &s in PGD_STEP_GRID.iter() {
        let mut w = w0.clone();
        let mut h = h0.clone();
        let mut sink = 0usize;
        outer_iteration(
            v,
            &mut w,
            &mut h,
            NmfMethod::ProjectedGradient,
            sigma,
            Some(s),
            &mut sink,
        )?;
        let kl = kl_with_floor(v, &w.dot(&h), &mut sink)?;
        if kl < best_kl {
            best_kl = kl;
            best = s;
        }
    }
    Ok(best)
}

/// One alternating sweep: all columns of `H` against `W`, then all
/// rows of `W` through the transposed problem `V^T = H^T W^T`.
fn outer_iteration(
    v: &Array2<f64>,
    w: &mut Array2<f64>,
    h: &mut Array2<f64>,
    method: NmfMethod,
    sigma: f64,
    step: Option<f64>,
    floor_hits: &mut usize,
) -> Result<()> {
    update_block(v, w, h, method, sigma, step, floor_hits)?;
    let vt = v.t().to_owned();
    let ht = h.t().to_owned();
    let mut wt = w.t().to_owned();
    update_block(&vt, &ht, &mut wt, method, sigma, step, floor_hits)?;
    *w = wt.t().to_owned();
    Ok(())
}

/// Update every column of `h` against the basis `w`.
fn update_block(
    v: &Array2<f64>,
    w: &Array2<f64>,
    h: &mut Array2<f64>,
    method: NmfMethod,
    sigma: f64,
    step: Option<f64>,
    floor_hits: &mut usize,
) -> Result<()> {
    let k = w.ncols();
    let mut col_sums = Array1::zeros(k);
    for c in 0..k {
        col_sums[c] = w.column(c).sum();
        if col_sums[c] < MASS_FLOOR {
            return Err(Error::Numeric(format!(
                "basis column {} has vanished",
                c
            )));
        }
    }
    for j in 0..v.ncols() {
        let vj = v.column(j).to_owned();
        let hj = h.column(j).to_owned();
        let new = update_column(w, &col_sums, &vj, &hj, method, sigma, step, floor_hits)?;
        h.column_mut(j).assign(&new);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update_column(
    w: &Array2<f64>,
    col_sums: &Array1<f64>,
    v: &Array1<f64>,
    h: &Array1<f64>,
    method: NmfMethod,
    sigma: f64,
    step: Option<f64>,
    floor_hits: &mut usize,
) -> Result<Array1<f64>> {
    let k = w.ncols();
    let v_sum = v.sum();
    if v_sum <= 0.0 {
        // An all-zero target column is matched exactly by zero
        // coefficients.
        return Ok(Array1::zeros(k));
    }

    let wh = w.dot(h);
    let mut z = Array1::zeros(v.len());
    for i in 0..v.len() {
        if v[i] > 0.0 {
            let d = if wh[i] < MASS_FLOOR {
                *floor_hits += 1;
                MASS_FLOOR
            } else {
                wh[i]
            };
            z[i] = v[i] / d;
        }
    }
    let wtz = w.t().dot(&z);

    match method {
        NmfMethod::Multiplicative => {
            let mut out = Array1::zeros(k);
            for c in 0..k {
                out[c] = h[c] * wtz[c] / col_sums[c];
            }
            Ok(out)
        }
        NmfMethod::SciPi => {
            // In the normalized frame hbar_c = h_c col_sum_c / v_sum the
            // subproblem is scale invariant and the fixed-point update
            // is hbar <- hbar (sigma + s)^2 renormalized, where s is the
            // gradient ratio in that frame.
            let mut u = Array1::zeros(k);
            for c in 0..k {
                let hbar = h[c] * col_sums[c] / v_sum;
                let s = wtz[c] * v_sum / col_sums[c];
                let t = sigma + s;
                u[c] = hbar * t * t;
            }
            let total = u.sum();
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::Numeric(
                    "fixed-point coefficient update degenerated".into(),
                ));
            }
            let mut out = Array1::zeros(k);
            for c in 0..k {
                out[c] = (u[c] / total) * v_sum / col_sums[c];
            }
            Ok(out)
        }
        NmfMethod::ProjectedGradient => {
            let alpha = step.expect("projected gradient always resolves a step factor");
            // Ascent on sum_i v_i log(Wh)_i - sum_c col_sum_c h_c, with
            // the step scaled by the current coefficients, then a
            // projection onto the scaled simplex.
            let mut moved = Array1::zeros(k);
            for c in 0..k {
                let g = wtz[c] - col_sums[c];
                moved[c] = h[c] + alpha * h[c] * g;
            }
            let mut bar = Array1::zeros(k);
            for c in 0..k {
                bar[c] = moved[c] * col_sums[c] / v_sum;
            }
            let projected = project_simplex(&bar, 1.0)?;
            let mut out = Array1::zeros(k);
            for c in 0..k {
                out[c] = projected[c] * v_sum / col_sums[c];
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn random_nonneg(n: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = Rng::new(seed);
        rng.uniform_mat(n, m, 0.1, 2.0)
    }

    /// An exactly factorizable matrix of the given rank.
    fn lowrank(n: usize, m: usize, rank: usize, seed: u64) -> Array2<f64> {
        let mut rng = Rng::new(seed);
        let w = rng.uniform_mat(n, rank, 0.1, 1.0);
        let h = rng.uniform_mat(rank, m, 0.1, 1.0);
        w.dot(&h)
    }

    #[test]
    fn kl_divergence_matches_hand_value() {
        // v = [2,2,2,3] against the all-ones model:
        // 3 * 2 ln 2 + 3 ln 3 + (4 - 9) = 6 ln 2 + 3 ln 3 - 5.
        let v = ndarray::array![[2.0, 2.0], [2.0, 3.0]];
        let ones = Array2::from_elem((2, 2), 1.0);
        let d = kl_divergence(&v, &ones).unwrap();
        assert!((d - 2.4547199493640006).abs() <= 1e-15, "{}", d);
        // Self-divergence vanishes.
        assert_eq!(kl_divergence(&v, &v).unwrap(), 0.0);
        // Zero data entries contribute the model mass.
        let z = Array2::zeros((2, 2));
        assert!((kl_divergence(&z, &ones).unwrap() - 4.0).abs() <= 1e-15);
    }

    #[test]
    fn multiplicative_updates_never_increase_the_divergence() {
        let v = random_nonneg(12, 8, 31);
        let cfg = SolverConfig {
            max_iter: 150,
            x_tol: 0.0,
            ..SolverConfig::default()
        };
        let fit = nmf_solve(&v, 3, NmfMethod::Multiplicative, &NmfInit::Seeded(7), &cfg).unwrap();
        assert_eq!(fit.kl_trace.len(), fit.iterations + 1);
        for w in fit.kl_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()),
                "divergence rose: {} -> {}",
                w[0],
                w[1]
            );
        }
        assert_eq!(fit.best_kl, fit.final_kl());
        assert!(fit.step_factor.is_none());
    }

    #[test]
    fn all_methods_fit_an_exactly_factorizable_matrix() {
        let v = lowrank(10, 7, 2, 5);
        let cfg = SolverConfig {
            max_iter: 400,
            x_tol: 0.0,
            ..SolverConfig::default()
        };
        let start = NmfInit::Seeded(19);
        let mut finals = Vec::new();
        for method in [
            NmfMethod::Multiplicative,
            NmfMethod::SciPi,
            NmfMethod::ProjectedGradient,
        ] {
            let fit = nmf_solve(&v, 2, method, &start, &cfg).unwrap();
            let init_kl = fit.kl_trace[0];
            assert!(
                fit.final_kl() <= init_kl * 1e-3,
                "{:?}: {} -> {}",
                method,
                init_kl,
                fit.final_kl()
            );
            finals.push(fit.final_kl());
        }
        // All three land essentially at the same (zero) divergence.
        for f in &finals {
            assert!(*f <= 1e-3, "final divergence {}", f);
        }
    }

    #[test]
    fn projected_gradient_selects_a_step_factor_from_the_grid() {
        let v = random_nonneg(9, 6, 47);
        let cfg = SolverConfig {
            max_iter: 40,
            x_tol: 0.0,
            ..SolverConfig::default()
        };
        let fit = nmf_solve(
            &v,
            2,
            NmfMethod::ProjectedGradient,
            &NmfInit::Seeded(3),
            &cfg,
        )
        .unwrap();
        let s = fit.step_factor.unwrap();
        assert!(PGD_STEP_GRID.contains(&s), "step factor {}", s);
        assert!(fit.final_kl() < fit.kl_trace[0]);

        let pinned = SolverConfig {
            step: Some(0.3),
            ..cfg
        };
        let fit2 = nmf_solve(
            &v,
            2,
            NmfMethod::ProjectedGradient,
            &NmfInit::Seeded(3),
            &pinned,
        )
        .unwrap();
        assert_eq!(fit2.step_factor, Some(0.3));
    }

    #[test]
    fn zero_data_column_gets_zero_coefficients() {
        let mut v = random_nonneg(6, 5, 11);
        v.column_mut(2).fill(0.0);
        for method in [
            NmfMethod::Multiplicative,
            NmfMethod::SciPi,
            NmfMethod::ProjectedGradient,
        ] {
            let cfg = SolverConfig {
                max_iter: 3,
                x_tol: 0.0,
                ..SolverConfig::default()
            };
            let fit = nmf_solve(&v, 2, method, &NmfInit::Seeded(1), &cfg).unwrap();
            for c in 0..2 {
                assert_eq!(fit.h[[c, 2]], 0.0, "{:?}", method);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let v = random_nonneg(8, 8, 23);
        let cfg = SolverConfig {
            max_iter: 25,
            x_tol: 0.0,
            ..SolverConfig::default()
        };
        let a = nmf_solve(&v, 3, NmfMethod::SciPi, &NmfInit::Seeded(2), &cfg).unwrap();
        let b = nmf_solve(&v, 3, NmfMethod::SciPi, &NmfInit::Seeded(2), &cfg).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.h, b.h);
        assert_eq!(a.kl_trace, b.kl_trace);
    }

    #[test]
    fn factors_stay_nonnegative() {
        let v = random_nonneg(7, 9, 77);
        for method in [
            NmfMethod::Multiplicative,
            NmfMethod::SciPi,
            NmfMethod::ProjectedGradient,
        ] {
            let cfg = SolverConfig {
                max_iter: 30,
                x_tol: 0.0,
                ..SolverConfig::default()
            };
            let fit = nmf_solve(&v, 3, method, &NmfInit::Seeded(8), &cfg).unwrap();
            assert!(
                fit.w.iter().chain(fit.h.iter()).all(|&x| x >= 0.0),
                "{:?} produced a negative factor entry",
                method
            );
        }
    }

    #[test]
    fn input_guards() {
        let v = random_nonneg(4, 4, 1);
        let cfg = SolverConfig::default();
        let mut neg = v.clone();
        neg[[0, 0]] = -1.0;
        assert!(nmf_solve(&neg, 2, NmfMethod::Multiplicative, &NmfInit::Seeded(1), &cfg).is_err());
        assert!(nmf_solve(&v, 0, NmfMethod::Multiplicative, &NmfInit::Seeded(1), &cfg).is_err());
        assert!(nmf_solve(&v, 5, NmfMethod::Multiplicative, &NmfInit::Seeded(1), &cfg).is_err());
        let bad = NmfInit::Factors {
            w: Array2::zeros((4, 3)),
            h: Array2::zeros((2, 4)),
        };
        assert!(nmf_solve(&v, 2, NmfMethod::Multiplicative, &bad, &cfg).is_err());
    }

    #[test]
    fn explicit_factors_are_used_verbatim() {
        let mut rng = Rng::new(101);
        let w = rng.uniform_mat(6, 2, 0.2, 1.0);
        let h = rng.uniform_mat(2, 5, 0.2, 1.0);
        let v = w.dot(&h);
        let cfg = SolverConfig {
            max_iter: 5,
            ..SolverConfig::default()
        };
        let fit = nmf_solve(
            &v,
            2,
            NmfMethod::Multiplicative,
            &NmfInit::Factors {
                w: w.clone(),
                h: h.clone(),
            },
            &cfg,
        )
        .unwrap();
        // Starting at an exact factorization, the divergence starts at
        // zero and stays there.
        assert!(fit.kl_trace[0] <= 1e-12);
        assert!(fit.final_kl() <= 1e-10);
    }
}
