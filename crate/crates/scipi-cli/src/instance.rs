//! Turning `--problem` / `--gen` / `--data` into live problem objects.

use std::path::Path;

use ndarray::{Array1, Array2};

use scipi::data::{
    gen_gmm_data, gen_ica_data, gen_lowrank_nonneg, gen_mixture_design, gen_spectrum_matrix,
    load_dense_csv, load_matrix_market, Descriptor, GmmData, LowRankData,
};
use scipi::linalg::{spectral_norm, Rng};
use scipi::problems::{
    CoupledBlock, KlnmfSubproblem, KurtosisIca, LpPca, Mixture, PartialProblem, Quadratic,
    QuadraticPartial, ScaleInvariantProblem, SeparableBlock,
};
use scipi::{Error, Result};

use crate::output::ProblemEcho;

pub const SPHERE_PROBLEMS: &[&str] = &["quadratic", "lp-pca", "mixture", "ica", "klnmf-sub"];

/// A built sphere problem plus whatever ground truth the generator had.
pub struct SphereInstance {
    pub problem: Box<dyn ScaleInvariantProblem>,
    pub echo: ProblemEcho,
    /// For quadratic instances: the raw matrix, so classical power
    /// iteration can run on it.
    pub matrix: Option<Array2<f64>>,
    /// Ground-truth recovery directions (ICA instances).
    pub directions: Option<Array2<f64>>,
}

/// Load a matrix by extension: Matrix Market for `.mtx` / `.mm`,
/// dense headerless CSV otherwise.
pub fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") | Some("mm") => load_matrix_market(path),
        _ => load_dense_csv(path, false),
    }
}

fn file_echo(name: &str, path: &Path, dim: usize) -> ProblemEcho {
    ProblemEcho {
        name: name.to_string(),
        source: format!("file:{}", path.display()),
        dim,
        dim_y: None,
    }
}

fn gen_echo(name: &str, source: String, dim: usize) -> ProblemEcho {
    ProblemEcho { name: name.to_string(), source, dim, dim_y: None }
}

/// The eigenvalue list behind `spectrum:d=..,l1=..,l2=..`: `l1`, then a
/// linear ramp from `l2` down to zero. The second-largest magnitude is
/// exactly `l2`, so the predicted squared rate is `(l2/l1)^2`.
fn spectrum_values(d: usize, l1: f64, l2: f64) -> Result<Array1<f64>> {
    if d == 0 {
        return Err(Error::Input("spectrum dimension must be positive".into()));
    }
    if !(l1.is_finite() && l2.is_finite()) || l2 < 0.0 || l1 <= l2 {
        return Err(Error::Input(format!(
            "spectrum needs finite l1 > l2 >= 0, got l1={l1}, l2={l2}"
        )));
    }
    let mut vals = Array1::zeros(d);
    vals[0] = l1;
    for i in 1..d {
        vals[i] = l2 * (d - i) as f64 / (d - 1) as f64;
    }
    Ok(vals)
}

fn parse_gen(gen: Option<&str>, default: &str) -> Result<(Descriptor, String)> {
    let text = gen.unwrap_or(default).to_string();
    Ok((Descriptor::parse(&text)?, text))
}

/// Build one of the five sphere-constrained problem families from a
/// generator descriptor or a data file.
pub fn build_sphere(
    problem: &str,
    gen: Option<&str>,
    data: Option<&Path>,
    p: u32,
    eps: f64,
    seed: u64,
) -> Result<SphereInstance> {
    match problem {
        "quadratic" => {
            let (a, echo) = match data {
                Some(path) => {
                    let a = load_matrix(path)?;
                    let echo = file_echo(problem, path, a.nrows());
                    (a, echo)
                }
                None => {
                    let (d, text) = parse_gen(gen, "spectrum:d=20,l1=1,l2=0.9")?;
                    if d.name != "spectrum" {
                        return Err(Error::Input(format!(
                            "problem quadratic expects a spectrum:... generator, got {:?}",
                            d.name
                        )));
                    }
                    d.require_known(&["d", "l1", "l2"])?;
                    let dim = d.get_usize("d")?.unwrap_or(20);
                    let l1 = d.get_f64("l1")?.unwrap_or(1.0);
                    let l2 = d.get_f64("l2")?.unwrap_or(0.9);
                    let a = gen_spectrum_matrix(seed, &spectrum_values(dim, l1, l2)?)?;
                    (a, gen_echo(problem, text, dim))
                }
            };
            Ok(SphereInstance {
                problem: Box::new(Quadratic::new(a.clone())?),
                echo,
                matrix: Some(a),
                directions: None,
            })
        }
        "lp-pca" => {
            let (rows, echo) = data_matrix(problem, gen, data, "normal:n=200,d=10", seed)?;
            Ok(SphereInstance {
                problem: Box::new(LpPca::new(rows, p)?),
                echo,
                matrix: None,
                directions: None,
            })
        }
        "mixture" => {
            let (rows, echo) = data_matrix(problem, gen, data, "design:n=200,d=10", seed)?;
            Ok(SphereInstance {
                problem: Box::new(Mixture::new(rows, eps)?),
                echo,
                matrix: None,
                directions: None,
            })
        }
        "ica" => {
            let (p, directions, echo) = build_ica(gen, data, seed)?;
            Ok(SphereInstance {
                problem: Box::new(p),
                echo,
                matrix: None,
                directions,
            })
        }
        "klnmf-sub" => {
            if data.is_some() {
                return Err(Error::Input(
                    "problem klnmf-sub is generator-only (it needs both a basis and a target)"
                        .into(),
                ));
            }
            let (d, text) = parse_gen(gen, "klnmf:m=30,r=5")?;
            expect_gen(&d, "klnmf", problem)?;
            d.require_known(&["m", "r"])?;
            let m = d.get_usize("m")?.unwrap_or(30);
            let r = d.get_usize("r")?.unwrap_or(5);
            let mut rng = Rng::new(seed);
            let w = rng.uniform_mat(m, r, 0.1, 1.0);
            let mut v = Array1::zeros(m);
            for e in v.iter_mut() {
                *e = rng.uniform_in(0.5, 1.5);
            }
            Ok(SphereInstance {
                problem: Box::new(KlnmfSubproblem::new(w, v)?),
                echo: gen_echo(problem, text, r),
                matrix: None,
                directions: None,
            })
        }
        other => Err(Error::Input(format!(
            "unknown problem {:?} (expected one of: {})",
            other,
            SPHERE_PROBLEMS.join(", ")
        ))),
    }
}

/// ICA instance as a concrete problem, so the FastICA baseline (which
/// is specific to the kurtosis objective) can use it too. Returns the
/// ground-truth directions when the data was generated.
pub fn build_ica(
    gen: Option<&str>,
    data: Option<&Path>,
    seed: u64,
) -> Result<(KurtosisIca, Option<Array2<f64>>, ProblemEcho)> {
    match data {
        Some(path) => {
            let w = load_matrix(path)?;
            let echo = file_echo("ica", path, w.ncols());
            Ok((KurtosisIca::new(w)?, None, echo))
        }
        None => {
            let (d, text) = parse_gen(gen, "ica:n=2000,d=2")?;
            expect_gen(&d, "ica", "ica")?;
            d.require_known(&["n", "d"])?;
            let n = d.get_usize("n")?.unwrap_or(2000);
            let dim = d.get_usize("d")?.unwrap_or(2);
            let ica = gen_ica_data(seed, n, dim)?;
            Ok((
                KurtosisIca::new(ica.whitened)?,
                Some(ica.directions),
                gen_echo("ica", text, dim),
            ))
        }
    }
}

fn expect_gen(d: &Descriptor, want: &str, problem: &str) -> Result<()> {
    if d.name != want {
        return Err(Error::Input(format!(
            "problem {} expects a {}:... generator, got {:?}",
            problem, want, d.name
        )));
    }
    Ok(())
}

/// Shared path for the problems whose input is a plain data matrix:
/// a file, or `design:n=..,d=..` (positive uniform) / `normal:n=..,d=..`
/// (standard Gaussian) generators.
fn data_matrix(
    problem: &str,
    gen: Option<&str>,
    data: Option<&Path>,
    default: &str,
    seed: u64,
) -> Result<(Array2<f64>, ProblemEcho)> {
    if let Some(path) = data {
        let rows = load_matrix(path)?;
        let echo = file_echo(problem, path, rows.ncols());
        return Ok((rows, echo));
    }
    let (d, text) = parse_gen(gen, default)?;
    d.require_known(&["n", "d"])?;
    let n = d.get_usize("n")?.unwrap_or(200);
    let dim = d.get_usize("d")?.unwrap_or(10);
    let rows = match d.name.as_str() {
        "design" => gen_mixture_design(seed, n, dim)?,
        "normal" => Rng::new(seed).normal_mat(n, dim),
        other => {
            return Err(Error::Input(format!(
                "problem {} expects a design:... or normal:... generator, got {:?}",
                problem, other
            )))
        }
    };
    Ok((rows, gen_echo(problem, text, dim)))
}

/// NMF target matrix: file plus explicit rank, or the low-rank generator.
pub fn build_nmf(
    gen: Option<&str>,
    data: Option<&Path>,
    rank_flag: Option<usize>,
    seed: u64,
) -> Result<(Array2<f64>, usize, ProblemEcho)> {
    if let Some(path) = data {
        let v = load_matrix(path)?;
        let rank = rank_flag.ok_or_else(|| {
            Error::Input("--rank is required when the NMF target comes from a file".into())
        })?;
        let echo = file_echo("nmf", path, v.nrows());
        return Ok((v, rank, echo));
    }
    let (d, text) = parse_gen(gen, "lowrank:rows=30,cols=20,rank=4")?;
    if d.name != "lowrank" {
        return Err(Error::Input(format!(
            "nmf expects a lowrank:... generator, got {:?}",
            d.name
        )));
    }
    d.require_known(&["rows", "cols", "rank"])?;
    let rows = d.get_usize("rows")?.unwrap_or(30);
    let cols = d.get_usize("cols")?.unwrap_or(20);
    let rank = d.get_usize("rank")?.unwrap_or(4);
    let LowRankData { v, .. } = gen_lowrank_nonneg(seed, rows, cols, rank)?;
    let mut echo = gen_echo("nmf", text, rows);
    echo.dim_y = Some(cols);
    Ok((v, rank_flag.unwrap_or(rank), echo))
}

/// GMM observations: file plus explicit component count, or the seeded
/// cluster generator (means spaced `sep` apart along the first axis).
pub fn build_gmm(
    gen: Option<&str>,
    data: Option<&Path>,
    components_flag: Option<usize>,
    seed: u64,
) -> Result<(Array2<f64>, usize, Option<Array1<f64>>, ProblemEcho)> {
    if let Some(path) = data {
        let rows = load_matrix(path)?;
        let k = components_flag.ok_or_else(|| {
            Error::Input("--components is required when GMM data comes from a file".into())
        })?;
        let echo = file_echo("gmm", path, rows.ncols());
        return Ok((rows, k, None, echo));
    }
    let (d, text) = parse_gen(gen, "gmm:n=100,k=2,dim=1,sep=6")?;
    if d.name != "gmm" {
        return Err(Error::Input(format!(
            "gmm expects a gmm:... generator, got {:?}",
            d.name
        )));
    }
    d.require_known(&["n", "k", "dim", "sep"])?;
    let n = d.get_usize("n")?.unwrap_or(100);
    let k = d.get_usize("k")?.unwrap_or(2);
    let dim = d.get_usize("dim")?.unwrap_or(1);
    let sep = d.get_f64("sep")?.unwrap_or(6.0);
    let GmmData { data, truth } = gen_gmm_data(seed, n, k, dim, sep)?;
    Ok((
        data,
        components_flag.unwrap_or(k),
        Some(truth.weights),
        gen_echo("gmm", text, dim),
    ))
}

/// Block problems for the rate study. `eps` couples the two otherwise
/// independent quadratics through `eps/2 * (x^T C y)^2` with `C`
/// normalized to unit spectral norm.
pub enum BlockInstance {
    Separable(SeparableBlock),
    Coupled(CoupledBlock),
}

pub fn build_block(problem: &str, gen: Option<&str>, seed: u64) -> Result<(BlockInstance, ProblemEcho)> {
    let (d, text) = parse_gen(gen, "blocks:dx=6,dy=5,l1=1,l2=0.5,m1=0.8,m2=0.4,eps=0.05")?;
    if d.name != "blocks" {
        return Err(Error::Input(format!(
            "{} expects a blocks:... generator, got {:?}",
            problem, d.name
        )));
    }
    d.require_known(&["dx", "dy", "l1", "l2", "m1", "m2", "eps"])?;
    let dx = d.get_usize("dx")?.unwrap_or(6);
    let dy = d.get_usize("dy")?.unwrap_or(5);
    let l1 = d.get_f64("l1")?.unwrap_or(1.0);
    let l2 = d.get_f64("l2")?.unwrap_or(0.5);
    let m1 = d.get_f64("m1")?.unwrap_or(0.8);
    let m2 = d.get_f64("m2")?.unwrap_or(0.4);
    let a = gen_spectrum_matrix(seed, &spectrum_values(dx, l1, l2)?)?;
    let b = gen_spectrum_matrix(seed.wrapping_add(1), &spectrum_values(dy, m1, m2)?)?;
    let echo = ProblemEcho {
        name: problem.to_string(),
        source: text,
        dim: dx,
        dim_y: Some(dy),
    };
    match problem {
        "block-separable" => Ok((BlockInstance::Separable(SeparableBlock::new(a, b)?), echo)),
        "block-coupled" => {
            let eps = d.get_f64("eps")?.unwrap_or(0.05);
            let mut c = Rng::new(seed.wrapping_add(2)).normal_mat(dx, dy);
            let norm = spectral_norm(&c)?;
            if norm <= 0.0 {
                return Err(Error::Numeric("degenerate coupling matrix".into()));
            }
            c.mapv_inplace(|v| v / norm);
            Ok((BlockInstance::Coupled(CoupledBlock::new(a, b, c, eps)?), echo))
        }
        other => Err(Error::Input(format!("unknown block problem {:?}", other))),
    }
}

/// Keeps a partial problem honest about gradient steps: hides the exact
/// inner maximizer so the solver takes the `alpha` ascent step the rate
/// prediction models.
pub struct GradientStepOnly<P>(pub P);

impl<P: PartialProblem> PartialProblem for GradientStepOnly<P> {
    fn dim_x(&self) -> usize {
        self.0.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.0.dim_y()
    }
    fn value(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64> {
        self.0.value(x, y)
    }
    fn gradient_x(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        self.0.gradient_x(x, y)
    }
    fn gradient_y(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
        self.0.gradient_y(x, y)
    }
    fn has_exact_y_step(&self) -> bool {
        false
    }
    fn concavity(&self) -> Option<(f64, f64)> {
        self.0.concavity()
    }
    fn hessian_xx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        self.0.hessian_xx(x, y)
    }
    fn hessian_yx(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<Array2<f64>> {
        self.0.hessian_yx(x, y)
    }
}

/// The modulated-quadratic partial problem:
/// `f(x, y) = (1 + e^T y) x^T A x / 2 - y^T B y / 2` with `A` from a
/// spectrum ramp, `B` positive definite with eigenvalues in `[mu, lmax]`,
/// and `e` a seeded Gaussian scaled by `c`.
pub fn build_partial(
    gen: Option<&str>,
    seed: u64,
) -> Result<(GradientStepOnly<QuadraticPartial>, ProblemEcho)> {
    let (d, text) = parse_gen(gen, "partial:dx=6,dy=4,l1=1,l2=0.6,mu=0.5,lmax=1,c=0.1")?;
    if d.name != "partial" {
        return Err(Error::Input(format!(
            "partial-quadratic expects a partial:... generator, got {:?}",
            d.name
        )));
    }
    d.require_known(&["dx", "dy", "l1", "l2", "mu", "lmax", "c"])?;
    let dx = d.get_usize("dx")?.unwrap_or(6);
    let dy = d.get_usize("dy")?.unwrap_or(4);
    let l1 = d.get_f64("l1")?.unwrap_or(1.0);
    let l2 = d.get_f64("l2")?.unwrap_or(0.6);
    let mu = d.get_f64("mu")?.unwrap_or(0.5);
    let lmax = d.get_f64("lmax")?.unwrap_or(1.0);
    let c = d.get_f64("c")?.unwrap_or(0.1);
    if !(mu > 0.0 && lmax >= mu) {
        return Err(Error::Input(format!(
            "penalty spectrum needs 0 < mu <= lmax, got mu={mu}, lmax={lmax}"
        )));
    }
    let a = gen_spectrum_matrix(seed, &spectrum_values(dx, l1, l2)?)?;
    // Penalty eigenvalues: a ramp from lmax down to mu.
    let mut vals = Array1::zeros(dy);
    for i in 0..dy {
        vals[i] = if dy == 1 {
            mu
        } else {
            mu + (lmax - mu) * (dy - 1 - i) as f64 / (dy - 1) as f64
        };
    }
    let b = gen_spectrum_matrix(seed.wrapping_add(1), &vals)?;
    let mut e = Rng::new(seed.wrapping_add(2)).normal_vec(dy);
    e.mapv_inplace(|v| v * c);
    let y0 = Array1::zeros(dy);
    let problem = GradientStepOnly(QuadraticPartial::new(a, b, e, y0)?);
    let echo = ProblemEcho {
        name: "partial-quadratic".to_string(),
        source: text,
        dim: dx,
        dim_y: Some(dy),
    };
    Ok((problem, echo))
}

/// Seeded start point on the sphere. The `+1` keeps it decoupled from
/// the data generator, which consumes the base seed.
pub fn start_point(dim: usize, seed: u64) -> Array1<f64> {
    Rng::new(seed.wrapping_add(1)).unit_sphere(dim)
}

/// Start pair for two-block solvers, drawn from one stream.
pub fn start_pair(dim_x: usize, dim_y: usize, seed: u64) -> (Array1<f64>, Array1<f64>) {
    let mut rng = Rng::new(seed.wrapping_add(1));
    (rng.unit_sphere(dim_x), rng.unit_sphere(dim_y))
}
