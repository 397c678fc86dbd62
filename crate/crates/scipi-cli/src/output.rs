//! Trace records and the writers that put them on disk.
//!
//! One run produces one JSON object. Floats are printed as `{:.16e}`
//! (17 significant digits), which round-trips f64 exactly, and nothing
//! time- or thread-dependent enters a record unless `--timings` asked
//! for it, so a reseeded rerun reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use serde::Serialize;

use scipi::solvers::{SolveResult, SolverConfig};
use scipi::{Error, Result};

#[derive(Serialize, Clone)]
pub struct ProblemEcho {
    pub name: String,
    /// Generator descriptor or `file:<path>`.
    pub source: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_y: Option<usize>,
}

#[derive(Serialize, Clone)]
pub struct ConfigEcho {
    pub max_iter: usize,
    pub x_tol: f64,
    pub f_tol: Option<f64>,
    pub f_ref: Option<f64>,
    pub shift: Option<f64>,
    pub step: Option<f64>,
    pub seed: u64,
    pub gauss_seidel: bool,
}

impl ConfigEcho {
    pub fn from_config(cfg: &SolverConfig) -> Self {
        ConfigEcho {
            max_iter: cfg.max_iter,
            x_tol: cfg.x_tol,
            f_tol: cfg.f_tol,
            f_ref: cfg.f_ref,
            shift: cfg.shift,
            step: cfg.step,
            seed: cfg.seed,
            gauss_seidel: cfg.gauss_seidel,
        }
    }
}

#[derive(Serialize, Clone)]
pub struct Row {
    pub k: usize,
    pub f: f64,
    pub step_norm: Option<f64>,
    pub alignment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment_y: Option<f64>,
}

#[derive(Serialize, Clone)]
pub struct RateOut {
    pub condition_ok: bool,
    /// `(lambda_bar_2 / lambda_star)^2` for single-block problems;
    /// the unsquared spectral radius `rho` of the 2x2 rate matrix for
    /// block and partial problems.
    pub rho_predicted: Option<f64>,
    /// Fitted per-iteration contraction of the squared error trace.
    pub rho_empirical: Option<f64>,
    /// Empirical over predicted, where the prediction is squared first
    /// for block and partial problems so both sides measure squared
    /// error.
    pub ratio: Option<f64>,
    pub lambda_star: f64,
    pub lambda_bar_2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_bar_2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Serialize, Clone)]
pub struct Summary {
    pub converged: bool,
    pub stop_reason: String,
    pub iterations: usize,
    pub final_objective: f64,
    pub best_objective: f64,
    /// Present only under `--timings`; `null` otherwise so the schema
    /// (and the bytes) stay put.
    pub wall_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateOut>,
}

#[derive(Serialize, Clone)]
pub struct TraceRecord {
    pub id: String,
    pub problem: ProblemEcho,
    pub solver: String,
    pub config: ConfigEcho,
    pub rows: Vec<Row>,
    pub summary: Summary,
}

/// Iteration rows straight out of a solve result. Alignment columns are
/// filled only when the solver recorded them (a reference was set).
pub fn rows_from_result(res: &SolveResult) -> Vec<Row> {
    let mut rows = Vec::with_capacity(res.objective_trace.len());
    for (k, &f) in res.objective_trace.iter().enumerate() {
        rows.push(Row {
            k,
            f,
            step_norm: res.step_norms.get(k).copied(),
            alignment: res.alignment_trace.as_ref().and_then(|t| t.get(k).copied()),
            alignment_y: res
                .alignment_trace_y
                .as_ref()
                .and_then(|t| t.get(k).copied()),
        });
    }
    rows
}

/// Rows for the fit-style solvers that only keep an objective trace.
pub fn rows_from_trace(trace: &[f64]) -> Vec<Row> {
    trace
        .iter()
        .enumerate()
        .map(|(k, &f)| Row { k, f, step_norm: None, alignment: None, alignment_y: None })
        .collect()
}

#[derive(Serialize, Clone, Copy)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn stats(xs: &[f64]) -> Stats {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &x in xs {
        min = min.min(x);
        max = max.max(x);
        sum += x;
    }
    Stats { mean: sum / xs.len() as f64, min, max }
}

/// Aggregate over `--repeats` trials of a single-solver command.
#[derive(Serialize)]
pub struct TrialsRecord {
    pub trials: Vec<TraceRecord>,
    pub aggregate: Aggregate,
}

#[derive(Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub converged: usize,
    pub final_objective: Stats,
    pub iterations: Stats,
}

pub fn aggregate(records: &[TraceRecord]) -> Aggregate {
    let finals: Vec<f64> = records.iter().map(|r| r.summary.final_objective).collect();
    let iters: Vec<f64> = records.iter().map(|r| r.summary.iterations as f64).collect();
    Aggregate {
        trials: records.len(),
        converged: records.iter().filter(|r| r.summary.converged).count(),
        final_objective: stats(&finals),
        iterations: stats(&iters),
    }
}

/// One methods-comparison run (nmf / gmm / ica).
#[derive(Serialize)]
pub struct ComparisonRecord {
    pub id: String,
    pub problem: ProblemEcho,
    pub records: Vec<TraceRecord>,
    pub comparison: Comparison,
}

#[derive(Serialize, Default)]
pub struct Comparison {
    pub final_objective: BTreeMap<String, f64>,
    pub iterations: BTreeMap<String, usize>,
    pub converged: BTreeMap<String, bool>,
    /// `f_sci_pi / f_method` for every other method in the run.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub sci_pi_ratio: BTreeMap<String, f64>,
    /// Best |cosine| against a ground-truth direction, when known.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub alignment: BTreeMap<String, f64>,
    /// Recovered mixture weights, sorted descending (component labels
    /// are arbitrary).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize)]
pub struct ComparisonTrials {
    pub trials: Vec<ComparisonRecord>,
    pub aggregate: BTreeMap<String, Stats>,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.16e}", v),
        None => String::new(),
    }
}

/// Where machine output goes: `--out` file or stdout.
pub struct Emit {
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Emit {
    pub fn write_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = to_json_line(value)?;
        match &self.out {
            Some(path) => fs::write(path, text)?,
            None => {
                io::stdout().write_all(text.as_bytes())?;
            }
        }
        Ok(())
    }

    /// Flat per-iteration export for plotting. A no-op unless `--csv`
    /// was given.
    pub fn write_csv(&self, records: &[&TraceRecord]) -> Result<()> {
        let Some(path) = &self.csv else { return Ok(()) };
        let mut text = String::from("run,k,f,step_norm,alignment,alignment_y\n");
        for rec in records {
            for row in &rec.rows {
                text.push_str(&format!(
                    "{},{},{:.16e},{},{},{}\n",
                    rec.id,
                    row.k,
                    row.f,
                    fmt_opt(row.step_norm),
                    fmt_opt(row.alignment),
                    fmt_opt(row.alignment_y),
                ));
            }
        }
        fs::write(path, text)?;
        Ok(())
    }
}

/// Serialize with every float at 17 significant digits, one trailing
/// newline, no pretty-printing.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Input(format!("cannot serialize record: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

struct SciFloats;

impl serde_json::ser::Formatter for SciFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", value)
    }
}
