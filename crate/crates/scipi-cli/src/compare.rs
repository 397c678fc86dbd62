//! The `nmf`, `gmm` and `ica` subcommands: run a set of methods from a
//! shared seeded initialization and report how they compare.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use ndarray::Array2;

use scipi::problems::{GmmProblem, ScaleInvariantProblem};
use scipi::solvers::{
    em_gmm, fast_ica, gmm_sci_pi, ica_sci_pi, nmf_solve, GmmInit, NmfInit, NmfMethod,
    SolverConfig, StopReason,
};
use scipi::{Error, Result};

use crate::instance::{build_gmm, build_ica, build_nmf, start_point};
use crate::output::{
    rows_from_result, rows_from_trace, stats, Comparison, ComparisonRecord, ComparisonTrials,
    ConfigEcho, Emit, ProblemEcho, Row, Stats, Summary, TraceRecord,
};
use crate::repeats::run_trials;
use crate::run::exit_code;

const SCI_PI: &str = "sci-pi";

fn fit_record(
    id: String,
    echo: &ProblemEcho,
    solver: &str,
    cfg: &SolverConfig,
    rows: Vec<Row>,
    converged: bool,
    stop_reason: StopReason,
    iterations: usize,
    final_objective: f64,
    best_objective: f64,
    wall_ms: Option<f64>,
) -> TraceRecord {
    TraceRecord {
        id,
        problem: echo.clone(),
        solver: solver.to_string(),
        config: ConfigEcho::from_config(cfg),
        rows,
        summary: Summary {
            converged,
            stop_reason: stop_reason.as_str().to_string(),
            iterations,
            final_objective,
            best_objective,
            wall_ms,
            rate: None,
        },
    }
}

/// Fill the `f_sci_pi / f_baseline` map once all methods have run.
fn fill_ratios(cmp: &mut Comparison) {
    let Some(&f_sci) = cmp.final_objective.get(SCI_PI) else { return };
    for (name, &f) in &cmp.final_objective {
        if name != SCI_PI && f != 0.0 {
            cmp.sci_pi_ratio.insert(name.clone(), f_sci / f);
        }
    }
}

fn merge_outcomes(outcomes: Vec<Result<(ComparisonRecord, i32)>>) -> Result<(Vec<ComparisonRecord>, i32)> {
    let mut records = Vec::with_capacity(outcomes.len());
    let mut code = 0;
    for o in outcomes {
        let (rec, c) = o?;
        code = code.max(c);
        records.push(rec);
    }
    Ok((records, code))
}

/// Per-method aggregate of final objectives across trials.
fn method_stats(records: &[ComparisonRecord]) -> BTreeMap<String, Stats> {
    let mut by_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rec in records {
        for (name, &f) in &rec.comparison.final_objective {
            by_method.entry(name.clone()).or_default().push(f);
        }
    }
    by_method.into_iter().map(|(k, v)| (k, stats(&v))).collect()
}

fn emit_comparison(
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    records: Vec<ComparisonRecord>,
) -> Result<()> {
    for rec in &records {
        for (name, f) in &rec.comparison.final_objective {
            let iters = rec.comparison.iterations[name];
            eprintln!("{}: {} finished at f = {:.6e} after {} iterations", rec.id, name, f, iters);
        }
        for (name, r) in &rec.comparison.sci_pi_ratio {
            eprintln!("{}: f_sci-pi / f_{} = {:.6}", rec.id, name, r);
        }
    }
    let emit = Emit { out, csv };
    let traces: Vec<&TraceRecord> = records.iter().flat_map(|r| r.records.iter()).collect();
    emit.write_csv(&traces)?;
    if records.len() > 1 {
        let aggregate = method_stats(&records);
        emit.write_json(&ComparisonTrials { trials: records, aggregate })?;
    } else {
        emit.write_json(&records[0])?;
    }
    Ok(())
}

fn check_repeats(repeats: usize) -> Result<()> {
    if repeats == 0 {
        return Err(Error::Input("--repeats must be at least 1".into()));
    }
    Ok(())
}

fn reject_duplicates(methods: &[String]) -> Result<()> {
    for i in 1..methods.len() {
        if methods[..i].contains(&methods[i]) {
            return Err(Error::Input(format!("method {:?} given twice", methods[i])));
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct NmfArgs {
    /// Generator descriptor, e.g. `lowrank:rows=30,cols=20,rank=4`.
    #[arg(long, conflicts_with = "data")]
    pub gen: Option<String>,
    /// Nonnegative target matrix from a file; requires --rank.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Comma-separated subset of: mu, pgd, sci-pi.
    #[arg(long, default_value = "mu,pgd,sci-pi")]
    pub methods: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shift sigma for the sci-pi update (default 1).
    #[arg(long)]
    pub shift: Option<f64>,
    /// Step factor for projected gradient (default: picked from a grid).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub x_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub timings: bool,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

fn parse_nmf_methods(text: &str) -> Result<Vec<NmfMethod>> {
    let mut methods = Vec::new();
    for token in text.split(',') {
        let m = match token.trim() {
            "mu" => NmfMethod::Multiplicative,
            "pgd" => NmfMethod::ProjectedGradient,
            "sci-pi" => NmfMethod::SciPi,
            other => {
                return Err(Error::Input(format!(
                    "unknown NMF method {:?} (expected mu, pgd or sci-pi)",
                    other
                )))
            }
        };
        if methods.contains(&m) {
            return Err(Error::Input(format!("method {:?} given twice", token.trim())));
        }
        methods.push(m);
    }
    Ok(methods)
}

pub fn cmd_nmf(args: &NmfArgs) -> Result<i32> {
    check_repeats(args.repeats)?;
    let methods = parse_nmf_methods(&args.methods)?;

    let run_one = |trial: usize| -> Result<(ComparisonRecord, i32)> {
        let seed = args.seed.wrapping_add(trial as u64);
        let (v, rank, echo) = build_nmf(args.gen.as_deref(), args.data.as_deref(), args.rank, seed)?;
        let init = NmfInit::Seeded(seed);
        let cfg = SolverConfig {
            max_iter: args.max_iter,
            x_tol: args.x_tol,
            shift: args.shift,
            step: args.step,
            seed,
            ..SolverConfig::default()
        };
        let mut records = Vec::new();
        let mut cmp = Comparison::default();
        let mut code = 0;
        for &method in &methods {
            let name = method.as_str();
            let started = Instant::now();
            let fit = nmf_solve(&v, rank, method, &init, &cfg)?;
            code = code.max(exit_code(fit.stop_reason));
            cmp.final_objective.insert(name.into(), fit.final_kl());
            cmp.iterations.insert(name.into(), fit.iterations);
            cmp.converged.insert(name.into(), fit.converged);
            records.push(fit_record(
                format!("nmf-{}-s{}", name, seed),
                &echo,
                name,
                &cfg,
                rows_from_trace(&fit.kl_trace),
                fit.converged,
                fit.stop_reason,
                fit.iterations,
                fit.final_kl(),
                fit.best_kl,
                args.timings.then(|| started.elapsed().as_secs_f64() * 1e3),
            ));
        }
        fill_ratios(&mut cmp);
        let id = format!("nmf-s{}", seed);
        Ok((ComparisonRecord { id, problem: echo, records, comparison: cmp }, code))
    };

    let (records, code) = merge_outcomes(run_trials(args.repeats, run_one))?;
    emit_comparison(args.out.clone(), args.csv.clone(), records)?;
    Ok(code)
}

#[derive(Args)]
pub struct GmmArgs {
    /// Generator descriptor, e.g. `gmm:n=100,k=2,dim=1,sep=6`.
    #[arg(long, conflicts_with = "data")]
    pub gen: Option<String>,
    /// Observations from a file (rows = samples); requires --components.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub components: Option<usize>,
    /// Comma-separated subset of: em, sci-pi.
    #[arg(long, default_value = "em,sci-pi")]
    pub methods: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shift sigma for the sci-pi weight update (default 1).
    #[arg(long)]
    pub shift: Option<f64>,
    /// Covariance regularization floor.
    #[arg(long)]
    pub cov_floor: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub x_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub timings: bool,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.partial_cmp(a).expect("weights are finite"));
    v
}

pub fn cmd_gmm(args: &GmmArgs) -> Result<i32> {
    check_repeats(args.repeats)?;
    let methods: Vec<String> = args.methods.split(',').map(|s| s.trim().to_string()).collect();
    for m in &methods {
        if m != "em" && m != SCI_PI {
            return Err(Error::Input(format!(
                "unknown GMM method {:?} (expected em or sci-pi)",
                m
            )));
        }
    }
    reject_duplicates(&methods)?;

    let run_one = |trial: usize| -> Result<(ComparisonRecord, i32)> {
        let seed = args.seed.wrapping_add(trial as u64);
        let (data, k, truth_weights, echo) =
            build_gmm(args.gen.as_deref(), args.data.as_deref(), args.components, seed)?;
        let problem = GmmProblem::new(data, k, args.cov_floor)?;
        let init = GmmInit::Seeded(seed);
        let cfg = SolverConfig {
            max_iter: args.max_iter,
            x_tol: args.x_tol,
            shift: args.shift,
            seed,
            ..SolverConfig::default()
        };
        let mut records = Vec::new();
        let mut cmp = Comparison::default();
        let mut code = 0;
        for name in &methods {
            let started = Instant::now();
            let fit = if name == "em" {
                em_gmm(&problem, &init, &cfg)?
            } else {
                gmm_sci_pi(&problem, &init, &cfg)?
            };
            code = code.max(exit_code(fit.stop_reason));
            cmp.final_objective.insert(name.clone(), fit.final_loglik());
            cmp.iterations.insert(name.clone(), fit.iterations);
            cmp.converged.insert(name.clone(), fit.converged);
            cmp.weights.insert(name.clone(), sorted_desc(fit.weights.to_vec()));
            records.push(fit_record(
                format!("gmm-{}-s{}", name, seed),
                &echo,
                name,
                &cfg,
                rows_from_trace(&fit.loglik_trace),
                fit.converged,
                fit.stop_reason,
                fit.iterations,
                fit.final_loglik(),
                fit.best_loglik,
                args.timings.then(|| started.elapsed().as_secs_f64() * 1e3),
            ));
        }
        if let Some(w) = &truth_weights {
            cmp.weights.insert("truth".into(), sorted_desc(w.to_vec()));
        }
        fill_ratios(&mut cmp);
        let id = format!("gmm-s{}", seed);
        Ok((ComparisonRecord { id, problem: echo, records, comparison: cmp }, code))
    };

    let (records, code) = merge_outcomes(run_trials(args.repeats, run_one))?;
    emit_comparison(args.out.clone(), args.csv.clone(), records)?;
    Ok(code)
}

#[derive(Args)]
pub struct IcaArgs {
    /// Generator descriptor, e.g. `ica:n=2000,d=2`.
    #[arg(long, conflicts_with = "data")]
    pub gen: Option<String>,
    /// Whitened observations from a file (rows = samples).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated subset of: fastica, sci-pi.
    #[arg(long, default_value = "fastica,sci-pi")]
    pub methods: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub x_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub timings: bool,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

/// Best squared cosine against any ground-truth column, and the index
/// of the winning column.
pub(crate) fn best_direction(x: &ndarray::Array1<f64>, directions: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, -1.0);
    for (j, col) in directions.columns().into_iter().enumerate() {
        let c = x.dot(&col);
        if c * c > best.1 {
            best = (j, c * c);
        }
    }
    best
}

pub fn cmd_ica(args: &IcaArgs) -> Result<i32> {
    check_repeats(args.repeats)?;
    let methods: Vec<String> = args.methods.split(',').map(|s| s.trim().to_string()).collect();
    for m in &methods {
        if m != "fastica" && m != SCI_PI {
            return Err(Error::Input(format!(
                "unknown ICA method {:?} (expected fastica or sci-pi)",
                m
            )));
        }
    }
    reject_duplicates(&methods)?;

    let run_one = |trial: usize| -> Result<(ComparisonRecord, i32)> {
        let seed = args.seed.wrapping_add(trial as u64);
        let (problem, directions, echo) =
            build_ica(args.gen.as_deref(), args.data.as_deref(), seed)?;
        let cfg = SolverConfig {
            max_iter: args.max_iter,
            x_tol: args.x_tol,
            seed,
            ..SolverConfig::default()
        };
        let x0 = start_point(problem.dim(), seed);
        let mut records = Vec::new();
        let mut cmp = Comparison::default();
        let mut code = 0;
        for name in &methods {
            let started = Instant::now();
            let res = if name == "fastica" {
                fast_ica(&problem, &x0, &cfg)?
            } else {
                ica_sci_pi(&problem, &x0, &cfg)?
            };
            code = code.max(exit_code(res.stop_reason));
            let mut rows = rows_from_result(&res);
            if let Some(dirs) = &directions {
                let (j, cos2) = best_direction(&res.x, dirs);
                cmp.alignment.insert(name.clone(), cos2.sqrt());
                // Per-row alignment against the direction this method
                // actually found, for plotting.
                if let Some(hist) = &res.iterate_trace {
                    let target = dirs.column(j);
                    for (row, x) in rows.iter_mut().zip(hist) {
                        let c = x.dot(&target);
                        row.alignment = Some(1.0 - c * c);
                    }
                }
            }
            cmp.final_objective.insert(name.clone(), res.final_objective());
            cmp.iterations.insert(name.clone(), res.iterations);
            cmp.converged.insert(name.clone(), res.converged);
            records.push(fit_record(
                format!("ica-{}-s{}", name, seed),
                &echo,
                name,
                &cfg,
                rows,
                res.converged,
                res.stop_reason,
                res.iterations,
                res.final_objective(),
                res.best_objective,
                args.timings.then(|| started.elapsed().as_secs_f64() * 1e3),
            ));
        }
        fill_ratios(&mut cmp);
        let id = format!("ica-s{}", seed);
        Ok((ComparisonRecord { id, problem: echo, records, comparison: cmp }, code))
    };

    let (records, code) = merge_outcomes(run_trials(args.repeats, run_one))?;
    emit_comparison(args.out.clone(), args.csv.clone(), records)?;
    Ok(code)
}
