//! The `solve` and `rate` subcommands.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use scipi::analysis::{
    empirical_rate, empirical_rate_from_errors, predicted_block_rate, predicted_partial_rate,
    predicted_rate,
};
use scipi::problems::{apply_shift, BlockProblem, PartialProblem};
use scipi::solvers::{
    block_sci_pi, partial_sci_pi, power_iteration, sci_pi, SolveResult, SolverConfig, StopReason,
};
use scipi::{Error, Result};

use crate::instance::{
    build_block, build_partial, build_sphere, start_pair, start_point, BlockInstance,
    SphereInstance, SPHERE_PROBLEMS,
};
use crate::output::{
    aggregate, rows_from_result, ConfigEcho, Emit, ProblemEcho, RateOut, Row, Summary,
    TraceRecord, TrialsRecord,
};
use crate::repeats::run_trials;

pub fn exit_code(reason: StopReason) -> i32 {
    match reason {
        StopReason::XTol | StopReason::FTol => 0,
        StopReason::MaxIter => 2,
        StopReason::ZeroGradient => 3,
    }
}

fn wall_ms(start: Instant, timings: bool) -> Option<f64> {
    timings.then(|| start.elapsed().as_secs_f64() * 1e3)
}

#[derive(Args)]
pub struct SolveArgs {
    /// Problem family: quadratic, lp-pca, mixture, ica or klnmf-sub.
    #[arg(long)]
    pub problem: String,
    /// Generator descriptor, e.g. `spectrum:d=50,l1=1,l2=0.9`.
    #[arg(long, conflicts_with = "data")]
    pub gen: Option<String>,
    /// Load the instance from a file (CSV, or Matrix Market for .mtx).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// sci-pi (default) or power (quadratic only).
    #[arg(long, default_value = "sci-pi")]
    pub solver: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exponent for lp-pca.
    #[arg(long, default_value_t = 4)]
    pub p: u32,
    /// Likelihood floor for mixture.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Spherical shift sigma added to the update.
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub x_tol: f64,
    /// Relative objective gap stop; needs --f-ref.
    #[arg(long)]
    pub f_tol: Option<f64>,
    #[arg(long)]
    pub f_ref: Option<f64>,
    /// Write the JSON trace here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the iteration rows as flat CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Record wall-clock times (makes traces non-reproducible).
    #[arg(long)]
    pub timings: bool,
    /// Run N independent trials with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    if args.repeats == 0 {
        return Err(Error::Input("--repeats must be at least 1".into()));
    }
    match args.solver.as_str() {
        "sci-pi" | "power" => {}
        other => {
            return Err(Error::Input(format!(
                "unknown solver {:?} (expected sci-pi or power)",
                other
            )))
        }
    }

    let run_one = |trial: usize| -> Result<(TraceRecord, i32)> {
        let seed = args.seed.wrapping_add(trial as u64);
        let inst = build_sphere(
            &args.problem,
            args.gen.as_deref(),
            args.data.as_deref(),
            args.p,
            args.eps,
            seed,
        )?;
        let cfg = SolverConfig {
            max_iter: args.max_iter,
            x_tol: args.x_tol,
            f_tol: args.f_tol,
            f_ref: args.f_ref,
            shift: args.shift,
            seed,
            ..SolverConfig::default()
        };
        let x0 = start_point(inst.problem.dim(), seed);
        let started = Instant::now();
        let res = match args.solver.as_str() {
            "power" => {
                let a = inst.matrix.as_ref().ok_or_else(|| {
                    Error::Config("the power solver only applies to quadratic problems".into())
                })?;
                power_iteration(a, &x0, &cfg)?
            }
            _ => sci_pi(&inst.problem, &x0, &cfg)?,
        };
        let code = exit_code(res.stop_reason);
        let id = if args.repeats > 1 {
            format!("solve-{}-s{}-t{}", args.problem, seed, trial)
        } else {
            format!("solve-{}-s{}", args.problem, seed)
        };
        let record = TraceRecord {
            id,
            problem: inst.echo,
            solver: args.solver.clone(),
            config: ConfigEcho::from_config(&cfg),
            rows: rows_from_result(&res),
            summary: Summary {
                converged: res.converged,
                stop_reason: res.stop_reason.as_str().to_string(),
                iterations: res.iterations,
                final_objective: res.final_objective(),
                best_objective: res.best_objective,
                wall_ms: wall_ms(started, args.timings),
                rate: None,
            },
        };
        Ok((record, code))
    };

    let outcomes = run_trials(args.repeats, run_one);
    let mut records = Vec::with_capacity(outcomes.len());
    let mut code = 0;
    for outcome in outcomes {
        let (record, c) = outcome?;
        code = code.max(c);
        records.push(record);
    }

    for rec in &records {
        eprintln!(
            "{}: {} after {} iterations, f = {:.6e}",
            rec.id, rec.summary.stop_reason, rec.summary.iterations, rec.summary.final_objective
        );
    }
    let emit = Emit { out: args.out.clone(), csv: args.csv.clone() };
    emit.write_csv(&records.iter().collect::<Vec<_>>())?;
    if args.repeats > 1 {
        let agg = aggregate(&records);
        eprintln!(
            "aggregate over {} trials: {} converged, mean f = {:.6e}, mean iterations = {:.1}",
            agg.trials, agg.converged, agg.final_objective.mean, agg.iterations.mean
        );
        emit.write_json(&TrialsRecord { trials: records, aggregate: agg })?;
    } else {
        emit.write_json(&records[0])?;
    }
    Ok(code)
}

#[derive(Args)]
pub struct RateArgs {
    /// quadratic, lp-pca, mixture, ica, klnmf-sub, block-separable,
    /// block-coupled or partial-quadratic.
    #[arg(long)]
    pub problem: String,
    #[arg(long, conflicts_with = "data")]
    pub gen: Option<String>,
    /// Data file (sphere problems only).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub p: u32,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Shift for sphere problems; the prediction uses the shifted
    /// Hessian, matching what the solver actually iterated.
    #[arg(long)]
    pub shift: Option<f64>,
    /// Ascent step alpha for the partial y block (default 2/(L+mu)).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// The study solves to high precision by default.
    #[arg(long, default_value_t = 1e-13)]
    pub x_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub timings: bool,
}

pub fn cmd_rate(args: &RateArgs) -> Result<i32> {
    match args.problem.as_str() {
        p if SPHERE_PROBLEMS.contains(&p) => rate_sphere(args),
        "block-separable" | "block-coupled" => {
            if args.data.is_some() {
                return Err(Error::Input("block problems are generator-only".into()));
            }
            if args.shift.is_some() {
                return Err(Error::Input(
                    "--shift is not supported for block rate studies".into(),
                ));
            }
            let (inst, echo) = build_block(&args.problem, args.gen.as_deref(), args.seed)?;
            match inst {
                BlockInstance::Separable(p) => rate_block(args, &p, echo),
                BlockInstance::Coupled(p) => rate_block(args, &p, echo),
            }
        }
        "partial-quadratic" => {
            if args.data.is_some() {
                return Err(Error::Input("partial problems are generator-only".into()));
            }
            if args.shift.is_some() {
                return Err(Error::Input(
                    "--shift is not supported for partial rate studies".into(),
                ));
            }
            let (p, echo) = build_partial(args.gen.as_deref(), args.seed)?;
            rate_partial(args, &p, echo)
        }
        other => Err(Error::Input(format!(
            "unknown problem {:?} (expected one of: {}, block-separable, block-coupled, partial-quadratic)",
            other,
            SPHERE_PROBLEMS.join(", ")
        ))),
    }
}

fn warn_not_converged(res: &SolveResult) {
    if !res.converged {
        eprintln!(
            "warning: solver stopped on {} after {} iterations; treating the final point as the solution anyway",
            res.stop_reason.as_str(),
            res.iterations
        );
    }
}

fn emit_rate(
    args: &RateArgs,
    echo: ProblemEcho,
    solver: &str,
    cfg: &SolverConfig,
    res: &SolveResult,
    rows: Vec<Row>,
    rate: Option<RateOut>,
    started: Instant,
) -> Result<i32> {
    let record = TraceRecord {
        id: format!("rate-{}-s{}", args.problem, args.seed),
        problem: echo,
        solver: solver.to_string(),
        config: ConfigEcho::from_config(cfg),
        rows,
        summary: Summary {
            converged: res.converged,
            stop_reason: res.stop_reason.as_str().to_string(),
            iterations: res.iterations,
            final_objective: res.final_objective(),
            best_objective: res.best_objective,
            wall_ms: wall_ms(started, args.timings),
            rate,
        },
    };
    if let Some(rate) = &record.summary.rate {
        match (rate.rho_predicted, rate.rho_empirical, rate.ratio) {
            (Some(p), Some(e), Some(r)) => eprintln!(
                "{}: predicted {:.6e}, empirical {:.6e}, ratio {:.4}",
                record.id, p, e, r
            ),
            _ => eprintln!("{}: rate not applicable (see trace for details)", record.id),
        }
    }
    let emit = Emit { out: args.out.clone(), csv: args.csv.clone() };
    emit.write_csv(&[&record])?;
    emit.write_json(&record)?;
    Ok(exit_code(res.stop_reason))
}

fn rate_sphere(args: &RateArgs) -> Result<i32> {
    let inst: SphereInstance = build_sphere(
        &args.problem,
        args.gen.as_deref(),
        args.data.as_deref(),
        args.p,
        args.eps,
        args.seed,
    )?;
    let cfg = SolverConfig {
        max_iter: args.max_iter,
        x_tol: args.x_tol,
        shift: args.shift,
        seed: args.seed,
        ..SolverConfig::default()
    };
    let x0 = start_point(inst.problem.dim(), args.seed);
    let started = Instant::now();
    let res = sci_pi(&inst.problem, &x0, &cfg)?;
    warn_not_converged(&res);

    // The solver iterated the shifted gradient map, so the prediction
    // must look at the shifted Hessian; sigma = 0 reduces to the plain
    // problem.
    let shifted = apply_shift(inst.problem, args.shift.unwrap_or(0.0));
    let rate = match predicted_rate(&shifted, &res.x) {
        Ok(report) => {
            if !report.condition_ok {
                eprintln!(
                    "warning: rate condition fails (lambda* = {:.6e}, lambda_bar_2 = {:.6e}); no contraction is predicted",
                    report.lambda_star, report.lambda_bar_2
                );
            }
            let empirical = match empirical_rate(&res, &res.x) {
                Ok(v) => Some(v),
                Err(e) => {
                    eprintln!("warning: no empirical rate: {e}");
                    None
                }
            };
            let ratio = match (report.rho_predicted, empirical) {
                (Some(p), Some(e)) if p > 0.0 => Some(e / p),
                _ => None,
            };
            Some(RateOut {
                condition_ok: report.condition_ok,
                rho_predicted: report.rho_predicted,
                rho_empirical: empirical,
                ratio,
                lambda_star: report.lambda_star,
                lambda_bar_2: report.lambda_bar_2,
                s_star: None,
                s_bar_2: None,
                nu: None,
                coupling_ok: None,
                note: None,
            })
        }
        Err(Error::Precondition(msg)) => {
            eprintln!("warning: rate not applicable: {msg}");
            None
        }
        Err(e) => return Err(e),
    };

    // Post-hoc alignment against the converged direction.
    let mut rows = rows_from_result(&res);
    if let Some(hist) = &res.iterate_trace {
        for (row, x) in rows.iter_mut().zip(hist) {
            let c = x.dot(&res.x);
            row.alignment = Some(1.0 - c * c);
        }
    }
    emit_rate(args, inst.echo, "sci-pi", &cfg, &res, rows, rate, started)
}

/// Two passes: converge once to find the solution pair, then rerun with
/// references set so every iterate's alignment errors are recorded.
/// Both passes walk the identical trajectory.
fn two_pass_block<F>(cfg: &SolverConfig, run: F) -> Result<(SolveResult, SolveResult)>
where
    F: Fn(&SolverConfig) -> Result<SolveResult>,
{
    let first = run(cfg)?;
    let mut cfg2 = cfg.clone();
    cfg2.x_ref = Some(first.x.clone());
    cfg2.y_ref = first.y.clone();
    let second = run(&cfg2)?;
    debug_assert_eq!(first.iterations, second.iterations);
    Ok((first, second))
}

/// Combined squared error per iterate: the x block contributes
/// `1 - cos^2`, the y block likewise on the sphere, or `||y - y*||^2`
/// when free. The block theory contracts this sum at `rho^2`.
fn combined_errors(res: &SolveResult, square_y: bool) -> Option<Vec<f64>> {
    let ax = res.alignment_trace.as_ref()?;
    let ay = res.alignment_trace_y.as_ref()?;
    Some(
        ax.iter()
            .zip(ay)
            .map(|(&a, &b)| a + if square_y { b * b } else { b })
            .collect(),
    )
}

fn block_rate_out(
    report: &scipi::analysis::BlockRateReport,
    errors: Option<Vec<f64>>,
    note: &str,
) -> RateOut {
    let empirical = errors.and_then(|e| match empirical_rate_from_errors(&e) {
        Ok(v) => Some(v),
        Err(err) => {
            eprintln!("warning: no empirical rate: {err}");
            None
        }
    });
    let ratio = match (report.rho, empirical) {
        (Some(p), Some(e)) if p > 0.0 => Some(e / (p * p)),
        _ => None,
    };
    if !report.condition_ok {
        eprintln!("warning: rate condition fails; no contraction is predicted");
    } else if !report.coupling_ok {
        eprintln!("warning: coupling condition fails; the predicted radius may not bound the error");
    }
    RateOut {
        condition_ok: report.condition_ok,
        rho_predicted: report.rho,
        rho_empirical: empirical,
        ratio,
        lambda_star: report.lambda_star,
        lambda_bar_2: report.lambda_bar_2,
        s_star: Some(report.s_star),
        s_bar_2: Some(report.s_bar_2),
        nu: Some(report.nu),
        coupling_ok: Some(report.coupling_ok),
        note: Some(note.to_string()),
    }
}

const BLOCK_NOTE: &str =
    "rho_predicted bounds the unsquared error pair; rho_empirical fits the combined squared error, so ratio = empirical / rho^2";

fn rate_block<P: BlockProblem>(args: &RateArgs, problem: &P, echo: ProblemEcho) -> Result<i32> {
    let cfg = SolverConfig {
        max_iter: args.max_iter,
        x_tol: args.x_tol,
        seed: args.seed,
        ..SolverConfig::default()
    };
    let (x0, y0) = start_pair(problem.dim_x(), problem.dim_y(), args.seed);
    let started = Instant::now();
    let (first, second) = two_pass_block(&cfg, |c| block_sci_pi(problem, &x0, &y0, c))?;
    warn_not_converged(&first);
    let y_star = first.y.as_ref().expect("block solver returns y");
    let rate = match predicted_block_rate(problem, &first.x, y_star) {
        Ok(report) => Some(block_rate_out(&report, combined_errors(&second, false), BLOCK_NOTE)),
        Err(Error::Precondition(msg)) => {
            eprintln!("warning: rate not applicable: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let rows = rows_from_result(&second);
    emit_rate(args, echo, "block-sci-pi", &cfg, &second, rows, rate, started)
}

fn rate_partial<P: PartialProblem>(args: &RateArgs, problem: &P, echo: ProblemEcho) -> Result<i32> {
    let cfg = SolverConfig {
        max_iter: args.max_iter,
        x_tol: args.x_tol,
        step: args.step,
        seed: args.seed,
        ..SolverConfig::default()
    };
    let (x0, mut y0) = start_pair(problem.dim_x(), problem.dim_y(), args.seed);
    // The y block is unconstrained; starting on the sphere is harmless
    // but a zero start matches the penalty's base point better.
    y0.fill(0.0);
    let started = Instant::now();
    let (first, second) = two_pass_block(&cfg, |c| partial_sci_pi(problem, &x0, &y0, c))?;
    warn_not_converged(&first);
    let y_star = first.y.as_ref().expect("partial solver returns y");
    let rate = match predicted_partial_rate(problem, &first.x, y_star, args.step) {
        Ok(report) => Some(block_rate_out(&report, combined_errors(&second, true), BLOCK_NOTE)),
        Err(Error::Precondition(msg)) => {
            eprintln!("warning: rate not applicable: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let rows = rows_from_result(&second);
    emit_rate(args, echo, "partial-sci-pi", &cfg, &second, rows, rate, started)
}
