//! The `verify` command: run the analysis battery over the built-in
//! problems and print one line per check.

use std::path::PathBuf;

use clap::Args;
use ndarray::{Array1, Array2};
use serde::Serialize;

use scipi::analysis::{
    check_eigenvector_property, check_identities, classify_invariance, dual_map,
    finite_diff_gradient, Classification, GRADIENT_IDENTITY_TOL, HESSIAN_IDENTITY_TOL,
};
use scipi::linalg::{norm2, Rng};
use scipi::problems::{InvarianceKind, ScaleInvariantProblem};
use scipi::solvers::{sci_pi, SolveResult, SolverConfig};
use scipi::{Error, Result};

use crate::compare::best_direction;
use crate::instance::{build_sphere, start_point, SPHERE_PROBLEMS};
use crate::output::Emit;

/// Probe points per problem for the derivative and identity checks.
const PROBE_POINTS: usize = 20;
/// Scale probes for the invariance classifier.
const CLASSIFY_SAMPLES: usize = 24;
/// Relative tolerance for the finite-difference gradient check.
const FD_TOL: f64 = 1e-6;
/// Tolerance on the recovered degree / log-base from classification.
const DEGREE_TOL: f64 = 1e-6;
/// Relative slack allowed in the monotone-ascent check.
const ASCENT_SLACK: f64 = 1e-12;
/// `|f(w*) - 1|` bound for the dual map check.
const DUAL_TOL: f64 = 1e-10;
/// Minimum `|cos|` against a ground-truth direction (ICA recovery).
const ALIGN_MIN: f64 = 0.99;

#[derive(Args)]
pub struct VerifyArgs {
    /// Base seed for the battery instances and probe points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fault injection: add this magnitude (along a fixed direction) to
    /// every gradient, to demonstrate that the checks catch it.
    #[arg(long, value_name = "DELTA")]
    pub perturb_grad: Option<f64>,
    /// Emit the report as a single JSON object instead of text lines.
    #[arg(long)]
    pub json: bool,
    /// Write the JSON report to this file.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
pub struct CheckOut {
    pub problem: String,
    pub check: &'static str,
    /// "pass", "fail" or "skip".
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb_grad: Option<f64>,
    pub checks: Vec<CheckOut>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub all_ok: bool,
}

/// What a single check concluded, before it is labeled with the
/// problem and check names.
struct Outcome {
    status: &'static str,
    residual: Option<f64>,
    threshold: Option<f64>,
    note: Option<String>,
}

impl Outcome {
    fn pass_fail(ok: bool, residual: f64, threshold: f64, note: Option<String>) -> Self {
        Outcome {
            status: if ok { "pass" } else { "fail" },
            residual: Some(residual),
            threshold: Some(threshold),
            note,
        }
    }

    fn skip(note: impl Into<String>) -> Self {
        Outcome {
            status: "skip",
            residual: None,
            threshold: None,
            note: Some(note.into()),
        }
    }
}

fn run_check(
    checks: &mut Vec<CheckOut>,
    problem: &str,
    check: &'static str,
    body: impl FnOnce() -> Result<Outcome>,
) {
    let out = body().unwrap_or_else(|e| Outcome {
        status: "fail",
        residual: None,
        threshold: None,
        note: Some(e.to_string()),
    });
    checks.push(CheckOut {
        problem: problem.to_string(),
        check,
        status: out.status,
        residual: out.residual,
        threshold: out.threshold,
        note: out.note,
    });
}

/// Fault-injection wrapper: adds `delta` times a fixed unit vector to
/// every gradient while leaving values and Hessians alone, so a run
/// with `--perturb-grad` shows which checks catch a broken gradient.
struct PerturbGrad<P> {
    inner: P,
    delta: f64,
}

fn perturb_pattern(d: usize) -> Array1<f64> {
    let s = 1.0 / (d as f64).sqrt();
    Array1::from_shape_fn(d, |i| if i % 2 == 0 { s } else { -s })
}

impl<P: ScaleInvariantProblem> ScaleInvariantProblem for PerturbGrad<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn kind(&self) -> InvarianceKind {
        self.inner.kind()
    }
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.inner.value(x)
    }
    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let g = self.inner.gradient(x)?;
        Ok(g + &(perturb_pattern(self.inner.dim()) * self.delta))
    }
    fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        self.inner.hessian(x)
    }
}

fn class_label(c: &Classification) -> String {
    match c {
        Classification::Multiplicative { degree } => format!("multiplicative(degree={})", degree),
        Classification::Additive { base } => format!("additive(base={})", base),
        Classification::Inconclusive => "inconclusive".into(),
    }
}

/// Shift used when solving each battery problem. The two convex
/// objectives iterate bare; the rest get a unit shift, which is enough
/// to keep the update map well behaved on these small instances.
fn battery_shift(name: &str) -> f64 {
    match name {
        "quadratic" | "lp-pca" | "ica" => 0.0,
        _ => 1.0,
    }
}

fn run_battery(
    checks: &mut Vec<CheckOut>,
    name: &str,
    p: &dyn ScaleInvariantProblem,
    directions: Option<&Array2<f64>>,
    seed: u64,
) {
    let kind = p.kind();
    let analyzable = matches!(
        kind,
        InvarianceKind::Multiplicative { .. } | InvarianceKind::Additive { .. }
    );

    run_check(checks, name, "classification", || {
        let got = classify_invariance(&p, CLASSIFY_SAMPLES, seed.wrapping_add(100))?;
        let outcome = match (&kind, &got) {
            (InvarianceKind::Multiplicative { degree }, Classification::Multiplicative { degree: d }) => {
                let err = (degree - d).abs();
                Outcome::pass_fail(err <= DEGREE_TOL, err, DEGREE_TOL, Some(format!(
                    "declared {}, probe recovered degree {:.6}",
                    kind.label(),
                    d
                )))
            }
            (InvarianceKind::Additive { base }, Classification::Additive { base: b }) => {
                let err = (base.ln() - b.ln()).abs();
                Outcome::pass_fail(err <= DEGREE_TOL, err, DEGREE_TOL, Some(format!(
                    "declared {}, probe recovered base {:.6}",
                    kind.label(),
                    b
                )))
            }
            (InvarianceKind::SumOfScaleInvariant, Classification::Inconclusive) => Outcome {
                status: "pass",
                residual: None,
                threshold: None,
                note: Some("a sum of invariant terms is correctly left unclassified".into()),
            },
            _ => Outcome {
                status: "fail",
                residual: None,
                threshold: None,
                note: Some(format!(
                    "declared {} but the probe classified {}",
                    kind.label(),
                    class_label(&got)
                )),
            },
        };
        Ok(outcome)
    });

    run_check(checks, name, "gradient-fd", || {
        let mut rng = Rng::new(seed.wrapping_add(200));
        let mut worst = 0.0f64;
        for _ in 0..PROBE_POINTS {
            let x = rng.unit_sphere(p.dim());
            let g = p.gradient(&x)?;
            let fd = finite_diff_gradient(&|z: &Array1<f64>| p.value(z), &x, None)?;
            let rel = norm2(&(&fd - &g)) / (1.0 + norm2(&g));
            worst = worst.max(rel);
        }
        Ok(Outcome::pass_fail(
            worst <= FD_TOL,
            worst,
            FD_TOL,
            Some(format!("{} sphere points", PROBE_POINTS)),
        ))
    });

    run_check(checks, name, "identities", || {
        if !analyzable {
            return Ok(Outcome::skip(
                "the Euler identities apply to a single invariant term, not a sum",
            ));
        }
        let mut rng = Rng::new(seed.wrapping_add(300));
        let mut worst_g = 0.0f64;
        let mut worst_h = 0.0f64;
        let mut ok = true;
        for _ in 0..PROBE_POINTS {
            let x = rng.unit_sphere(p.dim());
            let rep = check_identities(&p, &x)?;
            worst_g = worst_g.max(rep.gradient_residual);
            worst_h = worst_h.max(rep.hessian_residual);
            ok &= rep.ok();
        }
        Ok(Outcome {
            status: if ok { "pass" } else { "fail" },
            residual: Some(worst_g.max(worst_h)),
            threshold: None,
            note: Some(format!(
                "max gradient residual {:.3e} (tol {:.0e} rel), max Hessian residual {:.3e} (tol {:.0e} rel)",
                worst_g, GRADIENT_IDENTITY_TOL, worst_h, HESSIAN_IDENTITY_TOL
            )),
        })
    });

    // One solve feeds the remaining checks.
    let cfg = SolverConfig {
        max_iter: 20_000,
        x_tol: 1e-12,
        shift: Some(battery_shift(name)),
        seed,
        ..SolverConfig::default()
    };
    let x0 = start_point(p.dim(), seed);
    // The error is kept as text so every dependent check can report it.
    let solved: std::result::Result<SolveResult, String> =
        sci_pi(&p, &x0, &cfg).map_err(|e| e.to_string());

    run_check(checks, name, "ascent", || {
        let res = solved
            .as_ref()
            .map_err(|e| Error::Numeric(format!("solver failed: {e}")))?;
        let mut worst = 0.0f64;
        for pair in res.objective_trace.windows(2) {
            let drop = (pair[0] - pair[1]) / (1.0 + pair[0].abs());
            worst = worst.max(drop);
        }
        let mut note = format!(
            "{} iterations with shift {}",
            res.iterations,
            battery_shift(name)
        );
        if !res.converged {
            note.push_str(", did not converge");
        }
        Ok(Outcome::pass_fail(
            worst <= ASCENT_SLACK,
            worst,
            ASCENT_SLACK,
            Some(note),
        ))
    });

    run_check(checks, name, "eigenvector-property", || {
        if !analyzable {
            return Ok(Outcome::skip(
                "the eigenvector property applies to a single invariant term",
            ));
        }
        let res = solved
            .as_ref()
            .map_err(|e| Error::Numeric(format!("solver failed: {e}")))?;
        let rep = check_eigenvector_property(&p, &res.x)?;
        let threshold = 1e-6 * (1.0 + (rep.kappa * rep.lambda_star).abs());
        Ok(Outcome::pass_fail(
            rep.ok,
            rep.residual,
            threshold,
            Some(format!(
                "multiplier {:.6} with kappa {}",
                rep.lambda_star, rep.kappa
            )),
        ))
    });

    run_check(checks, name, "dual-map", || {
        if !analyzable {
            return Ok(Outcome::skip(
                "the dual map applies to a single invariant term",
            ));
        }
        let res = solved
            .as_ref()
            .map_err(|e| Error::Numeric(format!("solver failed: {e}")))?;
        let w = dual_map(&p, &res.x)?;
        let fv = p.value(&w)?;
        let err = (fv - 1.0).abs();
        Ok(Outcome::pass_fail(err <= DUAL_TOL, err, DUAL_TOL, None))
    });

    if let Some(dirs) = directions {
        run_check(checks, name, "recovery", || {
            let res = solved
            .as_ref()
            .map_err(|e| Error::Numeric(format!("solver failed: {e}")))?;
            let (j, cos2) = best_direction(&res.x, dirs);
            let align = cos2.sqrt();
            Ok(Outcome::pass_fail(
                align >= ALIGN_MIN,
                1.0 - align,
                1.0 - ALIGN_MIN,
                Some(format!("closest ground-truth direction {} with |cos| {:.6}", j, align)),
            ))
        });
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mut checks = Vec::new();
    for (i, &name) in SPHERE_PROBLEMS.iter().enumerate() {
        let seed = args.seed.wrapping_add(i as u64);
        let inst = build_sphere(name, None, None, 4, 0.0, seed)?;
        let directions = inst.directions;
        match args.perturb_grad {
            Some(delta) => {
                let wrapped = PerturbGrad {
                    inner: inst.problem,
                    delta,
                };
                run_battery(&mut checks, name, &wrapped, directions.as_ref(), seed);
            }
            None => {
                run_battery(
                    &mut checks,
                    name,
                    inst.problem.as_ref(),
                    directions.as_ref(),
                    seed,
                );
            }
        }
    }

    let passed = checks.iter().filter(|c| c.status == "pass").count();
    let failed = checks.iter().filter(|c| c.status == "fail").count();
    let skipped = checks.iter().filter(|c| c.status == "skip").count();
    let report = VerifyReport {
        seed: args.seed,
        perturb_grad: args.perturb_grad,
        checks,
        passed,
        failed,
        skipped,
        all_ok: failed == 0,
    };

    let mut lines = Vec::new();
    for c in &report.checks {
        let mut detail = match (c.residual, c.threshold) {
            (Some(r), Some(t)) => format!("residual {:.3e} (threshold {:.3e})", r, t),
            (Some(r), None) => format!("residual {:.3e}", r),
            _ => String::new(),
        };
        if let Some(note) = &c.note {
            if !detail.is_empty() {
                detail.push_str("; ");
            }
            detail.push_str(note);
        }
        lines.push(format!(
            "{:<4} {:<10} {:<20} {}",
            c.status, c.problem, c.check, detail
        ));
    }
    lines.push(format!(
        "verify: {} passed, {} failed, {} skipped",
        report.passed, report.failed, report.skipped
    ));

    if args.json {
        for line in &lines {
            eprintln!("{line}");
        }
        let emit = Emit {
            out: args.out.clone(),
            csv: None,
        };
        emit.write_json(&report)?;
    } else {
        for line in &lines {
            println!("{line}");
        }
        if args.out.is_some() {
            let emit = Emit {
                out: args.out.clone(),
                csv: None,
            };
            emit.write_json(&report)?;
        }
    }

    Ok(if report.all_ok { 0 } else { 4 })
}
