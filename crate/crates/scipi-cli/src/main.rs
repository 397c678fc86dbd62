//! Command line driver for the scipi library.
//!
//! Every run emits a single JSON trace record (one line, deterministic
//! for a fixed seed) and human-readable progress on stderr. Exit codes:
//! 0 converged, 1 bad input, 2 iteration limit, 3 gradient collapse,
//! 4 verification failure.

mod compare;
mod instance;
mod output;
mod repeats;
mod run;
mod verify;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "scipi", version, about = "Scale-invariant power iteration and friends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize a sphere-constrained objective with SCI-PI (or classical
    /// power iteration on a quadratic).
    Solve(run::SolveArgs),
    /// Solve, then compare the observed convergence rate against the
    /// eigenvalue prediction at the solution.
    Rate(run::RateArgs),
    /// KL-NMF: run multiplicative updates, projected gradient and the
    /// SCI-PI column solver on one instance and compare objectives.
    Nmf(compare::NmfArgs),
    /// Gaussian mixtures: fit by EM and by SCI-PI on the mixture-weight
    /// subproblem, from the same initialization.
    Gmm(compare::GmmArgs),
    /// Kurtosis ICA: compare FastICA with SCI-PI on whitened data.
    Ica(compare::IcaArgs),
    /// Run the self-check battery: invariance classification,
    /// finite-difference gradients, the Euler identities, monotone
    /// ascent, the eigenvector property and the dual map.
    Verify(verify::VerifyArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors; everything else
            // is an input problem and exits 1.
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };

    let outcome = match &cli.command {
        Command::Solve(args) => run::cmd_solve(args),
        Command::Rate(args) => run::cmd_rate(args),
        Command::Nmf(args) => compare::cmd_nmf(args),
        Command::Gmm(args) => compare::cmd_gmm(args),
        Command::Ica(args) => compare::cmd_ica(args),
        Command::Verify(args) => verify::cmd_verify(args),
    };

    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
