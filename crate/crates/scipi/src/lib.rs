//! Scale-invariant power iteration (SCI-PI) and friends.
//!
//! The crate is organised around one idea: for an objective `f` that is
//! scale invariant, the stationary points of `max f(x) s.t. ||x|| = 1`
//! are eigenvectors of the Hessian at the solution, and the fixed-point
//! iteration `x <- grad f(x) / ||grad f(x)||` behaves like power
//! iteration near such a point. The modules below provide:
//!
//! * [`problems`]: constructors for objectives with that structure
//!   (quadratic forms, L_p-PCA, mixture likelihoods, kurtosis ICA,
//!   a KL-NMF column subproblem, Gaussian mixtures) plus block and
//!   partially scale-invariant test families,
//! * [`solvers`]: SCI-PI itself, classical power iteration, block and
//!   partial variants, and baselines (EM, multiplicative NMF updates,
//!   projected gradient, FastICA),
//! * [`analysis`]: identity and invariance checks, the dual
//!   construction, predicted vs. measured convergence rates,
//! * [`linalg`]: the small dense kernels everything else leans on
//!   (symmetric eigendecomposition, simplex projection, Cholesky, a
//!   seedable RNG),
//! * [`data`]: CSV / Matrix Market loading and seeded generators for
//!   synthetic experiments.

pub mod analysis;
pub mod data;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod solvers;

pub use error::{Error, Result};
