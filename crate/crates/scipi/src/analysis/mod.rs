//! Verification and convergence-rate analysis.
//!
//! Three groups of tools: finite differences (the fallback
//! differentiation used across the crate and the reference that
//! analytic derivatives are tested against), invariance checks (does
//! an objective really transform the way it claims, do the identities
//! and the eigenvector property hold, where does the dual map land),
//! and rates (predicted local contraction factors from the Hessian at
//! a solution, and their empirical counterparts fitted to actual
//! runs).

mod fd;
mod invariance;
mod rates;

pub use fd::{default_fd_step, finite_diff_gradient, finite_diff_hessian, finite_diff_jacobian};
pub use invariance::{
    check_eigenvector_property, check_identities, classify_invariance, dual_map, Classification,
    EigenvectorReport, IdentityReport, CLASSIFY_TOL, GRADIENT_IDENTITY_TOL, HESSIAN_IDENTITY_TOL,
    STATIONARITY_TOL,
};
pub use rates::{
    empirical_rate, empirical_rate_from_errors, predicted_block_rate, predicted_partial_rate,
    predicted_rate, spectral_radius_2x2, BlockRateReport, RateReport, FIT_CEIL, FIT_FLOOR,
    FIT_MIN_POINTS,
};
