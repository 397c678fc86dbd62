//! Keeps the README's library example honest: this is the same code,
//! and it has to keep passing.

use scipi::analysis::predicted_rate;
use scipi::data::gen_spectrum_matrix;
use scipi::linalg::Rng;
use scipi::problems::{Quadratic, ScaleInvariantProblem};
use scipi::solvers::{sci_pi, SolverConfig};

use ndarray::Array1;

#[test]
fn the_readme_example_runs_as_printed() {
    let ev = Array1::from_vec(vec![1.0, 0.9, 0.5, 0.25]);
    let a = gen_spectrum_matrix(7, &ev).unwrap();
    let p = Quadratic::new(a).unwrap();
    let x0 = Rng::new(8).unit_sphere(p.dim());
    let res = sci_pi(&p, &x0, &SolverConfig::default()).unwrap();
    let rate = predicted_rate(&p, &res.x).unwrap();
    assert!(res.converged && rate.condition_ok);
    assert!((rate.rho_predicted.unwrap() - 0.81).abs() < 1e-12);
}
