//! Data in and data made up: file loaders for dense CSV and Matrix Market
//! files, seeded generators for synthetic instances with known ground truth,
//! and the small descriptor strings the CLI uses to name built-in datasets.

mod descriptor;
mod generators;
mod loaders;

pub use descriptor::Descriptor;
pub use generators::{
    gen_gmm_data, gen_ica_data, gen_lowrank_nonneg, gen_mixture_design, gen_spectrum_matrix,
    GmmData, GmmGroundTruth, IcaData, LowRankData,
};
pub use loaders::{load_dense_csv, load_matrix_market, MAX_ENTRIES};
