//! Manufactured problems, error functionals and experiment drivers.

pub mod dual;
pub mod errors;
pub mod experiments;
pub mod problems;

pub use dual::Dual2;
pub use errors::{
    compute_errors, compute_errors_filtered, eoc, layer_excluded_errors, layer_mask, log_log_slope, mean_final_eoc, Eoc,
    ErrorRow,
};
pub use experiments::*;
pub use problems::{MeshSpec, Problem, PROBLEM_NAMES};
