//! Brute-force references for testing: exhaustive canonicalization,
//! explicit quantum realizations and exact classical models.

pub mod canon;
pub mod classical;
pub mod realization;

pub use canon::oracle_canon;
pub use classical::{
    classical_optimum, oracle_classical_feasible, oracle_classical_support_feasible, rationalize,
};
pub use realization::{oracle_moment_matrix, ExplicitRealization};
