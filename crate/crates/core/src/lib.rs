//! Randomized evaluation of matrix functions `f(γA)` for sparse `A`.
//!
//! Random walks on the Markov chain induced by `|A|` sample whole rows and
//! columns of `A` at every step, so each walk updates a full row of the
//! accumulator `Q` rather than a single entry.  The estimate is then
//!
//! ```text
//! f(A) ≈ ζ₀ I + ζ₁ A + A Q A
//! ```
//!
//! with specialised variants for the diagonal (`rand_funm_diag`), the action
//! on a vector (`rand_funm_action`) and single entries of the action
//! (`rand_funm_entry`).  The classical one-entry-per-step Monte Carlo method
//! is provided as a baseline (`mc_baseline`), and `oracle` holds exact dense
//! and Krylov references.
//!
//! The `centrality` module maps these estimators onto subgraph centrality,
//! total communicability, the Estrada index and Katz centrality.

// `!(x > 0.0)` is used deliberately to reject NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centrality;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod graphgen;
pub mod oracle;
pub mod series;
pub mod sparsemat;
pub mod walker;

pub use error::{Error, Result};
pub use estimators::{
    mc_baseline, rand_funm, rand_funm_action, rand_funm_diag, rand_funm_diag_entries, rand_funm_entry, Accumulation,
    EstimatorOptions, FunmResult, McBudget, McMode, Payload, WalkStats,
};
pub use series::MatrixFunction;
pub use sparsemat::SparseMatrix;
pub use walker::{TransitionModel, WalkConfig};

/// Library version embedded in every report artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
