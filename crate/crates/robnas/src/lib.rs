//! Toolkit for studying how cell-level architecture design affects robustness.
//!
//! The crate models the 4-node/6-edge cell search space (15625 operation
//! assignments, 6466 after isomorphism reduction), trains small deterministic
//! networks built from those cells, evaluates them under gradient-based and
//! black-box adversarial attacks as well as analytic input corruptions, computes
//! training-free robustness measures (Jacobian Frobenius norm, largest input
//! Hessian eigenvalue), runs tabular architecture search over the collected
//! results, and reads/writes the dataset file schema used to publish them.

pub mod analysis;
pub mod attacks;
pub mod cellspace;
pub mod corruptions;
pub mod datastore;
pub mod exec;
pub mod measures;
pub mod pipeline;
pub mod search;
pub mod tinynet;

pub use cellspace::{Cell, OpKind};
pub use tinynet::{Network, NetworkConfig};


