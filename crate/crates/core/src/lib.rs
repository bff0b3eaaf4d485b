//! Explanations for query answers over small relational databases.
//!
//! The crate computes actual causes and responsibility (optionally under
//! integrity constraints), causal effects over query lineage, S- and
//! C-repairs with consistent query answering, and Shapley/Banzhaf scores,
//! exactly with rational arithmetic or by seeded Monte Carlo sampling.

pub mod causality;
pub mod error;
pub mod lineage;
pub mod model;
pub mod query;
pub mod rational;
pub mod repairs;
pub mod scores;

pub use error::{Error, Result};
pub use model::{Database, Tid};
