//! Schemas, database instances and integrity constraints.

mod constraints;
mod database;
pub mod io;
mod schema;
mod tid;

pub use constraints::{
    satisfies_dc, satisfies_ind, violations, ConstraintRef, ConstraintSet, DenialConstraint,
    InclusionDependency, RhsTerm, Violation,
};
pub(crate) use constraints::dc_violation_positions;
pub use database::{validate_database, Database, RawTuple, Tuple};
pub use schema::{PredicateDecl, Schema};
pub use tid::Tid;
