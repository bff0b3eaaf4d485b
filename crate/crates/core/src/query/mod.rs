//! Conjunctive queries and unions of them: syntax, parsing, evaluation and
//! classification.

mod ast;
mod classify;
pub(crate) mod eval;
mod parser;

pub use ast::{Atom, ConjunctiveQuery, Term, UnionQuery};
pub use classify::{classify, query_to_dc, union_to_dcs, QueryClassification};
pub use eval::{evaluate, holds, witnesses, Valuation};
pub use parser::{parse, parse_constraints, parse_query, Program};
