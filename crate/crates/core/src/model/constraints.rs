use std::collections::BTreeSet;
use std::fmt;
use std::ops::ControlFlow;

use serde::Serialize;

use super::{Database, Tid};
use crate::error::{Error, Result};
use crate::query::eval::for_each_match;
use crate::query::{Atom, Term};

/// `¬∃x̄ (A1 ∧ … ∧ Am)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenialConstraint {
    atoms: Vec<Atom>,
}

impl DenialConstraint {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParams(
                "denial constraint needs at least one atom".into(),
            ));
        }
        Ok(DenialConstraint { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

impl fmt::Display for DenialConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(":- ")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(".")
    }
}

/// A position on the right-hand side of an inclusion dependency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhsTerm {
    /// A variable exported from the left-hand side.
    Exported(String),
    Const(String),
    /// `_`: existentially quantified.
    Existential,
}

/// `∀x̄ (P(x̄) → ∃ȳ P′(x̄′, ȳ))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionDependency {
    lhs: Atom,
    rhs_predicate: String,
    rhs: Vec<RhsTerm>,
}

impl InclusionDependency {
    pub fn new(lhs: Atom, rhs_predicate: &str, rhs: Vec<RhsTerm>) -> Result<Self> {
        let lhs_vars: BTreeSet<&str> = lhs.variables().collect();
        for t in &rhs {
            if let RhsTerm::Exported(v) = t {
                if !lhs_vars.contains(v.as_str()) {
                    return Err(Error::HeadVariableNotInBody(v.clone()));
                }
            }
        }
        Ok(InclusionDependency {
            lhs,
            rhs_predicate: rhs_predicate.to_string(),
            rhs,
        })
    }

    pub fn lhs(&self) -> &Atom {
        &self.lhs
    }

    pub fn rhs_predicate(&self) -> &str {
        &self.rhs_predicate
    }

    pub fn rhs(&self) -> &[RhsTerm] {
        &self.rhs
    }
}

impl fmt::Display for InclusionDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}(", self.lhs, self.rhs_predicate)?;
        for (i, t) in self.rhs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match t {
                RhsTerm::Exported(v) => f.write_str(v)?,
                RhsTerm::Const(c) => write!(f, "{}", Term::Const(c.clone()))?,
                RhsTerm::Existential => f.write_str("_")?,
            }
        }
        f.write_str(").")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    pub dcs: Vec<DenialConstraint>,
    pub inds: Vec<InclusionDependency>,
}

impl ConstraintSet {
    pub fn is_empty(&self) -> bool {
        self.dcs.is_empty() && self.inds.is_empty()
    }

    pub fn check(&self, db: &Database) -> Result<()> {
        let schema = db.schema();
        for dc in &self.dcs {
            dc.atoms.iter().try_for_each(|a| a.check(schema))?;
        }
        for ind in &self.inds {
            ind.lhs.check(schema)?;
            schema.check_arity(&ind.rhs_predicate, ind.rhs.len())?;
        }
        Ok(())
    }

    /// Whether the alive part of `db` satisfies every constraint.
    pub(crate) fn satisfied_on(&self, db: &Database, alive: &dyn Fn(usize) -> bool) -> bool {
        self.dcs.iter().all(|dc| dc_holds_on(dc, db, alive))
            && self.inds.iter().all(|ind| ind_holds_on(ind, db, alive))
    }

    pub fn satisfied_by(&self, db: &Database) -> Result<bool> {
        self.check(db)?;
        Ok(self.satisfied_on(db, &|_| true))
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for dc in &self.dcs {
            writeln!(f, "{dc}")?;
        }
        for ind in &self.inds {
            writeln!(f, "{ind}")?;
        }
        Ok(())
    }
}

fn dc_holds_on(dc: &DenialConstraint, db: &Database, alive: &dyn Fn(usize) -> bool) -> bool {
    let mut binding = Vec::new();
    for_each_match(&dc.atoms, db, alive, &mut binding, &mut |_, _| ControlFlow::Break(()))
        .is_continue()
}

fn rhs_matches(
    ind: &InclusionDependency,
    binding: &[(&str, &str)],
    db: &Database,
    alive: &dyn Fn(usize) -> bool,
) -> bool {
    db.facts(&ind.rhs_predicate).iter().any(|&ix| {
        alive(ix)
            && db.tuple(ix).values.iter().zip(&ind.rhs).all(|(v, t)| match t {
                RhsTerm::Existential => true,
                RhsTerm::Const(c) => c == v,
                RhsTerm::Exported(x) => binding
                    .iter()
                    .rev()
                    .find(|(name, _)| name == x)
                    .is_some_and(|(_, bound)| bound == v),
            })
    })
}

/// Left-hand facts with no matching right-hand fact.
fn ind_unmatched(
    ind: &InclusionDependency,
    db: &Database,
    alive: &dyn Fn(usize) -> bool,
    stop_at_first: bool,
) -> Vec<usize> {
    let mut out = Vec::new();
    let lhs = std::slice::from_ref(&ind.lhs);
    let mut binding = Vec::new();
    let _ = for_each_match(lhs, db, alive, &mut binding, &mut |b, facts| {
        if !rhs_matches(ind, b, db, alive) {
            out.push(facts[0]);
            if stop_at_first {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    out
}

fn ind_holds_on(ind: &InclusionDependency, db: &Database, alive: &dyn Fn(usize) -> bool) -> bool {
    ind_unmatched(ind, db, alive, true).is_empty()
}

pub fn satisfies_dc(db: &Database, dc: &DenialConstraint) -> Result<bool> {
    dc.atoms.iter().try_for_each(|a| a.check(db.schema()))?;
    Ok(dc_holds_on(dc, db, &|_| true))
}

pub fn satisfies_ind(db: &Database, ind: &InclusionDependency) -> Result<bool> {
    ind.lhs.check(db.schema())?;
    db.schema().check_arity(&ind.rhs_predicate, ind.rhs.len())?;
    Ok(ind_holds_on(ind, db, &|_| true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum ConstraintRef {
    Dc(usize),
    Ind(usize),
}

/// A witnessed violation: the facts of one violating valuation of a DC, or a
/// single unmatched left-hand fact of an IND.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub constraint: ConstraintRef,
    pub tids: BTreeSet<Tid>,
}

/// Every violation of `cs` in `db`; empty iff `db ⊨ cs`.
pub fn violations(db: &Database, cs: &ConstraintSet) -> Result<Vec<Violation>> {
    cs.check(db)?;
    let mut out = BTreeSet::new();
    for (i, dc) in cs.dcs.iter().enumerate() {
        for set in dc_violation_positions(dc, db, &|_| true) {
            out.insert(Violation {
                constraint: ConstraintRef::Dc(i),
                tids: db.tids_of(set),
            });
        }
    }
    for (i, ind) in cs.inds.iter().enumerate() {
        for ix in ind_unmatched(ind, db, &|_| true, false) {
            out.insert(Violation {
                constraint: ConstraintRef::Ind(i),
                tids: db.tids_of([ix]),
            });
        }
    }
    Ok(out.into_iter().collect())
}

/// Fact sets of the valuations violating `dc`, deduplicated.
pub(crate) fn dc_violation_positions(
    dc: &DenialConstraint,
    db: &Database,
    alive: &dyn Fn(usize) -> bool,
) -> BTreeSet<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    let mut binding = Vec::new();
    let _ = for_each_match(&dc.atoms, db, alive, &mut binding, &mut |_, facts| {
        out.insert(facts.iter().copied().collect());
        ControlFlow::Continue(())
    });
    out
}
