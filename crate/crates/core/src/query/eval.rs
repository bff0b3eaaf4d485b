//! Nested-loop evaluation of conjunctive queries with backtracking.
//!
//! Every entry point takes an `alive` filter so the same engine evaluates
//! queries and constraints over subinstances without copying the database.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use super::ast::{Atom, Term, UnionQuery};
use crate::error::Result;
use crate::model::{Database, Tid};

pub(crate) type Binding<'a> = Vec<(&'a str, &'a str)>;

fn lookup<'a>(binding: &Binding<'a>, var: &str) -> Option<&'a str> {
    binding.iter().rev().find(|(v, _)| *v == var).map(|(_, c)| *c)
}

/// Calls `visit` for every homomorphism from `atoms` into the alive facts of
/// `db`, passing the binding and the matched fact per atom.
pub(crate) fn for_each_match<'a, F>(
    atoms: &'a [Atom],
    db: &'a Database,
    alive: &dyn Fn(usize) -> bool,
    binding: &mut Binding<'a>,
    visit: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&Binding<'a>, &[usize]) -> ControlFlow<()>,
{
    let mut matched = Vec::with_capacity(atoms.len());
    descend(atoms, db, alive, binding, &mut matched, visit)
}

fn descend<'a, F>(
    atoms: &'a [Atom],
    db: &'a Database,
    alive: &dyn Fn(usize) -> bool,
    binding: &mut Binding<'a>,
    matched: &mut Vec<usize>,
    visit: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&Binding<'a>, &[usize]) -> ControlFlow<()>,
{
    let Some(atom) = atoms.get(matched.len()) else {
        return visit(binding, matched);
    };
    'facts: for &ix in db.facts(&atom.predicate) {
        if !alive(ix) {
            continue;
        }
        let values = &db.tuple(ix).values;
        if values.len() != atom.terms.len() {
            continue;
        }
        let mark = binding.len();
        for (term, value) in atom.terms.iter().zip(values) {
            let ok = match term {
                Term::Const(c) => c == value,
                Term::Var(v) => match lookup(binding, v) {
                    Some(bound) => bound == value,
                    None => {
                        binding.push((v.as_str(), value.as_str()));
                        true
                    }
                },
            };
            if !ok {
                binding.truncate(mark);
                continue 'facts;
            }
        }
        matched.push(ix);
        let flow = descend(atoms, db, alive, binding, matched, visit);
        matched.pop();
        binding.truncate(mark);
        flow?;
    }
    ControlFlow::Continue(())
}

fn everything(_: usize) -> bool {
    true
}

/// Answers of `q` on `db`; a true Boolean query yields `{()}`.
pub fn evaluate(q: &UnionQuery, db: &Database) -> Result<BTreeSet<Vec<String>>> {
    q.check(db.schema())?;
    let mut answers = BTreeSet::new();
    for d in q.disjuncts() {
        let mut binding = Vec::new();
        let _ = for_each_match(&d.body, db, &everything, &mut binding, &mut |b, _| {
            let row = d
                .head
                .iter()
                .map(|h| lookup(b, h).expect("safe rule").to_string())
                .collect();
            answers.insert(row);
            ControlFlow::Continue(())
        });
    }
    Ok(answers)
}

/// One way of satisfying a disjunct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Valuation {
    pub disjunct: usize,
    pub binding: BTreeMap<String, String>,
    pub witness: BTreeSet<Tid>,
}

/// All valuations, over every disjunct, that produce `answer`.
pub fn witnesses(q: &UnionQuery, db: &Database, answer: &[String]) -> Result<Vec<Valuation>> {
    q.check(db.schema())?;
    let grounded = q.instantiate(answer)?;
    let mut out = BTreeSet::new();
    for (i, (open, d)) in q.disjuncts().iter().zip(grounded.disjuncts()).enumerate() {
        let mut binding = Vec::new();
        let _ = for_each_match(&d.body, db, &everything, &mut binding, &mut |b, facts| {
            let mut map: BTreeMap<String, String> = b
                .iter()
                .map(|(v, c)| (v.to_string(), c.to_string()))
                .collect();
            for (h, c) in open.head.iter().zip(answer) {
                map.insert(h.clone(), c.clone());
            }
            out.insert(Valuation {
                disjunct: i,
                binding: map,
                witness: db.tids_of(facts.iter().copied()),
            });
            ControlFlow::Continue(())
        });
    }
    Ok(out.into_iter().collect())
}

/// Witness position sets of a Boolean query, deduplicated, in discovery order.
pub(crate) fn witness_positions(q: &UnionQuery, db: &Database) -> Result<Vec<BTreeSet<usize>>> {
    q.require_boolean()?;
    q.check(db.schema())?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for d in q.disjuncts() {
        let mut binding = Vec::new();
        let _ = for_each_match(&d.body, db, &everything, &mut binding, &mut |_, facts| {
            let set: BTreeSet<usize> = facts.iter().copied().collect();
            if seen.insert(set.clone()) {
                out.push(set);
            }
            ControlFlow::Continue(())
        });
    }
    Ok(out)
}

/// Per answer, the witness position sets that produce it.
pub(crate) fn answers_with_witnesses(
    q: &UnionQuery,
    db: &Database,
) -> Result<BTreeMap<Vec<String>, BTreeSet<BTreeSet<usize>>>> {
    q.check(db.schema())?;
    let mut out: BTreeMap<Vec<String>, BTreeSet<BTreeSet<usize>>> = BTreeMap::new();
    for d in q.disjuncts() {
        let mut binding = Vec::new();
        let _ = for_each_match(&d.body, db, &everything, &mut binding, &mut |b, facts| {
            let row = d
                .head
                .iter()
                .map(|h| lookup(b, h).expect("safe rule").to_string())
                .collect();
            out.entry(row)
                .or_default()
                .insert(facts.iter().copied().collect());
            ControlFlow::Continue(())
        });
    }
    Ok(out)
}

/// Whether the Boolean query holds on the alive part of `db`.
pub(crate) fn holds_on(q: &UnionQuery, db: &Database, alive: &dyn Fn(usize) -> bool) -> bool {
    q.disjuncts().iter().any(|d| {
        let mut binding = Vec::new();
        for_each_match(&d.body, db, alive, &mut binding, &mut |_, _| ControlFlow::Break(()))
            .is_break()
    })
}

/// Whether a Boolean query is true in `db`.
pub fn holds(q: &UnionQuery, db: &Database) -> Result<bool> {
    q.require_boolean()?;
    q.check(db.schema())?;
    Ok(holds_on(q, db, &everything))
}
