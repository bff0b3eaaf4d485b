//! Subset and cardinality repairs under denial constraints, consistent query
//! answering, and causes read off the repairs of κ(Q).
//!
//! Repairs are complements of minimal hitting sets of the conflict
//! hypergraph, whose hyperedges are the tuple sets of violating valuations.

use std::collections::{BTreeMap, BTreeSet};

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::causality::{CauseReport, ContingencySet};
use crate::error::{Error, Result};
use crate::model::{dc_violation_positions, Database, DenialConstraint, Tid};
use crate::query::{evaluate, union_to_dcs, UnionQuery};

pub const DEFAULT_MAX_REPAIRS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictHypergraph {
    pub vertices: BTreeSet<Tid>,
    /// Inclusion-minimal conflicting tuple sets, sorted.
    pub edges: Vec<BTreeSet<Tid>>,
}

/// Hyperedges by position; subsumed edges removed.
fn conflict_edges(db: &Database, dcs: &[DenialConstraint]) -> Result<Vec<BTreeSet<usize>>> {
    for dc in dcs {
        dc.atoms().iter().try_for_each(|a| a.check(db.schema()))?;
    }
    let mut all: Vec<BTreeSet<usize>> = dcs
        .iter()
        .flat_map(|dc| dc_violation_positions(dc, db, &|_| true))
        .collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all.dedup();
    let mut edges: Vec<BTreeSet<usize>> = Vec::new();
    for e in all {
        if !edges.iter().any(|k| k.is_subset(&e)) {
            edges.push(e);
        }
    }
    Ok(edges)
}

pub fn conflict_hypergraph(db: &Database, dcs: &[DenialConstraint]) -> Result<ConflictHypergraph> {
    let mut edges: Vec<BTreeSet<Tid>> = conflict_edges(db, dcs)?
        .into_iter()
        .map(|e| db.tids_of(e))
        .collect();
    edges.sort();
    Ok(ConflictHypergraph {
        vertices: db.tids(),
        edges,
    })
}

/// All inclusion-minimal hitting sets of `edges` over vertices `0..n`.
///
/// Depth-first: branch on the vertices of an uncovered edge, keep only
/// partial sets in which every member still hits some edge alone, and
/// exclude vertices already branched on from later siblings so each set is
/// produced once.
pub fn minimal_hitting_sets(
    edges: &[BTreeSet<usize>],
    n: usize,
    cap: usize,
) -> Result<Vec<BTreeSet<usize>>> {
    let edges: Vec<FixedBitSet> = edges
        .iter()
        .map(|e| {
            let mut b = FixedBitSet::with_capacity(n);
            b.extend(e.iter().copied());
            b
        })
        .collect();
    let mut cand = FixedBitSet::with_capacity(n);
    for e in &edges {
        cand.union_with(e);
    }
    let mut out = Vec::new();
    let mut current = FixedBitSet::with_capacity(n);
    mmcs(&edges, &mut current, &mut cand, &mut out, cap)?;
    let mut out: Vec<BTreeSet<usize>> = out;
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

fn every_member_critical(edges: &[FixedBitSet], current: &FixedBitSet) -> bool {
    current.ones().all(|u| {
        edges.iter().any(|e| {
            e.contains(u) && e.intersection(current).nth(1).is_none()
        })
    })
}

fn mmcs(
    edges: &[FixedBitSet],
    current: &mut FixedBitSet,
    cand: &mut FixedBitSet,
    out: &mut Vec<BTreeSet<usize>>,
    cap: usize,
) -> Result<()> {
    // uncovered edge with the fewest candidate vertices
    let pick = edges
        .iter()
        .filter(|e| e.is_disjoint(current))
        .min_by_key(|e| e.intersection(cand).count());
    let Some(edge) = pick else {
        if out.len() == cap {
            return Err(Error::ExplosionGuard { cap });
        }
        out.push(current.ones().collect());
        return Ok(());
    };
    let branch: Vec<usize> = edge.intersection(cand).collect();
    for &v in &branch {
        cand.set(v, false);
    }
    for &v in &branch {
        current.insert(v);
        if every_member_critical(edges, current) {
            mmcs(edges, current, cand, out, cap)?;
        }
        current.set(v, false);
        cand.insert(v);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RepairKind {
    S,
    C,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Repair {
    /// D ∖ D′.
    pub removed: BTreeSet<Tid>,
}

impl Repair {
    pub fn instance(&self, db: &Database) -> Database {
        db.without(&self.removed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepairSet {
    pub kind: RepairKind,
    pub count: usize,
    /// Sorted by size of the removed set, then by tids.
    pub repairs: Vec<Repair>,
}

impl RepairSet {
    fn new(kind: RepairKind, mut repairs: Vec<Repair>) -> Self {
        repairs.sort_by(|a, b| {
            a.removed
                .len()
                .cmp(&b.removed.len())
                .then_with(|| a.removed.cmp(&b.removed))
        });
        RepairSet {
            kind,
            count: repairs.len(),
            repairs,
        }
    }

    pub fn instances(&self, db: &Database) -> Vec<Database> {
        self.repairs.iter().map(|r| r.instance(db)).collect()
    }
}

fn removal_sets(db: &Database, dcs: &[DenialConstraint], cap: usize) -> Result<Vec<BTreeSet<usize>>> {
    let edges = conflict_edges(db, dcs)?;
    minimal_hitting_sets(&edges, db.len(), cap)
}

pub fn s_repairs(db: &Database, dcs: &[DenialConstraint]) -> Result<RepairSet> {
    s_repairs_capped(db, dcs, DEFAULT_MAX_REPAIRS)
}

pub fn s_repairs_capped(db: &Database, dcs: &[DenialConstraint], cap: usize) -> Result<RepairSet> {
    let sets = removal_sets(db, dcs, cap)?;
    Ok(RepairSet::new(
        RepairKind::S,
        sets.into_iter()
            .map(|s| Repair {
                removed: db.tids_of(s),
            })
            .collect(),
    ))
}

pub fn c_repairs(db: &Database, dcs: &[DenialConstraint]) -> Result<RepairSet> {
    c_repairs_capped(db, dcs, DEFAULT_MAX_REPAIRS)
}

/// The S-repairs of maximum cardinality.
pub fn c_repairs_capped(db: &Database, dcs: &[DenialConstraint], cap: usize) -> Result<RepairSet> {
    let s = s_repairs_capped(db, dcs, cap)?;
    let fewest = s.repairs.iter().map(|r| r.removed.len()).min().unwrap_or(0);
    Ok(RepairSet::new(
        RepairKind::C,
        s.repairs
            .into_iter()
            .filter(|r| r.removed.len() == fewest)
            .collect(),
    ))
}

pub fn repairs(db: &Database, dcs: &[DenialConstraint], kind: RepairKind, cap: usize) -> Result<RepairSet> {
    match kind {
        RepairKind::S => s_repairs_capped(db, dcs, cap),
        RepairKind::C => c_repairs_capped(db, dcs, cap),
    }
}

/// Answers true in every repair of the given kind.
pub fn consistent_answers(
    db: &Database,
    dcs: &[DenialConstraint],
    q: &UnionQuery,
    kind: RepairKind,
) -> Result<BTreeSet<Vec<String>>> {
    consistent_answers_capped(db, dcs, q, kind, DEFAULT_MAX_REPAIRS)
}

pub fn consistent_answers_capped(
    db: &Database,
    dcs: &[DenialConstraint],
    q: &UnionQuery,
    kind: RepairKind,
    cap: usize,
) -> Result<BTreeSet<Vec<String>>> {
    q.check(db.schema())?;
    let set = repairs(db, dcs, kind, cap)?;
    let mut answers: Option<BTreeSet<Vec<String>>> = None;
    for r in &set.repairs {
        let here = evaluate(q, &r.instance(db))?;
        answers = Some(match answers {
            None => here,
            Some(acc) => acc.intersection(&here).cloned().collect(),
        });
    }
    Ok(answers.unwrap_or_default())
}

/// Causes of a true Boolean query obtained from the S-repairs w.r.t. κ(Q):
/// τ has minimal contingency Γ iff D∖(Γ∪{τ}) is an S-repair. The smallest
/// such Γ comes from a C-repair whenever τ occurs in one.
pub fn causes_via_repairs(db: &Database, q: &UnionQuery) -> Result<Vec<CauseReport>> {
    causes_via_repairs_capped(db, q, DEFAULT_MAX_REPAIRS)
}

pub fn causes_via_repairs_capped(db: &Database, q: &UnionQuery, cap: usize) -> Result<Vec<CauseReport>> {
    q.require_boolean()?;
    let dcs = union_to_dcs(q)?;
    let edges = conflict_edges(db, &dcs)?;
    if edges.is_empty() {
        return Err(Error::QueryNotTrue);
    }
    let removals = minimal_hitting_sets(&edges, db.len(), cap)?;
    let mut per_tuple: BTreeMap<usize, Vec<ContingencySet>> = edges
        .iter()
        .flatten()
        .map(|&ix| (ix, Vec::new()))
        .collect();
    for h in &removals {
        for &tau in h {
            let subject = db.tuple(tau).tid.clone();
            let gamma = h.iter().copied().filter(|&ix| ix != tau);
            per_tuple.entry(tau).or_default().push(ContingencySet {
                subject,
                tids: db.tids_of(gamma),
            });
        }
    }
    let mut reports: Vec<CauseReport> = per_tuple
        .into_iter()
        .map(|(tau, sets)| CauseReport::from_contingencies(db.tuple(tau).tid.clone(), sets))
        .collect();
    reports.sort_by(|a, b| a.tid.cmp(&b.tid));
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_database, PredicateDecl, RawTuple, Schema};
    use crate::query::{parse_constraints, parse_query};

    fn example5() -> (Database, Vec<DenialConstraint>) {
        let schema = Schema::new(vec![
            PredicateDecl::positional("P", 1),
            PredicateDecl::positional("Q", 2),
            PredicateDecl::positional("R", 2),
        ])
        .unwrap();
        let db = validate_database(
            &schema,
            vec![
                RawTuple::new("P", ["a"]),
                RawTuple::new("P", ["e"]),
                RawTuple::new("Q", ["a", "b"]),
                RawTuple::new("R", ["a", "c"]),
            ],
        )
        .unwrap();
        let cs = parse_constraints(":- P(X), Q(X, Y).\n:- P(X), R(X, Y).").unwrap();
        (db, cs.dcs)
    }

    fn tids(ts: &[&str]) -> BTreeSet<Tid> {
        ts.iter().map(|&s| Tid::from(s)).collect()
    }

    #[test]
    fn example_five_repairs() {
        let (db, dcs) = example5();
        let g = conflict_hypergraph(&db, &dcs).unwrap();
        assert_eq!(g.edges, vec![tids(&["t1", "t3"]), tids(&["t1", "t4"])]);

        let s = s_repairs(&db, &dcs).unwrap();
        let removed: Vec<BTreeSet<Tid>> = s.repairs.iter().map(|r| r.removed.clone()).collect();
        assert_eq!(removed, vec![tids(&["t1"]), tids(&["t3", "t4"])]);
        let d2 = s.repairs[1].instance(&db);
        assert_eq!(d2.tids(), tids(&["t1", "t2"]));

        let c = c_repairs(&db, &dcs).unwrap();
        assert_eq!(c.count, 1);
        assert_eq!(c.repairs[0].removed, tids(&["t1"]));
    }

    #[test]
    fn consistent_db_is_its_own_repair() {
        let (db, _) = example5();
        let dcs = parse_constraints(":- Q(X, X).").unwrap().dcs;
        let s = s_repairs(&db, &dcs).unwrap();
        assert_eq!(s.count, 1);
        assert!(s.repairs[0].removed.is_empty());
        let q = parse_query("q(X) :- P(X).").unwrap();
        assert_eq!(
            consistent_answers(&db, &dcs, &q, RepairKind::S).unwrap(),
            evaluate(&q, &db).unwrap()
        );
    }

    #[test]
    fn consistent_answers_example_five() {
        let (db, dcs) = example5();
        let q = parse_query("q(X) :- P(X).").unwrap();
        let ans = consistent_answers(&db, &dcs, &q, RepairKind::S).unwrap();
        assert_eq!(ans, BTreeSet::from([vec!["e".to_string()]]));
        let q = parse_query("q(X, Y) :- Q(X, Y).").unwrap();
        assert!(consistent_answers(&db, &dcs, &q, RepairKind::S).unwrap().is_empty());
        // the only C-repair keeps Q(a,b)
        assert_eq!(consistent_answers(&db, &dcs, &q, RepairKind::C).unwrap().len(), 1);
    }

    #[test]
    fn hitting_sets_small() {
        let edges = vec![BTreeSet::from([0, 1]), BTreeSet::from([1, 2]), BTreeSet::from([2, 3])];
        let hs = minimal_hitting_sets(&edges, 4, 100).unwrap();
        assert_eq!(
            hs,
            vec![BTreeSet::from([0, 2]), BTreeSet::from([1, 2]), BTreeSet::from([1, 3])]
        );
        assert!(matches!(
            minimal_hitting_sets(&edges, 4, 2),
            Err(Error::ExplosionGuard { cap: 2 })
        ));
        assert_eq!(minimal_hitting_sets(&[], 4, 1).unwrap(), vec![BTreeSet::new()]);
    }

    #[test]
    fn single_witness_members_are_counterfactual() {
        let (db, _) = example5();
        let q = parse_query("q :- P(X), Q(X, Y).").unwrap();
        let reports = causes_via_repairs(&db, &q).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.is_counterfactual && r.responsibility == crate::rational::one()));
    }
}
