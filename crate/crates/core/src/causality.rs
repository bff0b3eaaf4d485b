//! Actual causes, contingency sets and responsibility for Boolean queries,
//! optionally under integrity constraints.
//!
//! A tuple τ is an actual cause with contingency set Γ when
//! (a) D∖Γ satisfies the query (and the constraints, if any) and
//! (b) D∖(Γ∪{τ}) falsifies the query (while still satisfying the constraints).
//! Responsibility is 1/(1+|Γ|) for a smallest such Γ, and 0 when none exists.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use num_traits::Zero;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{ConstraintSet, Database, Tid};
use crate::query::eval::witness_positions;
use crate::query::UnionQuery;
use crate::rational::{self, Rational, RationalJson};

/// Default bound on the number of candidate sets examined per tuple.
pub const DEFAULT_MAX_CANDIDATES: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ContingencySet {
    pub subject: Tid,
    pub tids: BTreeSet<Tid>,
}

impl ContingencySet {
    pub fn len(&self) -> usize {
        self.tids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tids.is_empty()
    }
}

impl Serialize for ContingencySet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.tids.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauseReport {
    pub tid: Tid,
    pub is_actual: bool,
    pub is_counterfactual: bool,
    /// Inclusion-minimal admissible contingency sets, smallest first.
    pub minimal_contingencies: Vec<ContingencySet>,
    pub responsibility: Rational,
}

impl Serialize for CauseReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CauseReport", 5)?;
        st.serialize_field("tid", &self.tid)?;
        st.serialize_field("is_actual", &self.is_actual)?;
        st.serialize_field("is_counterfactual", &self.is_counterfactual)?;
        st.serialize_field("minimal_contingencies", &self.minimal_contingencies)?;
        st.serialize_field("responsibility", &RationalJson(self.responsibility.clone()))?;
        st.end()
    }
}

impl CauseReport {
    /// Builds a report from the minimal contingency sets of `tid`.
    pub fn from_contingencies(tid: Tid, mut sets: Vec<ContingencySet>) -> Self {
        sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.tids.cmp(&b.tids)));
        sets.dedup();
        let responsibility = match sets.first() {
            Some(smallest) => rational::ratio(1, smallest.len() as i64 + 1),
            None => Rational::zero(),
        };
        CauseReport {
            tid,
            is_actual: !sets.is_empty(),
            is_counterfactual: sets.first().is_some_and(ContingencySet::is_empty),
            minimal_contingencies: sets,
            responsibility,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContingencyMode {
    /// All inclusion-minimal admissible sets.
    Minimal,
    /// Only the admissible sets of smallest cardinality.
    Minimum,
}

struct Search<'a> {
    db: &'a Database,
    ics: Option<&'a ConstraintSet>,
    /// Minimal witnesses, as position sets.
    witnesses: Vec<FixedBitSet>,
    /// Union of the minimal witnesses.
    relevant: BTreeSet<usize>,
    max_candidates: usize,
}

impl<'a> Search<'a> {
    fn new(db: &'a Database, q: &UnionQuery, ics: Option<&'a ConstraintSet>) -> Result<Self> {
        let sets = witness_positions(q, db)?;
        if sets.is_empty() {
            return Err(Error::QueryNotTrue);
        }
        let mut sets: Vec<BTreeSet<usize>> = sets;
        sets.sort_by_key(BTreeSet::len);
        let mut minimal: Vec<BTreeSet<usize>> = Vec::new();
        for s in sets {
            if !minimal.iter().any(|m| m.is_subset(&s)) {
                minimal.push(s);
            }
        }
        let relevant = minimal.iter().flatten().copied().collect();
        let witnesses = minimal
            .iter()
            .map(|s| {
                let mut b = FixedBitSet::with_capacity(db.len());
                b.extend(s.iter().copied());
                b
            })
            .collect();
        let ics = ics.filter(|cs| !cs.is_empty());
        if let Some(cs) = ics {
            cs.check(db)?;
            if !cs.satisfied_on(db, &|_| true) {
                return Err(Error::InconsistentInput);
            }
        }
        Ok(Search {
            db,
            ics,
            witnesses,
            relevant,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        })
    }

    fn query_holds(&self, removed: &FixedBitSet) -> bool {
        self.witnesses.iter().any(|w| w.is_disjoint(removed))
    }

    fn constraints_hold(&self, removed: &FixedBitSet) -> bool {
        match self.ics {
            None => true,
            Some(cs) => cs.satisfied_on(self.db, &|ix| !removed.contains(ix)),
        }
    }

    /// Levelwise search over subsets of the pool, smallest first. Sets on
    /// which the query already fails are not extended, since removing more
    /// tuples cannot make a monotone query true again.
    fn contingencies(&self, tau: usize, mode: ContingencyMode) -> Result<Vec<FixedBitSet>> {
        if !self.relevant.contains(&tau) {
            return Ok(Vec::new());
        }
        let pool: Vec<usize> = match self.ics {
            None => self.relevant.iter().copied().filter(|&ix| ix != tau).collect(),
            Some(_) => (0..self.db.len()).filter(|&ix| ix != tau).collect(),
        };
        let mut found: Vec<FixedBitSet> = Vec::new();
        let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
        let mut examined = 0usize;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for members in frontier {
                examined += 1;
                if examined > self.max_candidates {
                    return Err(Error::ExplosionGuard {
                        cap: self.max_candidates,
                    });
                }
                let mut removed = FixedBitSet::with_capacity(self.db.len());
                removed.extend(members.iter().map(|&p| pool[p]));
                if found.iter().any(|f| f.is_subset(&removed)) {
                    continue;
                }
                if !self.query_holds(&removed) {
                    continue;
                }
                let condition_a = self.constraints_hold(&removed);
                let mut with_tau = removed.clone();
                with_tau.insert(tau);
                if condition_a
                    && !self.query_holds(&with_tau)
                    && self.constraints_hold(&with_tau)
                {
                    found.push(removed);
                    continue;
                }
                let start = members.last().map_or(0, |&l| l + 1);
                for p in start..pool.len() {
                    let mut grown = members.clone();
                    grown.push(p);
                    next.push(grown);
                }
            }
            if mode == ContingencyMode::Minimum && !found.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(found)
    }

    fn sets_for(&self, tau: usize, mode: ContingencyMode) -> Result<Vec<ContingencySet>> {
        let subject = self.db.tuple(tau).tid.clone();
        Ok(self
            .contingencies(tau, mode)?
            .into_iter()
            .map(|b| ContingencySet {
                subject: subject.clone(),
                tids: self.db.tids_of(b.ones()),
            })
            .collect())
    }

    fn report(&self, tau: usize) -> Result<CauseReport> {
        let tid = self.db.tuple(tau).tid.clone();
        Ok(CauseReport::from_contingencies(
            tid,
            self.sets_for(tau, ContingencyMode::Minimal)?,
        ))
    }
}

/// Whether removing `tid` alone falsifies the (true) query.
pub fn is_counterfactual_cause(db: &Database, q: &UnionQuery, tid: &Tid) -> Result<bool> {
    let search = Search::new(db, q, None)?;
    let tau = db.require(tid)?;
    let mut removed = FixedBitSet::with_capacity(db.len());
    removed.insert(tau);
    Ok(!search.query_holds(&removed))
}

/// One report per tuple of some minimal witness, sorted by tid. Every other
/// tuple has responsibility 0 and is omitted.
pub fn find_causes(
    db: &Database,
    q: &UnionQuery,
    ics: Option<&ConstraintSet>,
) -> Result<Vec<CauseReport>> {
    find_causes_capped(db, q, ics, DEFAULT_MAX_CANDIDATES)
}

pub fn find_causes_capped(
    db: &Database,
    q: &UnionQuery,
    ics: Option<&ConstraintSet>,
    max_candidates: usize,
) -> Result<Vec<CauseReport>> {
    let mut search = Search::new(db, q, ics)?;
    search.max_candidates = max_candidates;
    let candidates: Vec<usize> = search.relevant.iter().copied().collect();
    let mut reports = candidates
        .par_iter()
        .map(|&tau| search.report(tau))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| a.tid.cmp(&b.tid));
    Ok(reports)
}

pub fn responsibility(
    db: &Database,
    q: &UnionQuery,
    tid: &Tid,
    ics: Option<&ConstraintSet>,
) -> Result<Rational> {
    let sets = contingency_sets(db, q, tid, ics, ContingencyMode::Minimum)?;
    Ok(match sets.first() {
        Some(s) => rational::ratio(1, s.len() as i64 + 1),
        None => Rational::zero(),
    })
}

/// Admissible contingency sets of `tid`, smallest first.
pub fn contingency_sets(
    db: &Database,
    q: &UnionQuery,
    tid: &Tid,
    ics: Option<&ConstraintSet>,
    mode: ContingencyMode,
) -> Result<Vec<ContingencySet>> {
    let search = Search::new(db, q, ics)?;
    let tau = db.require(tid)?;
    let mut sets = search.sets_for(tau, mode)?;
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.tids.cmp(&b.tids)));
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_database, PredicateDecl, RawTuple, Schema};
    use crate::query::parse_query;
    use crate::rational::ratio;

    fn example1() -> Database {
        let schema = Schema::new(vec![
            PredicateDecl::positional("R", 2),
            PredicateDecl::positional("S", 1),
        ])
        .unwrap();
        validate_database(
            &schema,
            vec![
                RawTuple::new("R", ["a", "b"]),
                RawTuple::new("R", ["c", "d"]),
                RawTuple::new("R", ["b", "b"]),
                RawTuple::new("S", ["a"]),
                RawTuple::new("S", ["c"]),
                RawTuple::new("S", ["b"]),
            ],
        )
        .unwrap()
    }

    fn q1() -> UnionQuery {
        parse_query("q :- S(X), R(X, Y), S(Y).").unwrap()
    }

    fn tids(ts: &[&str]) -> BTreeSet<Tid> {
        ts.iter().map(|&s| Tid::from(s)).collect()
    }

    #[test]
    fn counterfactual() {
        let db = example1();
        assert!(is_counterfactual_cause(&db, &q1(), &"t6".into()).unwrap());
        assert!(!is_counterfactual_cause(&db, &q1(), &"t1".into()).unwrap());
        assert!(matches!(
            is_counterfactual_cause(&db, &q1(), &"t99".into()),
            Err(Error::UnknownTid(_))
        ));
    }

    #[test]
    fn example_one_responsibilities() {
        let db = example1();
        let reports = find_causes(&db, &q1(), None).unwrap();
        let got: Vec<(&str, Rational)> = reports
            .iter()
            .map(|r| (r.tid.as_str(), r.responsibility.clone()))
            .collect();
        assert_eq!(
            got,
            vec![
                ("t1", ratio(1, 2)),
                ("t3", ratio(1, 2)),
                ("t4", ratio(1, 2)),
                ("t6", ratio(1, 1)),
            ]
        );
        assert!(reports[3].is_counterfactual);
        assert_eq!(responsibility(&db, &q1(), &"t2".into(), None).unwrap(), ratio(0, 1));
    }

    #[test]
    fn contingencies_of_r_a_b() {
        let db = example1();
        let minimal = contingency_sets(&db, &q1(), &"t1".into(), None, ContingencyMode::Minimal).unwrap();
        let sets: Vec<BTreeSet<Tid>> = minimal.iter().map(|c| c.tids.clone()).collect();
        assert_eq!(sets, vec![tids(&["t3"])]);
        let none = contingency_sets(&db, &q1(), &"t6".into(), None, ContingencyMode::Minimal).unwrap();
        assert_eq!(none.len(), 1);
        assert!(none[0].is_empty());
    }

    #[test]
    fn false_query_is_an_error() {
        let db = example1();
        let q = parse_query("q :- R(X, X), S(d).").unwrap();
        assert!(matches!(find_causes(&db, &q, None), Err(Error::QueryNotTrue)));
        let open = parse_query("q(X) :- S(X).").unwrap();
        assert!(matches!(find_causes(&db, &open, None), Err(Error::NonBooleanQuery)));
    }

    #[test]
    fn inconsistent_input_rejected() {
        let db = example1();
        let cs = crate::query::parse_constraints(":- S(X), R(X, Y).").unwrap();
        assert!(matches!(find_causes(&db, &q1(), Some(&cs)), Err(Error::InconsistentInput)));
    }

    #[test]
    fn candidate_cap() {
        let db = example1();
        assert!(matches!(
            find_causes_capped(&db, &q1(), None, 1),
            Err(Error::ExplosionGuard { cap: 1 })
        ));
    }
}
