use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::{ConjunctiveQuery, UnionQuery};
use crate::error::{Error, Result};
use crate::model::DenialConstraint;

/// Syntactic shape of a Boolean conjunctive query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryClassification {
    pub hierarchical: bool,
    pub self_join_free: bool,
    /// Existential variable → indices of the body atoms mentioning it.
    pub atoms_of: BTreeMap<String, BTreeSet<usize>>,
}

impl QueryClassification {
    /// Whether exact Shapley values are known to be polynomial for this query.
    /// Only claimed for self-join-free queries.
    pub fn shapley_tractable(&self) -> Option<bool> {
        self.self_join_free.then_some(self.hierarchical)
    }
}

pub fn classify(q: &ConjunctiveQuery) -> Result<QueryClassification> {
    if !q.is_boolean() {
        return Err(Error::NonBooleanQuery);
    }
    let mut atoms_of: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (i, atom) in q.body.iter().enumerate() {
        for v in atom.variables() {
            atoms_of.entry(v.to_string()).or_default().insert(i);
        }
    }
    let sets: Vec<&BTreeSet<usize>> = atoms_of.values().collect();
    let hierarchical = sets.iter().enumerate().all(|(i, a)| {
        sets[i + 1..]
            .iter()
            .all(|b| a.is_subset(b) || b.is_subset(a) || a.is_disjoint(b))
    });
    let mut predicates = BTreeSet::new();
    let self_join_free = q.body.iter().all(|a| predicates.insert(a.predicate.as_str()));
    Ok(QueryClassification {
        hierarchical,
        self_join_free,
        atoms_of,
    })
}

/// κ(Q): the denial constraint forbidding the body of a Boolean query.
pub fn query_to_dc(q: &ConjunctiveQuery) -> Result<DenialConstraint> {
    if !q.is_boolean() {
        return Err(Error::NonBooleanQuery);
    }
    DenialConstraint::new(q.body.clone())
}

/// One denial constraint per disjunct.
pub fn union_to_dcs(q: &UnionQuery) -> Result<Vec<DenialConstraint>> {
    q.disjuncts().iter().map(query_to_dc).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;

    fn cq(text: &str) -> ConjunctiveQuery {
        parse_query(text).unwrap().disjuncts()[0].clone()
    }

    #[test]
    fn hierarchical_example() {
        let c = classify(&cq("q :- R(X, Y), S(X, Z).")).unwrap();
        assert!(c.hierarchical);
        assert!(c.self_join_free);
        assert_eq!(c.atoms_of["X"], BTreeSet::from([0, 1]));
        assert_eq!(c.atoms_of["Y"], BTreeSet::from([0]));
        assert_eq!(c.atoms_of["Z"], BTreeSet::from([1]));
        assert_eq!(c.shapley_tractable(), Some(true));
    }

    #[test]
    fn non_hierarchical_example() {
        let c = classify(&cq("q :- R(X), S(X, Y), T(Y).")).unwrap();
        assert!(!c.hierarchical);
        assert_eq!(c.shapley_tractable(), Some(false));
    }

    #[test]
    fn single_atom_and_self_join() {
        let c = classify(&cq("q :- R(X).")).unwrap();
        assert!(c.hierarchical && c.self_join_free);
        let c = classify(&cq("q :- S(X), R(X, Y), S(Y).")).unwrap();
        assert!(!c.self_join_free);
        assert_eq!(c.shapley_tractable(), None);
    }

    #[test]
    fn open_query_rejected() {
        assert!(matches!(classify(&cq("q(X) :- R(X).")), Err(Error::NonBooleanQuery)));
        assert!(matches!(query_to_dc(&cq("q(X) :- R(X).")), Err(Error::NonBooleanQuery)));
    }

    #[test]
    fn kappa_keeps_atoms() {
        let q = cq("q :- S(X), R(X, Y), S(Y).");
        let dc = query_to_dc(&q).unwrap();
        assert_eq!(dc.atoms(), q.body.as_slice());
        assert_eq!(dc.to_string(), ":- S(X), R(X, Y), S(Y).");
    }
}
