//! Lineage of Boolean queries: positive DNF over tuple variables.
//!
//! A formula is stored as its set of conjuncts (each a set of tids) with
//! absorption applied, so the conjuncts are exactly the minimal witnesses.
//! No conjuncts is `false`; a single empty conjunct is `true`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{Database, Tid};
use crate::query::eval::witness_positions;
use crate::query::UnionQuery;
use crate::rational::{self, Rational};

/// Default cap on distinct variables for exact probability.
pub const DEFAULT_MAX_VARS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LineageFormula {
    clauses: Vec<BTreeSet<Tid>>,
}

impl LineageFormula {
    pub fn constant(value: bool) -> Self {
        LineageFormula {
            clauses: if value { vec![BTreeSet::new()] } else { Vec::new() },
        }
    }

    pub fn var(tid: Tid) -> Self {
        LineageFormula {
            clauses: vec![BTreeSet::from([tid])],
        }
    }

    /// DNF from arbitrary conjuncts; absorption and ordering are applied.
    pub fn from_clauses<I>(clauses: I) -> Self
    where
        I: IntoIterator<Item = BTreeSet<Tid>>,
    {
        let mut clauses: Vec<BTreeSet<Tid>> = clauses.into_iter().collect();
        clauses.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        clauses.dedup();
        let mut kept: Vec<BTreeSet<Tid>> = Vec::with_capacity(clauses.len());
        for c in clauses {
            if !kept.iter().any(|k| k.is_subset(&c)) {
                kept.push(c);
            }
        }
        kept.sort();
        LineageFormula { clauses: kept }
    }

    pub fn or(&self, other: &Self) -> Self {
        LineageFormula::from_clauses(self.clauses.iter().chain(&other.clauses).cloned())
    }

    pub fn and(&self, other: &Self) -> Self {
        LineageFormula::from_clauses(self.clauses.iter().flat_map(|a| {
            other
                .clauses
                .iter()
                .map(move |b| a.union(b).cloned().collect::<BTreeSet<Tid>>())
        }))
    }

    pub fn is_true(&self) -> bool {
        self.clauses.len() == 1 && self.clauses[0].is_empty()
    }

    pub fn is_false(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Conjuncts, sorted by tid.
    pub fn clauses(&self) -> &[BTreeSet<Tid>] {
        &self.clauses
    }

    pub fn variables(&self) -> BTreeSet<Tid> {
        self.clauses.iter().flatten().cloned().collect()
    }

    pub fn mentions(&self, tid: &Tid) -> bool {
        self.clauses.iter().any(|c| c.contains(tid))
    }
}

impl fmt::Display for LineageFormula {
    /// `(t1) | (t2 & t3)`; constants print as `true` / `false`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_false() {
            return f.write_str("false");
        }
        if self.is_true() {
            return f.write_str("true");
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            let names: Vec<&str> = c.iter().map(Tid::as_str).collect();
            write!(f, "({})", names.join(" & "))?;
        }
        Ok(())
    }
}

/// Φ_Q(D): one conjunct per valuation's witness set.
pub fn build_lineage(q: &UnionQuery, db: &Database) -> Result<LineageFormula> {
    let sets = witness_positions(q, db)?;
    Ok(LineageFormula::from_clauses(
        sets.into_iter().map(|s| db.tids_of(s)),
    ))
}

pub fn eval_formula(f: &LineageFormula, truth: &BTreeMap<Tid, bool>) -> Result<bool> {
    if let Some(missing) = f.variables().into_iter().find(|v| !truth.contains_key(v)) {
        return Err(Error::UnboundVariable(missing.to_string()));
    }
    Ok(f.clauses.iter().any(|c| c.iter().all(|v| truth[v])))
}

/// do(X_tid = value), with constant propagation.
pub fn intervene(f: &LineageFormula, tid: &Tid, value: bool) -> LineageFormula {
    if value {
        LineageFormula::from_clauses(f.clauses.iter().map(|c| {
            let mut c = c.clone();
            c.remove(tid);
            c
        }))
    } else {
        LineageFormula {
            clauses: f
                .clauses
                .iter()
                .filter(|c| !c.contains(tid))
                .cloned()
                .collect(),
        }
    }
}

pub fn minimal_witnesses(f: &LineageFormula) -> BTreeSet<BTreeSet<Tid>> {
    f.clauses.iter().cloned().collect()
}

/// Independent tuple probabilities; unlisted tids fall back to the default.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityAssignment {
    probs: BTreeMap<Tid, Rational>,
    default: Option<Rational>,
}

impl ProbabilityAssignment {
    /// Every tuple of `db` at probability 1/2.
    pub fn for_database(db: &Database) -> Self {
        Self::uniform(db, rational::ratio(1, 2)).expect("1/2 is a probability")
    }

    pub fn uniform(db: &Database, p: Rational) -> Result<Self> {
        check_probability(&p)?;
        Ok(ProbabilityAssignment {
            probs: db.tuples().iter().map(|t| (t.tid.clone(), p.clone())).collect(),
            default: None,
        })
    }

    /// Explicit probabilities only.
    pub fn new(probs: BTreeMap<Tid, Rational>) -> Result<Self> {
        probs.values().try_for_each(check_probability)?;
        Ok(ProbabilityAssignment {
            probs,
            default: None,
        })
    }

    /// Probability used for tids without an explicit entry.
    pub fn with_default(mut self, p: Rational) -> Result<Self> {
        check_probability(&p)?;
        self.default = Some(p);
        Ok(self)
    }

    pub fn set(&mut self, tid: Tid, p: Rational) -> Result<()> {
        check_probability(&p)?;
        self.probs.insert(tid, p);
        Ok(())
    }

    /// A tuple that could exist but is not in the database: probability 0.
    pub fn declare_potential(&mut self, tid: Tid) {
        self.probs.insert(tid, Rational::zero());
    }

    pub fn get(&self, tid: &Tid) -> Option<&Rational> {
        self.probs.get(tid).or(self.default.as_ref())
    }
}

fn check_probability(p: &Rational) -> Result<()> {
    if rational::is_in_unit_interval(p) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "probability {} outside [0,1]",
            rational::display(p)
        )))
    }
}

pub fn probability(f: &LineageFormula, p: &ProbabilityAssignment) -> Result<Rational> {
    probability_capped(f, p, DEFAULT_MAX_VARS)
}

/// Exact probability that `f` is true when each variable is independently true
/// with its assigned probability.
///
/// Worlds are enumerated by branching on one variable at a time; a branch
/// stops as soon as the conditioned formula is constant, and variable-disjoint
/// parts are combined by independence.
pub fn probability_capped(
    f: &LineageFormula,
    p: &ProbabilityAssignment,
    max_vars: usize,
) -> Result<Rational> {
    let vars: Vec<Tid> = f.variables().into_iter().collect();
    if vars.len() > max_vars {
        return Err(Error::TooManyVariables {
            count: vars.len(),
            cap: max_vars,
        });
    }
    let probs = vars
        .iter()
        .map(|v| {
            p.get(v)
                .cloned()
                .ok_or_else(|| Error::UnboundVariable(v.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let index: HashMap<&Tid, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let clauses: Vec<u64> = f
        .clauses
        .iter()
        .map(|c| c.iter().fold(0u64, |m, v| m | (1 << index[v])))
        .collect();
    let mut memo = HashMap::new();
    Ok(dnf_probability(clauses, &probs, &mut memo))
}

fn absorb(mut clauses: Vec<u64>) -> Vec<u64> {
    clauses.sort_by_key(|c| (c.count_ones(), *c));
    clauses.dedup();
    let mut kept: Vec<u64> = Vec::with_capacity(clauses.len());
    for c in clauses {
        if !kept.iter().any(|k| k & c == *k) {
            kept.push(c);
        }
    }
    kept
}

/// Splits clauses into groups with pairwise disjoint variables.
fn components(clauses: &[u64]) -> Vec<Vec<u64>> {
    let mut groups: Vec<(u64, Vec<u64>)> = Vec::new();
    for &c in clauses {
        let mut mask = c;
        let mut members = vec![c];
        let mut i = 0;
        while i < groups.len() {
            if groups[i].0 & mask != 0 {
                let (m, cs) = groups.swap_remove(i);
                mask |= m;
                members.extend(cs);
            } else {
                i += 1;
            }
        }
        groups.push((mask, members));
    }
    groups.into_iter().map(|(_, cs)| cs).collect()
}

fn dnf_probability(
    clauses: Vec<u64>,
    probs: &[Rational],
    memo: &mut HashMap<Vec<u64>, Rational>,
) -> Rational {
    if clauses.is_empty() {
        return Rational::zero();
    }
    if clauses.contains(&0) {
        return Rational::one();
    }
    let clauses = absorb(clauses);
    if let Some(hit) = memo.get(&clauses) {
        return hit.clone();
    }
    let parts = components(&clauses);
    let result = if parts.len() > 1 {
        let mut none = Rational::one();
        for part in parts {
            none *= Rational::one() - dnf_probability(part, probs, memo);
        }
        Rational::one() - none
    } else {
        let mut counts = [0u32; 64];
        for c in &clauses {
            for (bit, count) in counts.iter_mut().enumerate() {
                if c >> bit & 1 == 1 {
                    *count += 1;
                }
            }
        }
        // most frequent variable, lowest index on ties
        let pivot = (0..64).max_by_key(|&b| (counts[b], std::cmp::Reverse(b))).unwrap();
        let bit = 1u64 << pivot;
        let when_true: Vec<u64> = clauses.iter().map(|c| c & !bit).collect();
        let when_false: Vec<u64> = clauses.iter().copied().filter(|c| c & bit == 0).collect();
        let p = &probs[pivot];
        p * dnf_probability(when_true, probs, memo)
            + (Rational::one() - p) * dnf_probability(when_false, probs, memo)
    };
    memo.insert(clauses, result.clone());
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn t(s: &str) -> Tid {
        Tid::from(s)
    }

    fn set(ts: &[&str]) -> BTreeSet<Tid> {
        ts.iter().map(|s| t(s)).collect()
    }

    /// Lineage over R(a,b)=ab, R(a,c)=ac, R(c,b)=cb, S(b)=sb, S(c)=sc.
    fn example3() -> LineageFormula {
        LineageFormula::from_clauses([set(&["ab", "sb"]), set(&["ac", "sc"]), set(&["cb", "sb"])])
    }

    fn half_all(f: &LineageFormula) -> ProbabilityAssignment {
        ProbabilityAssignment::new(f.variables().into_iter().map(|v| (v, ratio(1, 2))).collect()).unwrap()
    }

    #[test]
    fn interventions_on_s_b() {
        let f = example3();
        let off = intervene(&f, &t("sb"), false);
        assert_eq!(off, LineageFormula::from_clauses([set(&["ac", "sc"])]));
        let on = intervene(&f, &t("sb"), true);
        assert_eq!(
            on,
            LineageFormula::from_clauses([set(&["ab"]), set(&["ac", "sc"]), set(&["cb"])])
        );
        let p = half_all(&f);
        assert_eq!(probability(&off, &p).unwrap(), ratio(1, 4));
        assert_eq!(probability(&on, &p).unwrap(), ratio(13, 16));
        assert_eq!(intervene(&on, &t("sb"), true), on);
        assert!(!on.mentions(&t("sb")));
    }

    #[test]
    fn absorption() {
        let f = LineageFormula::from_clauses([set(&["a"]), set(&["a", "b"])]);
        assert_eq!(minimal_witnesses(&f), BTreeSet::from([set(&["a"])]));
    }

    #[test]
    fn constants() {
        let p = ProbabilityAssignment::new(BTreeMap::new()).unwrap();
        assert_eq!(probability(&LineageFormula::constant(true), &p).unwrap(), ratio(1, 1));
        assert_eq!(probability(&LineageFormula::constant(false), &p).unwrap(), ratio(0, 1));
        assert_eq!(LineageFormula::constant(true).to_string(), "true");
        assert_eq!(LineageFormula::constant(false).to_string(), "false");
        assert!(intervene(&LineageFormula::var(t("x")), &t("x"), true).is_true());
        assert!(intervene(&LineageFormula::var(t("x")), &t("x"), false).is_false());
    }

    #[test]
    fn canonical_text() {
        let f = LineageFormula::from_clauses([
            set(&["t4", "t5", "t6"]),
            set(&["t2", "t3"]),
            set(&["t1"]),
        ]);
        assert_eq!(f.to_string(), "(t1) | (t2 & t3) | (t4 & t5 & t6)");
    }

    #[test]
    fn eval_and_unbound() {
        let f = LineageFormula::from_clauses([set(&["t1"]), set(&["t2", "t3"])]);
        let truth: BTreeMap<Tid, bool> =
            [("t1", false), ("t2", true), ("t3", true)].map(|(k, v)| (t(k), v)).into();
        assert!(eval_formula(&f, &truth).unwrap());
        let partial: BTreeMap<Tid, bool> = [(t("t1"), true)].into();
        assert!(matches!(eval_formula(&f, &partial), Err(Error::UnboundVariable(v)) if v == "t2"));
    }

    #[test]
    fn cap_and_missing_probability() {
        let f = LineageFormula::from_clauses((0..31).map(|i| set(&[&format!("v{i}")])));
        let p = half_all(&f);
        assert!(matches!(
            probability(&f, &p),
            Err(Error::TooManyVariables { count: 31, cap: 30 })
        ));
        let g = LineageFormula::var(t("x"));
        let empty = ProbabilityAssignment::new(BTreeMap::new()).unwrap();
        assert!(matches!(probability(&g, &empty), Err(Error::UnboundVariable(_))));
        let dflt = empty.with_default(ratio(1, 3)).unwrap();
        assert_eq!(probability(&g, &dflt).unwrap(), ratio(1, 3));
    }

    #[test]
    fn potential_tuples_have_probability_zero() {
        let mut p = ProbabilityAssignment::new(BTreeMap::new()).unwrap().with_default(ratio(1, 2)).unwrap();
        p.declare_potential(t("ghost"));
        let f = LineageFormula::from_clauses([set(&["ghost"]), set(&["a", "b"])]);
        assert_eq!(probability(&f, &p).unwrap(), ratio(1, 4));
        assert!(p.set(t("bad"), ratio(3, 2)).is_err());
    }

    #[test]
    fn and_or_build_dnf() {
        let a = LineageFormula::var(t("a"));
        let b = LineageFormula::var(t("b"));
        let c = LineageFormula::var(t("c"));
        let f = a.or(&b).and(&c);
        assert_eq!(f.to_string(), "(a & c) | (b & c)");
        assert_eq!(a.or(&a.and(&b)), a);
    }
}
