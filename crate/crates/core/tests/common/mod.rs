#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use num_bigint::BigInt;
use num_traits::Zero;
use qexplain::model::io::{load_database, load_schema};
use qexplain::model::{
    validate_database, ConstraintSet, DenialConstraint, PredicateDecl, RawTuple, RhsTerm, Schema,
};
use qexplain::query::{parse, parse_constraints, parse_query, Atom, ConjunctiveQuery, Term, UnionQuery};
use qexplain::rational::{ratio, Rational};
use qexplain::{Database, Tid};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_fixture(dir: &str, files: &[&str]) -> Database {
    let base = fixtures_dir().join(dir);
    let schema = load_schema(&base.join("schema.json")).unwrap();
    let paths: Vec<PathBuf> = files.iter().map(|f| base.join(f)).collect();
    load_database(Some(&schema), &paths).unwrap()
}

pub fn fixture_program(dir: &str, file: &str) -> String {
    std::fs::read_to_string(fixtures_dir().join(dir).join(file)).unwrap()
}

pub fn fixture_query(dir: &str, file: &str) -> UnionQuery {
    parse_query(&fixture_program(dir, file)).unwrap()
}

pub fn fixture_named_query(dir: &str, file: &str, name: &str, answer: &[&str]) -> UnionQuery {
    let program = parse(&fixture_program(dir, file)).unwrap();
    let answer: Vec<String> = answer.iter().map(|s| s.to_string()).collect();
    program.query(name).unwrap().instantiate(&answer).unwrap()
}

pub fn fixture_constraints(dir: &str, file: &str) -> ConstraintSet {
    parse_constraints(&fixture_program(dir, file)).unwrap()
}

pub fn example1() -> (Database, UnionQuery) {
    (
        load_fixture("example1", &["R.csv", "S.csv"]),
        fixture_query("example1", "query.dl"),
    )
}

pub fn example3() -> (Database, UnionQuery) {
    (
        load_fixture("example3", &["R.csv", "S.csv"]),
        fixture_query("example3", "query.dl"),
    )
}

pub fn example4() -> (Database, UnionQuery) {
    (
        load_fixture("example4", &["E.csv"]),
        fixture_query("example4", "query.dl"),
    )
}

pub fn example5() -> (Database, ConstraintSet) {
    (
        load_fixture("example5", &["P.csv", "Q.csv", "R.csv"]),
        fixture_constraints("example5", "dcs.dl"),
    )
}

pub fn example6() -> Database {
    load_fixture("example6", &["Dep.csv", "Course.csv"])
}

pub fn tids(names: &[&str]) -> BTreeSet<Tid> {
    names.iter().map(|&n| Tid::from(n)).collect()
}

/// A random database with a Boolean query that is true in it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub db: Database,
    pub query: UnionQuery,
    pub text: String,
}

const DOMAIN: [&str; 4] = ["a", "b", "c", "d"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

fn random_schema(rng: &mut ChaCha8Rng) -> Schema {
    let names = ["R", "S", "T"];
    let k = rng.gen_range(2..=3);
    Schema::new(
        names[..k]
            .iter()
            .map(|n| PredicateDecl::positional(*n, rng.gen_range(1..=2)))
            .collect(),
    )
    .unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, schema: &Schema, max_tuples: usize, domain: usize) -> Vec<RawTuple> {
    let n = rng.gen_range(1..=max_tuples);
    (0..n)
        .map(|_| {
            let p = schema.predicates().choose(rng).unwrap();
            let values: Vec<&str> = (0..p.arity).map(|_| DOMAIN[rng.gen_range(0..domain)]).collect();
            RawTuple::new(&p.name, values)
        })
        .collect()
}

fn random_body(rng: &mut ChaCha8Rng, schema: &Schema, domain: usize) -> String {
    let atoms = rng.gen_range(2..=3);
    let body: Vec<String> = (0..atoms)
        .map(|_| {
            let p = schema.predicates().choose(rng).unwrap();
            let terms: Vec<&str> = (0..p.arity)
                .map(|_| {
                    if rng.gen_bool(0.85) {
                        VARS[rng.gen_range(0..VARS.len())]
                    } else {
                        DOMAIN[rng.gen_range(0..domain)]
                    }
                })
                .collect();
            format!("{}({})", p.name, terms.join(", "))
        })
        .collect();
    body.join(", ")
}

/// Up to `max_tuples` tuples over 2–3 predicates, and a Boolean CQ (sometimes
/// a union of two) with 2–3 atoms that holds in the database.
pub fn random_instance(seed: u64, max_tuples: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let schema = random_schema(&mut rng);
        let domain = rng.gen_range(2..=DOMAIN.len());
        let rows = random_rows(&mut rng, &schema, max_tuples, domain);
        let db = validate_database(&schema, rows).unwrap();
        let disjuncts = if rng.gen_bool(0.2) { 2 } else { 1 };
        let text: String = (0..disjuncts)
            .map(|_| format!("q :- {}.\n", random_body(&mut rng, &schema, domain)))
            .collect();
        let query = parse_query(&text).unwrap();
        if Naive::new(&db).holds(&query, full(db.len())) {
            return Instance { db, query, text };
        }
    }
}

/// Random INDs and DCs over the instance's schema that the database satisfies.
pub fn random_constraints(seed: u64, db: &Database) -> ConstraintSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let preds = db.schema().predicates().to_vec();
    let naive = Naive::new(db);
    let mut lines = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let lhs = preds.choose(&mut rng).unwrap();
        let rhs = preds.choose(&mut rng).unwrap();
        let lhs_vars: Vec<String> = (0..lhs.arity).map(|i| format!("V{i}")).collect();
        let rhs_terms: Vec<String> = (0..rhs.arity)
            .map(|_| {
                if rng.gen_bool(0.6) {
                    lhs_vars.choose(&mut rng).unwrap().clone()
                } else {
                    "_".to_string()
                }
            })
            .collect();
        let line = format!(
            "{}({}) -> {}({}).",
            lhs.name,
            lhs_vars.join(", "),
            rhs.name,
            rhs_terms.join(", ")
        );
        let cs = parse_constraints(&line).unwrap();
        if naive.satisfies(&cs, full(db.len())) {
            lines.push(line);
        }
    }
    for _ in 0..rng.gen_range(0..=2) {
        let line = format!(":- {}.", random_body(&mut rng, db.schema(), DOMAIN.len()));
        let cs = parse_constraints(&line).unwrap();
        if naive.satisfies(&cs, full(db.len())) {
            lines.push(line);
        }
    }
    parse_constraints(&lines.join("\n")).unwrap()
}

pub fn full(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn mask_tids(db: &Database, mask: u64) -> BTreeSet<Tid> {
    (0..db.len())
        .filter(|i| mask & (1 << i) != 0)
        .map(|i| db.tuple(i).tid.clone())
        .collect()
}

/// Query and constraint semantics by enumerating variable assignments over
/// the active domain; subinstances are bitmasks over database positions.
pub struct Naive {
    facts: HashMap<(String, Vec<String>), usize>,
    domain: Vec<String>,
    n: usize,
}

impl Naive {
    pub fn new(db: &Database) -> Self {
        let mut domain: BTreeSet<String> = BTreeSet::new();
        let mut facts = HashMap::new();
        for (i, t) in db.tuples().iter().enumerate() {
            domain.extend(t.values.iter().cloned());
            facts.insert((t.predicate.clone(), t.values.clone()), i);
        }
        domain.extend(DOMAIN.iter().map(|s| s.to_string()));
        Naive {
            facts,
            domain: domain.into_iter().collect(),
            n: db.len(),
        }
    }

    fn with_constants(&self, atoms: &[Atom]) -> Vec<String> {
        let mut d: BTreeSet<String> = self.domain.iter().cloned().collect();
        for a in atoms {
            for t in &a.terms {
                if let Term::Const(c) = t {
                    d.insert(c.clone());
                }
            }
        }
        d.into_iter().collect()
    }

    /// Fact sets (as masks) of every satisfying assignment of the atoms.
    pub fn matches(&self, atoms: &[Atom]) -> Vec<u64> {
        let vars: Vec<String> = atoms
            .iter()
            .flat_map(|a| a.variables().map(String::from))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let domain = self.with_constants(atoms);
        let mut out = BTreeSet::new();
        let mut values = vec![0usize; vars.len()];
        loop {
            let assign: HashMap<&str, &str> = vars
                .iter()
                .zip(&values)
                .map(|(v, &i)| (v.as_str(), domain[i].as_str()))
                .collect();
            let mut mask = 0u64;
            let ok = atoms.iter().all(|a| {
                let row: Vec<String> = a
                    .terms
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => assign[v.as_str()].to_string(),
                        Term::Const(c) => c.clone(),
                    })
                    .collect();
                match self.facts.get(&(a.predicate.clone(), row)) {
                    Some(&i) => {
                        mask |= 1 << i;
                        true
                    }
                    None => false,
                }
            });
            if ok {
                out.insert(mask);
            }
            // odometer
            let mut k = 0;
            loop {
                if k == values.len() {
                    return out.into_iter().collect();
                }
                values[k] += 1;
                if values[k] < domain.len() {
                    break;
                }
                values[k] = 0;
                k += 1;
            }
        }
    }

    pub fn witness_masks(&self, q: &UnionQuery) -> Vec<u64> {
        let mut all: Vec<u64> = q
            .disjuncts()
            .iter()
            .flat_map(|d| self.matches(&d.body))
            .collect();
        all.sort_by_key(|m| (m.count_ones(), *m));
        all.dedup();
        let mut minimal: Vec<u64> = Vec::new();
        for m in all {
            if !minimal.iter().any(|k| k & m == *k) {
                minimal.push(m);
            }
        }
        minimal
    }

    pub fn holds(&self, q: &UnionQuery, alive: u64) -> bool {
        self.witness_masks(q).iter().any(|&w| w & alive == w)
    }

    pub fn satisfies(&self, cs: &ConstraintSet, alive: u64) -> bool {
        Checker::new(self, cs).ok(alive)
    }
}

/// Precomputed constraint checks over subinstance masks.
pub struct Checker {
    dc_masks: Vec<u64>,
    /// (lhs fact, facts that match it on the right-hand side)
    ind_pairs: Vec<(usize, u64)>,
}

impl Checker {
    pub fn new(naive: &Naive, cs: &ConstraintSet) -> Self {
        let dc_masks = cs.dcs.iter().flat_map(|dc| naive.matches(dc.atoms())).collect();
        let mut ind_pairs = Vec::new();
        for ind in &cs.inds {
            for lhs_mask in naive.matches(std::slice::from_ref(ind.lhs())) {
                let lhs_ix = lhs_mask.trailing_zeros() as usize;
                let (_, lhs_values) = naive
                    .facts
                    .iter()
                    .find(|(_, &i)| i == lhs_ix)
                    .map(|(k, _)| k.clone())
                    .unwrap();
                let binding: HashMap<&str, &str> = ind
                    .lhs()
                    .terms
                    .iter()
                    .zip(&lhs_values)
                    .filter_map(|(t, v)| t.as_var().map(|x| (x, v.as_str())))
                    .collect();
                let mut rhs_mask = 0u64;
                for ((pred, values), &i) in &naive.facts {
                    if pred != ind.rhs_predicate() || values.len() != ind.rhs().len() {
                        continue;
                    }
                    let fits = ind.rhs().iter().zip(values).all(|(t, v)| match t {
                        RhsTerm::Exported(x) => binding[x.as_str()] == v,
                        RhsTerm::Const(c) => c == v,
                        RhsTerm::Existential => true,
                    });
                    if fits {
                        rhs_mask |= 1 << i;
                    }
                }
                ind_pairs.push((lhs_ix, rhs_mask));
            }
        }
        Checker { dc_masks, ind_pairs }
    }

    pub fn ok(&self, alive: u64) -> bool {
        self.dc_masks.iter().all(|&m| m & alive != m)
            && self
                .ind_pairs
                .iter()
                .all(|&(l, r)| alive & (1 << l) == 0 || alive & r != 0)
    }
}

/// Brute-force causes: for each tuple, all contingency sets Γ ⊆ D∖{τ}.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteCause {
    pub responsibility: Rational,
    pub minimal: BTreeSet<BTreeSet<Tid>>,
    pub counterfactual: bool,
}

pub fn brute_causes(db: &Database, q: &UnionQuery, ics: Option<&ConstraintSet>) -> BTreeMap<Tid, BruteCause> {
    let naive = Naive::new(db);
    let witnesses = naive.witness_masks(q);
    let empty = ConstraintSet::default();
    let checker = Checker::new(&naive, ics.unwrap_or(&empty));
    let holds = |alive: u64| witnesses.iter().any(|&w| w & alive == w);
    let all = full(db.len());
    let mut out = BTreeMap::new();
    for tau in 0..db.len() {
        let bit = 1u64 << tau;
        let others = all & !bit;
        let mut admissible: Vec<u64> = Vec::new();
        // every subset of the other tuples
        let mut g = 0u64;
        loop {
            let kept = all & !g;
            if holds(kept) && !holds(kept & !bit) && checker.ok(kept) && checker.ok(kept & !bit) {
                admissible.push(g);
            }
            if g == others {
                break;
            }
            g = (g.wrapping_sub(others)) & others;
        }
        let minimal: BTreeSet<BTreeSet<Tid>> = admissible
            .iter()
            .filter(|&&g| !admissible.iter().any(|&h| h != g && h & g == h))
            .map(|&g| mask_tids(db, g))
            .collect();
        let responsibility = admissible
            .iter()
            .map(|g| g.count_ones())
            .min()
            .map_or(Rational::zero(), |k| ratio(1, k as i64 + 1));
        out.insert(
            db.tuple(tau).tid.clone(),
            BruteCause {
                responsibility,
                counterfactual: admissible.contains(&0),
                minimal,
            },
        );
    }
    out
}

/// Removed sets of all subset-maximal consistent subinstances.
pub fn brute_s_repairs(db: &Database, dcs: &[DenialConstraint]) -> BTreeSet<BTreeSet<Tid>> {
    let naive = Naive::new(db);
    let cs = ConstraintSet {
        dcs: dcs.to_vec(),
        inds: Vec::new(),
    };
    let checker = Checker::new(&naive, &cs);
    let all = full(db.len());
    let consistent: Vec<u64> = (0..=all).filter(|&m| checker.ok(m)).collect();
    consistent
        .iter()
        .filter(|&&m| {
            (0..db.len()).all(|i| m & (1 << i) != 0 || !checker.ok(m | (1 << i)))
        })
        .map(|&m| mask_tids(db, all & !m))
        .collect()
}

/// E(Q | do(τ=1)) − E(Q | do(τ=0)) by enumerating the worlds of the other
/// tuples, each tuple present with probability 1/2.
pub fn brute_ce(db: &Database, q: &UnionQuery, tid: &Tid) -> Rational {
    let naive = Naive::new(db);
    let w = naive.witness_masks(q);
    let holds = |alive: u64| w.iter().any(|&m| m & alive == m);
    let tau = db.index_of(tid).unwrap();
    let bit = 1u64 << tau;
    let mut diff = 0i64;
    for world in 0..=full(db.len()) {
        if world & bit != 0 {
            continue;
        }
        diff += holds(world | bit) as i64 - holds(world) as i64;
    }
    Rational::new(BigInt::from(diff), BigInt::from(1u64 << (db.len() - 1)))
}

/// Shapley values of `players` (database positions) by averaging marginal
/// contributions over every ordering; the game is 1 iff a witness is present.
pub fn permutation_shapley(db: &Database, q: &UnionQuery, players: &[usize]) -> BTreeMap<Tid, Rational> {
    let naive = Naive::new(db);
    let w = naive.witness_masks(q);
    let holds = |alive: u64| w.iter().any(|&m| m & alive == m);
    let mut totals = vec![0i64; players.len()];
    let mut order: Vec<usize> = (0..players.len()).collect();
    let mut count = 0i64;
    permute(&mut order, 0, &mut |order| {
        count += 1;
        let mut s = 0u64;
        for &p in order.iter() {
            let before = holds(s);
            s |= 1 << players[p];
            totals[p] += holds(s) as i64 - before as i64;
        }
    });
    players
        .iter()
        .zip(totals)
        .map(|(&ix, t)| (db.tuple(ix).tid.clone(), ratio(t, count)))
        .collect()
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

/// Positions of tuples occurring in some minimal witness.
pub fn relevant_positions(db: &Database, q: &UnionQuery) -> Vec<usize> {
    let union = Naive::new(db).witness_masks(q).iter().fold(0u64, |a, &m| a | m);
    (0..db.len()).filter(|i| union & (1 << i) != 0).collect()
}

pub fn boolean_cq(body: Vec<Atom>) -> UnionQuery {
    ConjunctiveQuery::new("q", Vec::new(), body).unwrap().into()
}
