//! Causal effect, Shapley value and Banzhaf index of tuples.
//!
//! Exact scores enumerate coalitions of the tuples that occur in some minimal
//! witness; every other tuple is a null player and does not change the score
//! of anyone else. Monte Carlo estimates are seeded and reproducible.

mod exact;
mod game;
mod montecarlo;

use std::collections::HashMap;

use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lineage::{self, build_lineage, intervene, ProbabilityAssignment};
use crate::model::{Database, Tid};
use crate::query::UnionQuery;
use crate::rational::{Rational, RationalJson};

pub use exact::DEFAULT_MAX_PLAYERS;
pub use game::{make_game, GameFunction, GameKind};
pub use montecarlo::{ApproxParams, Estimate, SampleBound, DEFAULT_MAX_SAMPLES};

use exact::{exact_value, Weighting};
use game::CompiledGame;

/// E(Q | do(X_τ = 1)) − E(Q | do(X_τ = 0)); every tuple at 1/2 by default.
pub fn causal_effect(
    db: &Database,
    q: &UnionQuery,
    tid: &Tid,
    p: Option<&ProbabilityAssignment>,
) -> Result<Rational> {
    causal_effect_capped(db, q, tid, p, lineage::DEFAULT_MAX_VARS)
}

pub fn causal_effect_capped(
    db: &Database,
    q: &UnionQuery,
    tid: &Tid,
    p: Option<&ProbabilityAssignment>,
    max_vars: usize,
) -> Result<Rational> {
    db.require(tid)?;
    let f = build_lineage(q, db)?;
    if !f.mentions(tid) {
        return Ok(Rational::zero());
    }
    let default;
    let p = match p {
        Some(p) => p,
        None => {
            default = ProbabilityAssignment::for_database(db);
            &default
        }
    };
    let on = lineage::probability_capped(&intervene(&f, tid, true), p, max_vars)?;
    let off = lineage::probability_capped(&intervene(&f, tid, false), p, max_vars)?;
    Ok(on - off)
}

/// Sampled causal effect, for lineages beyond the exact cap.
pub fn causal_effect_mc(
    db: &Database,
    q: &UnionQuery,
    tid: &Tid,
    p: Option<&ProbabilityAssignment>,
    params: &ApproxParams,
) -> Result<Estimate> {
    params.validate()?;
    db.require(tid)?;
    let f = build_lineage(q, db)?;
    if !f.mentions(tid) {
        return Ok(Estimate::zero());
    }
    let vars: Vec<Tid> = f.variables().into_iter().collect();
    if vars.len() > 64 {
        return Err(Error::TooManyVariables {
            count: vars.len(),
            cap: 64,
        });
    }
    let default;
    let p = match p {
        Some(p) => p,
        None => {
            default = ProbabilityAssignment::for_database(db);
            &default
        }
    };
    let probs = vars
        .iter()
        .map(|v| {
            p.get(v)
                .and_then(|r| r.to_f64())
                .ok_or_else(|| Error::UnboundVariable(v.to_string()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let index: HashMap<&Tid, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let clauses: Vec<u64> = f
        .clauses()
        .iter()
        .map(|c| c.iter().fold(0u64, |m, v| m | (1 << index[v])))
        .collect();
    Ok(montecarlo::causal_effect_estimate(
        &clauses,
        &probs,
        index[tid],
        params,
    ))
}

fn exact_score(
    db: &Database,
    g: &GameFunction,
    tid: &Tid,
    weighting: Weighting,
    cap: usize,
    all_players: bool,
) -> Result<Rational> {
    let ix = db.require(tid)?;
    let c = CompiledGame::compile_with(g, db, all_players)?;
    match c.slot_of(ix) {
        Some(slot) => exact_value(&c, slot, weighting, cap),
        None => Ok(Rational::zero()),
    }
}

pub fn shapley(db: &Database, g: &GameFunction, tid: &Tid) -> Result<Rational> {
    shapley_capped(db, g, tid, DEFAULT_MAX_PLAYERS)
}

/// Exact Shapley value; fails with `TooManyVariables` when more than `cap`
/// tuples occur in minimal witnesses.
pub fn shapley_capped(db: &Database, g: &GameFunction, tid: &Tid, cap: usize) -> Result<Rational> {
    exact_score(db, g, tid, Weighting::Shapley, cap, false)
}

pub fn banzhaf(db: &Database, g: &GameFunction, tid: &Tid) -> Result<Rational> {
    banzhaf_capped(db, g, tid, DEFAULT_MAX_PLAYERS)
}

pub fn banzhaf_capped(db: &Database, g: &GameFunction, tid: &Tid, cap: usize) -> Result<Rational> {
    exact_score(db, g, tid, Weighting::Banzhaf, cap, false)
}

/// Shapley value with every tuple of `db` counted as a player.
pub fn shapley_full_database(db: &Database, g: &GameFunction, tid: &Tid, cap: usize) -> Result<Rational> {
    exact_score(db, g, tid, Weighting::Shapley, cap, true)
}

/// Banzhaf index with every tuple of `db` counted as a player.
pub fn banzhaf_full_database(db: &Database, g: &GameFunction, tid: &Tid, cap: usize) -> Result<Rational> {
    exact_score(db, g, tid, Weighting::Banzhaf, cap, true)
}

/// Tuples that occur in some minimal witness of the game, in tid order.
pub fn relevant_tuples(db: &Database, g: &GameFunction) -> Result<Vec<Tid>> {
    let c = CompiledGame::compile(g, db)?;
    Ok(c.players.iter().map(|&ix| db.tuple(ix).tid.clone()).collect())
}

/// Monte Carlo Shapley value over random orders of the relevant tuples.
pub fn shapley_mc(db: &Database, g: &GameFunction, tid: &Tid, params: &ApproxParams) -> Result<Estimate> {
    params.validate()?;
    let ix = db.require(tid)?;
    let c = CompiledGame::compile(g, db)?;
    match c.slot_of(ix) {
        Some(slot) => montecarlo::shapley_estimate(&c, slot, params),
        None => Ok(Estimate::zero()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Ce,
    Shapley,
    Banzhaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingInfo {
    pub samples: u64,
    pub bound: SampleBound,
    pub truncated: bool,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub epsilon: Rational,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub delta: Rational,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub tid: Tid,
    pub score: ScoreKind,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub value: Rational,
    pub method: Method,
    pub players_relevant: usize,
    pub database_size: usize,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "optional_rational"
    )]
    pub value_full_database: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingInfo>,
}

fn optional_rational<S: Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    r.as_ref().map(|r| RationalJson(r.clone())).serialize(s)
}

impl ScoreReport {
    pub fn exact(tid: Tid, score: ScoreKind, value: Rational, players_relevant: usize, database_size: usize) -> Self {
        ScoreReport {
            tid,
            score,
            value,
            method: Method::Exact,
            players_relevant,
            database_size,
            value_full_database: None,
            sampling: None,
        }
    }

    pub fn estimated(
        tid: Tid,
        score: ScoreKind,
        estimate: Estimate,
        params: &ApproxParams,
        players_relevant: usize,
        database_size: usize,
    ) -> Self {
        ScoreReport {
            tid,
            score,
            value: estimate.value,
            method: Method::MonteCarlo,
            players_relevant,
            database_size,
            value_full_database: None,
            sampling: Some(SamplingInfo {
                samples: estimate.samples,
                bound: estimate.bound,
                truncated: estimate.truncated,
                epsilon: params.epsilon.clone(),
                delta: params.delta.clone(),
                seed: params.seed,
            }),
        }
    }
}
