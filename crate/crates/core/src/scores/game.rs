use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Database, Tid};
use crate::query::eval::{answers_with_witnesses, witness_positions};
use crate::query::UnionQuery;
use crate::rational::{self, Rational};

/// How answers of the query are turned into a number.
///
/// Aggregate positions are 0-based head positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "position", rename_all = "lowercase")]
pub enum GameKind {
    Boolean,
    Sum(usize),
    Max(usize),
    Min(usize),
    Avg(usize),
}

impl GameKind {
    pub fn position(&self) -> Option<usize> {
        match *self {
            GameKind::Boolean => None,
            GameKind::Sum(p) | GameKind::Max(p) | GameKind::Min(p) | GameKind::Avg(p) => Some(p),
        }
    }

    /// Max, min and avg are exact-only.
    pub fn is_hard_aggregate(&self) -> bool {
        matches!(self, GameKind::Max(_) | GameKind::Min(_) | GameKind::Avg(_))
    }
}

/// 𝒢(S) for subinstances S of a database.
#[derive(Debug, Clone, PartialEq)]
pub struct GameFunction {
    kind: GameKind,
    query: UnionQuery,
}

pub fn make_game(q: &UnionQuery, kind: GameKind) -> Result<GameFunction> {
    match kind.position() {
        None => q.require_boolean()?,
        Some(pos) => {
            if q.is_boolean() {
                return Err(Error::InvalidParams(
                    "aggregate games need a query with answer variables".into(),
                ));
            }
            if pos >= q.arity() {
                return Err(Error::InvalidParams(format!(
                    "aggregate position {pos} outside a head of arity {}",
                    q.arity()
                )));
            }
        }
    }
    Ok(GameFunction {
        kind,
        query: q.clone(),
    })
}

impl GameFunction {
    pub fn kind(&self) -> GameKind {
        self.kind
    }

    pub fn query(&self) -> &UnionQuery {
        &self.query
    }

    /// 𝒢(db).
    pub fn value(&self, db: &Database) -> Result<Rational> {
        let c = CompiledGame::compile(self, db)?;
        Ok(c.to_rational(c.eval(c.full_mask())))
    }

    /// 𝒢 on the subinstance of `db` made of the given tids.
    pub fn value_on(&self, db: &Database, subset: &BTreeSet<Tid>) -> Result<Rational> {
        for t in subset {
            db.require(t)?;
        }
        self.value(&db.restrict_to(subset))
    }
}

/// One answer with its value and its minimal witnesses as player masks.
#[derive(Debug, Clone)]
pub(crate) struct GameTerm {
    pub value: i128,
    pub witnesses: Vec<u64>,
}

/// A game specialised to one database: players are the tuples occurring in
/// some minimal witness, values are integers over a common denominator.
#[derive(Debug, Clone)]
pub(crate) struct CompiledGame {
    pub kind: GameKind,
    /// Database positions, in tid order.
    pub players: Vec<usize>,
    pub terms: Vec<GameTerm>,
    pub denom: BigInt,
}

/// (numerator, divisor) of 𝒢(S) · denom; the divisor is the answer count for
/// avg and 1 otherwise, 0 only for an empty avg.
pub(crate) type Scaled = (i128, usize);

fn minimal_sets(sets: impl IntoIterator<Item = BTreeSet<usize>>) -> Vec<BTreeSet<usize>> {
    let mut all: Vec<BTreeSet<usize>> = sets.into_iter().collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all.dedup();
    let mut kept: Vec<BTreeSet<usize>> = Vec::new();
    for s in all {
        if !kept.iter().any(|k| k.is_subset(&s)) {
            kept.push(s);
        }
    }
    kept
}

impl CompiledGame {
    pub fn compile(game: &GameFunction, db: &Database) -> Result<Self> {
        Self::compile_with(game, db, false)
    }

    /// With `all_players`, every tuple of `db` is a player, not only those in
    /// some minimal witness.
    pub fn compile_with(game: &GameFunction, db: &Database, all_players: bool) -> Result<Self> {
        let raw: Vec<(Rational, Vec<BTreeSet<usize>>)> = match game.kind.position() {
            None => {
                let w = minimal_sets(witness_positions(&game.query, db)?);
                if w.is_empty() {
                    Vec::new()
                } else {
                    vec![(rational::one(), w)]
                }
            }
            Some(pos) => answers_with_witnesses(&game.query, db)?
                .into_iter()
                .map(|(answer, ws)| {
                    let v = rational::parse_decimal(&answer[pos]).ok_or_else(|| {
                        Error::NonNumericPosition {
                            position: pos,
                            value: answer[pos].clone(),
                        }
                    })?;
                    Ok((v, minimal_sets(ws)))
                })
                .collect::<Result<_>>()?,
        };

        let mut used: BTreeSet<usize> = if all_players {
            (0..db.len()).collect()
        } else {
            BTreeSet::new()
        };
        for (_, ws) in &raw {
            used.extend(ws.iter().flatten().copied());
        }
        let mut players: Vec<usize> = used.into_iter().collect();
        players.sort_by(|&a, &b| db.tuple(a).tid.cmp(&db.tuple(b).tid));
        if players.len() > 64 {
            return Err(Error::TooManyVariables {
                count: players.len(),
                cap: 64,
            });
        }
        let slot = |ix: usize| players.iter().position(|&p| p == ix).expect("player");

        let denom = raw
            .iter()
            .fold(BigInt::one(), |acc, (v, _)| acc.lcm(v.denom()));
        let terms = raw
            .iter()
            .map(|(v, ws)| {
                let scaled = v.numer() * (&denom / v.denom());
                let value = scaled.to_i64().ok_or_else(|| {
                    Error::InvalidParams(format!(
                        "answer value {} too large for exact scoring",
                        rational::display(v)
                    ))
                })? as i128;
                let witnesses = ws
                    .iter()
                    .map(|w| w.iter().fold(0u64, |m, &ix| m | (1 << slot(ix))))
                    .collect();
                Ok(GameTerm { value, witnesses })
            })
            .collect::<Result<_>>()?;
        Ok(CompiledGame {
            kind: game.kind,
            players,
            terms,
            denom,
        })
    }

    pub fn n(&self) -> usize {
        self.players.len()
    }

    pub fn full_mask(&self) -> u64 {
        if self.n() == 64 {
            u64::MAX
        } else {
            (1u64 << self.n()) - 1
        }
    }

    pub fn slot_of(&self, db_ix: usize) -> Option<usize> {
        self.players.iter().position(|&p| p == db_ix)
    }

    fn present(term: &GameTerm, s: u64) -> bool {
        term.witnesses.iter().any(|&w| w & s == w)
    }

    pub fn eval(&self, s: u64) -> Scaled {
        let present = self.terms.iter().filter(|t| Self::present(t, s));
        match self.kind {
            GameKind::Boolean | GameKind::Sum(_) => (present.map(|t| t.value).sum(), 1),
            GameKind::Max(_) => (present.map(|t| t.value).max().unwrap_or(0), 1),
            GameKind::Min(_) => (present.map(|t| t.value).min().unwrap_or(0), 1),
            GameKind::Avg(_) => present.fold((0, 0), |(sum, count), t| (sum + t.value, count + 1)),
        }
    }

    pub fn to_rational(&self, (num, div): Scaled) -> Rational {
        if div == 0 {
            return Rational::zero();
        }
        Rational::new(BigInt::from(num), &self.denom * BigInt::from(div))
    }

    /// Largest possible |marginal| in scaled units, for sampling bounds.
    pub fn marginal_range(&self) -> i128 {
        match self.kind {
            GameKind::Boolean | GameKind::Sum(_) => self.terms.iter().map(|t| t.value.abs()).sum(),
            _ => 2 * self.terms.iter().map(|t| t.value.abs()).max().unwrap_or(0),
        }
    }

    /// Marginals can be negative only for sums with negative values and the
    /// non-monotone aggregates.
    pub fn has_nonnegative_marginals(&self) -> bool {
        match self.kind {
            GameKind::Boolean => true,
            GameKind::Sum(_) => self.terms.iter().all(|t| t.value >= 0),
            _ => false,
        }
    }
}
