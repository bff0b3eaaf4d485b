use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::game::CompiledGame;
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

pub const DEFAULT_MAX_SAMPLES: u64 = 10_000_000;

/// Samples drawn from one random stream.
const CHUNK: u64 = 256;
/// Chunks drawn before the stopping condition is checked again.
const BATCH: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxParams {
    pub epsilon: Rational,
    pub delta: Rational,
    pub seed: u64,
    pub max_samples: u64,
}

impl ApproxParams {
    pub fn new(epsilon: Rational, delta: Rational, seed: u64) -> Result<Self> {
        let p = ApproxParams {
            epsilon,
            delta,
            seed,
            max_samples: DEFAULT_MAX_SAMPLES,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_max_samples(mut self, max_samples: u64) -> Result<Self> {
        self.max_samples = max_samples;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |r: &Rational| r > &rational::zero() && r < &rational::one();
        if !unit(&self.epsilon) {
            return Err(Error::InvalidParams("epsilon must lie in (0,1)".into()));
        }
        if !unit(&self.delta) {
            return Err(Error::InvalidParams("delta must lie in (0,1)".into()));
        }
        if self.max_samples == 0 {
            return Err(Error::InvalidParams("sample cap must be positive".into()));
        }
        Ok(())
    }

    fn eps(&self) -> f64 {
        self.epsilon.to_f64().expect("epsilon in (0,1)")
    }

    fn log_term(&self) -> f64 {
        (2.0 / self.delta.to_f64().expect("delta in (0,1)")).ln()
    }

    /// Success threshold of the stopping rule, in units of the sample range.
    pub fn stopping_threshold(&self) -> f64 {
        let e = self.eps();
        1.0 + 4.0 * (1.0 + e) * (std::f64::consts::E - 2.0) * self.log_term() / (e * e)
    }

    /// Fixed sample size for additive error ε times the half-range.
    pub fn hoeffding_samples(&self) -> u64 {
        let e = self.eps();
        (2.0 * self.log_term() / (e * e)).ceil() as u64
    }
}

/// How the number of samples was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleBound {
    /// Sample until the running sum reaches a threshold; relative error ε
    /// with probability 1−δ for non-negative samples.
    StoppingRule,
    /// Fixed size from Hoeffding's inequality; additive error.
    Hoeffding,
    /// No sampling was needed.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Exact sample mean.
    pub value: Rational,
    pub samples: u64,
    pub bound: SampleBound,
    /// The sample cap was hit before the bound was met.
    pub truncated: bool,
}

impl Estimate {
    pub(crate) fn zero() -> Self {
        Estimate {
            value: Rational::zero(),
            samples: 0,
            bound: SampleBound::None,
            truncated: false,
        }
    }
}

/// Draws `count` samples from stream `chunk` of the seed. The stream only
/// depends on the chunk index, so results do not depend on the thread count.
fn draw<F>(seed: u64, chunk: u64, count: u64, sample: &F) -> Vec<i128>
where
    F: Fn(&mut ChaCha8Rng) -> i128 + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    (0..count).map(|_| sample(&mut rng)).collect()
}

/// Sum and count of samples in `[0, range]` drawn until the sum reaches the
/// stopping threshold.
pub(crate) fn stopping_rule<F>(params: &ApproxParams, range: i128, sample: F) -> (i128, u64, bool)
where
    F: Fn(&mut ChaCha8Rng) -> i128 + Sync,
{
    let threshold = params.stopping_threshold() * range as f64;
    let (mut sum, mut n) = (0i128, 0u64);
    let mut next_chunk = 0u64;
    loop {
        let chunks: Vec<Vec<i128>> = (next_chunk..next_chunk + BATCH)
            .into_par_iter()
            .map(|c| draw(params.seed, c, CHUNK, &sample))
            .collect();
        next_chunk += BATCH;
        for x in chunks.into_iter().flatten() {
            sum += x;
            n += 1;
            if sum as f64 >= threshold {
                return (sum, n, false);
            }
            if n == params.max_samples {
                return (sum, n, true);
            }
        }
    }
}

/// Sum and count of a fixed number of samples.
pub(crate) fn fixed_size<F>(params: &ApproxParams, sample: F) -> (i128, u64, bool)
where
    F: Fn(&mut ChaCha8Rng) -> i128 + Sync,
{
    let wanted = params.hoeffding_samples();
    let n = wanted.min(params.max_samples);
    let chunks = n.div_ceil(CHUNK);
    let sum = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(n - c * CHUNK);
            draw(params.seed, c, count, &sample).into_iter().sum::<i128>()
        })
        .sum();
    (sum, n, n < wanted)
}

/// Shapley estimate for player `slot` from random orders of the players.
pub(crate) fn shapley_estimate(g: &CompiledGame, slot: usize, params: &ApproxParams) -> Result<Estimate> {
    if g.kind.is_hard_aggregate() {
        return Err(Error::InvalidParams(
            "max, min and avg games are exact-only".into(),
        ));
    }
    let n = g.n();
    let bit = 1u64 << slot;
    let sample = |rng: &mut ChaCha8Rng| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let before = order
            .iter()
            .take_while(|&&p| p != slot)
            .fold(0u64, |m, &p| m | (1 << p));
        g.eval(before | bit).0 - g.eval(before).0
    };
    let range = g.marginal_range();
    if range == 0 {
        return Ok(Estimate::zero());
    }
    let (sum, samples, truncated, bound) = if g.has_nonnegative_marginals() {
        let (s, k, t) = stopping_rule(params, range, sample);
        (s, k, t, SampleBound::StoppingRule)
    } else {
        let (s, k, t) = fixed_size(params, sample);
        (s, k, t, SampleBound::Hoeffding)
    };
    Ok(Estimate {
        value: Rational::new(BigInt::from(sum), BigInt::from(samples) * &g.denom),
        samples,
        bound,
        truncated,
    })
}

/// do(1) minus do(0) on worlds drawn from the tuple probabilities. Clause
/// masks range over `probs.len()` variables; `var` is the intervened one.
pub(crate) fn causal_effect_estimate(
    clauses: &[u64],
    probs: &[f64],
    var: usize,
    params: &ApproxParams,
) -> Estimate {
    let bit = 1u64 << var;
    let holds = |world: u64| clauses.iter().any(|&c| c & world == c);
    let sample = |rng: &mut ChaCha8Rng| {
        let world = probs
            .iter()
            .enumerate()
            .fold(0u64, |w, (i, &p)| if rng.gen::<f64>() < p { w | (1 << i) } else { w });
        holds(world | bit) as i128 - holds(world & !bit) as i128
    };
    let (sum, samples, truncated) = stopping_rule(params, 1, sample);
    Estimate {
        value: Rational::new(BigInt::from(sum), BigInt::from(samples)),
        samples,
        bound: SampleBound::StoppingRule,
        truncated,
    }
}
