use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;

use super::game::{CompiledGame, GameKind};
use crate::error::{Error, Result};
use crate::rational::Rational;

pub const DEFAULT_MAX_PLAYERS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Weighting {
    Shapley,
    Banzhaf,
}

/// Subset of the players other than `slot`, as the `m`-th such subset.
#[inline]
fn spread(m: u64, slot: usize) -> u64 {
    let low = (1u64 << slot) - 1;
    (m & low) | ((m & !low) << 1)
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Weighted sum of the marginals of player `slot` over all coalitions of the
/// other players.
///
/// Marginals are accumulated as integers per coalition size and per divisor
/// (the answer count, for averages), so the parallel reduction is exact and
/// independent of how the work is split.
pub(crate) fn exact_value(
    g: &CompiledGame,
    slot: usize,
    weighting: Weighting,
    cap: usize,
) -> Result<Rational> {
    let n = g.n();
    if n > cap.min(63) {
        return Err(Error::TooManyVariables { count: n, cap });
    }
    let buckets = match g.kind {
        GameKind::Avg(_) => g.terms.len() + 1,
        _ => 2,
    };
    let width = n * buckets;
    let bit = 1u64 << slot;
    let coalitions = 1u64 << (n - 1);

    let acc = (0..coalitions)
        .into_par_iter()
        .try_fold(
            || vec![0i128; width],
            |mut acc, m| {
                let s = spread(m, slot);
                let k = m.count_ones() as usize;
                let (with, dw) = g.eval(s | bit);
                let (without, dv) = g.eval(s);
                let a = &mut acc[k * buckets + dw];
                *a = a.checked_add(with)?;
                let b = &mut acc[k * buckets + dv];
                *b = b.checked_sub(without)?;
                Some(acc)
            },
        )
        .try_reduce(
            || vec![0i128; width],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = x.checked_add(y)?;
                }
                Some(a)
            },
        )
        .ok_or_else(|| Error::InvalidParams("aggregate values overflow exact scoring".into()))?;

    let n_fact = factorial(n);
    let mut total = Rational::zero();
    for k in 0..n {
        let mut level = Rational::zero();
        for (div, &sum) in acc[k * buckets..(k + 1) * buckets].iter().enumerate() {
            if div > 0 && sum != 0 {
                level += Rational::new(BigInt::from(sum), BigInt::from(div));
            }
        }
        if level.is_zero() {
            continue;
        }
        let weight = match weighting {
            Weighting::Shapley => {
                Rational::new(factorial(k) * factorial(n - 1 - k), n_fact.clone())
            }
            Weighting::Banzhaf => Rational::new(BigInt::one(), BigInt::one() << (n - 1)),
        };
        total += level * weight;
    }
    Ok(total / Rational::from_integer(g.denom.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_skips_the_slot() {
        assert_eq!(spread(0b111, 0), 0b1110);
        assert_eq!(spread(0b111, 1), 0b1101);
        assert_eq!(spread(0b111, 3), 0b0111);
        assert_eq!(spread(0b101, 1), 0b1001);
    }
}
