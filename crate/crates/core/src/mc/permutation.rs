use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::walk::{Multiset, ProbResult, Scalar};

use super::{count_hits, McConfig};

pub const MAX_EXACT_PERMUTATION: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    Exact,
    Mc,
}

/// Probability that every partial sum of a uniformly random ordering of `ms`
/// is strictly positive.
///
/// Exact mode counts distinct arrangements by recursion over the remaining
/// multiplicities (all distinct arrangements are equally likely).
pub fn permutation_positive_prob(
    ms: &Multiset,
    mode: PermutationMode,
    cfg: &McConfig,
) -> Result<ProbResult> {
    match mode {
        PermutationMode::Exact => exact(ms),
        PermutationMode::Mc => monte_carlo(ms, cfg),
    }
}

fn exact(ms: &Multiset) -> Result<ProbResult> {
    if ms.len() > MAX_EXACT_PERMUTATION {
        return Err(Error::TooLargeForExact {
            len: ms.len(),
            max: MAX_EXACT_PERMUTATION,
        });
    }
    let mut distinct: Vec<(Rational, u8)> = Vec::new();
    for x in ms.elements() {
        match distinct.iter_mut().find(|(v, _)| v == x) {
            Some((_, c)) => *c += 1,
            None => distinct.push((x.clone(), 1)),
        }
    }
    let values: Vec<Rational> = distinct.iter().map(|(v, _)| v.clone()).collect();
    let counts: Vec<u8> = distinct.iter().map(|(_, c)| *c).collect();
    let mut memo = HashMap::new();
    let good = count_positive(&values, &mut counts.clone(), &Rational::zero(), &mut memo);
    let mut arrangements: u64 = (1..=ms.len() as u64).product();
    for c in &counts {
        arrangements /= (1..=*c as u64).product::<u64>();
    }
    let p = Rational::new(BigInt::from(good), BigInt::from(arrangements));
    Ok(ProbResult::from_scalar(Scalar::exact(p)))
}

/// Number of orderings of the remaining elements that keep every partial sum
/// (starting from `partial`) strictly positive. The partial sum is a function
/// of the remaining counts, so those alone key the memo.
fn count_positive(
    values: &[Rational],
    counts: &mut Vec<u8>,
    partial: &Rational,
    memo: &mut HashMap<Vec<u8>, u64>,
) -> u64 {
    if counts.iter().all(|&c| c == 0) {
        return 1;
    }
    if let Some(&hit) = memo.get(counts) {
        return hit;
    }
    let mut total = 0;
    for i in 0..values.len() {
        if counts[i] == 0 {
            continue;
        }
        let next = partial + &values[i];
        if next <= Rational::zero() {
            continue;
        }
        counts[i] -= 1;
        total += count_positive(values, counts, &next, memo);
        counts[i] += 1;
    }
    memo.insert(counts.clone(), total);
    total
}

fn monte_carlo(ms: &Multiset, cfg: &McConfig) -> Result<ProbResult> {
    let scale = Rational::from_integer(rational::common_denominator(ms.elements()));
    let ints = ms
        .elements()
        .iter()
        .map(|x| {
            (x * &scale)
                .to_integer()
                .to_i64()
                .ok_or_else(|| Error::Overflow(format!("element {x} is too large")))
        })
        .collect::<Result<Vec<i64>>>()?;
    let [hits] = count_hits(cfg, |rng| {
        let mut order = ints.clone();
        order.shuffle(rng);
        let mut s = 0i64;
        [order.iter().all(|x| {
            s += x;
            s > 0
        })]
    })?;
    Ok(ProbResult::monte_carlo(
        hits,
        cfg.trials,
        cfg.seed,
        cfg.min_hits,
    ))
}
