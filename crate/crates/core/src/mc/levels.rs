use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::LeveledDistribution;
use crate::error::{Error, Result};

use super::{McConfig, WalkSampler};

/// Per-level counts `N_i`, sums `S_{n,i}` and truncated endpoints `S_n^{(K)}`
/// of one path. Only levels that occur are present in `counts` and `sums`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDecomposition {
    pub counts: BTreeMap<u32, u64>,
    pub sums: BTreeMap<u32, i64>,
    pub truncated_endpoints: BTreeMap<u32, i64>,
}

impl LevelDecomposition {
    pub fn steps(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn endpoint(&self) -> i64 {
        self.sums.values().sum()
    }

    pub fn count(&self, level: u32) -> u64 {
        self.counts.get(&level).copied().unwrap_or(0)
    }

    pub fn sum(&self, level: u32) -> i64 {
        self.sums.get(&level).copied().unwrap_or(0)
    }
}

pub fn decompose_path(dist: &LeveledDistribution, steps: &[f64]) -> Result<LevelDecomposition> {
    let mut d = LevelDecomposition::default();
    for &x in steps {
        let level = dist.level_of(x).ok_or_else(|| {
            Error::invalid(format!(
                "step {x} is not a level value of {}",
                dist.base.label()
            ))
        })?;
        *d.counts.entry(level).or_default() += 1;
        *d.sums.entry(level).or_default() += x as i64;
    }
    let mut running = 0;
    for k in 0..=dist.max_level {
        running += d.sum(k);
        d.truncated_endpoints.insert(k, running);
    }
    debug_assert_eq!(d.steps(), steps.len() as u64);
    debug_assert_eq!(d.endpoint(), steps.iter().map(|&x| x as i64).sum::<i64>());
    Ok(d)
}

/// Iterator over sampled path decompositions, trial `j` drawing from stream
/// `j mod stream_count`.
pub struct LevelSampler<'a> {
    dist: &'a LeveledDistribution,
    sampler: WalkSampler,
    n: u64,
    rngs: Vec<ChaCha8Rng>,
    next: u64,
    trials: u64,
    buf: Vec<f64>,
}

impl Iterator for LevelSampler<'_> {
    type Item = LevelDecomposition;

    fn next(&mut self) -> Option<LevelDecomposition> {
        if self.next >= self.trials {
            return None;
        }
        let stream = (self.next % self.rngs.len() as u64) as usize;
        let rng = &mut self.rngs[stream];
        self.next += 1;
        self.buf.clear();
        for _ in 0..self.n {
            self.buf.push(self.sampler.draw_f64(rng));
        }
        Some(decompose_path(self.dist, &self.buf).expect("sampled steps are level values"))
    }
}

pub fn sample_level_decomposition<'a>(
    dist: &'a LeveledDistribution,
    n: u64,
    cfg: &McConfig,
) -> Result<LevelSampler<'a>> {
    cfg.validate()?;
    if dist.levels.iter().any(|l| l.value > i64::MAX.into()) {
        return Err(Error::Overflow("level values must fit in 64 bits".into()));
    }
    Ok(LevelSampler {
        dist,
        sampler: WalkSampler::new(&dist.base)?,
        n,
        rngs: (0..cfg.stream_count).map(|s| cfg.stream_rng(s)).collect(),
        next: 0,
        trials: cfg.trials,
        buf: Vec::with_capacity(n as usize),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: u32,
    pub value: f64,
    pub mean_count: f64,
    pub count_stderr: f64,
    pub mean_abs_sum: f64,
    pub max_abs_sum: u64,
    /// `[N_i, paths]` pairs in increasing `N_i`.
    pub count_histogram: Vec<[u64; 2]>,
    pub mean_abs_truncated_endpoint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: u64,
    pub trials: u64,
    pub levels: Vec<LevelStats>,
}

/// Aggregates decompositions per level. Accumulation is in integers, so the
/// summary does not depend on the order paths arrive in.
pub fn summarize_levels(
    dist: &LeveledDistribution,
    n: u64,
    paths: impl IntoIterator<Item = LevelDecomposition>,
) -> LevelSummary {
    let levels = dist.max_level as usize + 1;
    let mut count_sum = vec![0u128; levels];
    let mut count_sq = vec![0u128; levels];
    let mut abs_sum = vec![0u128; levels];
    let mut abs_trunc = vec![0u128; levels];
    let mut max_abs = vec![0u64; levels];
    let mut hist = vec![BTreeMap::new(); levels];
    let mut trials = 0u64;
    for p in paths {
        trials += 1;
        for k in 0..levels {
            let c = p.count(k as u32);
            let s = p.sum(k as u32).unsigned_abs();
            count_sum[k] += c as u128;
            count_sq[k] += (c as u128) * (c as u128);
            abs_sum[k] += s as u128;
            max_abs[k] = max_abs[k].max(s);
            *hist[k].entry(c).or_insert(0) += 1;
            abs_trunc[k] += p
                .truncated_endpoints
                .get(&(k as u32))
                .copied()
                .unwrap_or(0)
                .unsigned_abs() as u128;
        }
    }
    let t = trials.max(1) as f64;
    let values = dist.level_values();
    let stats = (0..levels)
        .map(|k| {
            let mean = count_sum[k] as f64 / t;
            let var = (count_sq[k] as f64 / t - mean * mean).max(0.0);
            LevelStats {
                level: k as u32,
                value: values[k],
                mean_count: mean,
                count_stderr: (var / t).sqrt(),
                mean_abs_sum: abs_sum[k] as f64 / t,
                max_abs_sum: max_abs[k],
                count_histogram: std::mem::take(&mut hist[k])
                    .into_iter()
                    .map(|(c, p)| [c, p])
                    .collect(),
                mean_abs_truncated_endpoint: abs_trunc[k] as f64 / t,
            }
        })
        .collect();
    LevelSummary {
        n,
        trials,
        levels: stats,
    }
}
