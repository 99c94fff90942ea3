//! Seeded Monte Carlo estimation.
//!
//! Trial `j` draws from stream `j mod stream_count` of a ChaCha8 generator
//! keyed by the master seed, so results do not depend on how streams are
//! scheduled across threads.

mod chernoff;
mod levels;
mod permutation;
mod record;
mod sampler;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::walk::{ProbResult, StepDistribution};

pub use chernoff::{chernoff_rand_check, chernoff_rand_grid, ChernoffRecord};
pub use levels::{
    decompose_path, sample_level_decomposition, summarize_levels, LevelDecomposition, LevelSampler,
    LevelStats, LevelSummary,
};
pub use permutation::{permutation_positive_prob, PermutationMode, MAX_EXACT_PERMUTATION};
pub use record::{write_records_csv, McRecord};

pub(crate) use sampler::WalkSampler;

pub const DEFAULT_MIN_HITS: u64 = 25;
pub const DEFAULT_STREAMS: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub stream_count: u64,
    #[serde(default = "default_min_hits")]
    pub min_hits: u64,
}

fn default_min_hits() -> u64 {
    DEFAULT_MIN_HITS
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        McConfig {
            trials,
            seed,
            stream_count: DEFAULT_STREAMS.min(trials.max(1)),
            min_hits: DEFAULT_MIN_HITS,
        }
    }

    pub fn with_streams(mut self, stream_count: u64) -> Self {
        self.stream_count = stream_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        if self.stream_count == 0 || self.stream_count > self.trials {
            return Err(Error::invalid(format!(
                "stream_count must be in 1..=trials, got {} for {} trials",
                self.stream_count, self.trials
            )));
        }
        Ok(())
    }

    /// Number of trials assigned to stream `s`.
    pub fn trials_in_stream(&self, s: u64) -> u64 {
        self.trials / self.stream_count + u64::from(s < self.trials % self.stream_count)
    }

    pub fn stream_rng(&self, s: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(s);
        rng
    }
}

/// Runs every trial, returning how many times each of the `N` indicators was set.
pub(crate) fn count_hits<const N: usize, F>(cfg: &McConfig, trial: F) -> Result<[u64; N]>
where
    F: Fn(&mut ChaCha8Rng) -> [bool; N] + Sync,
{
    let counts = count_into(cfg, N, |rng, hits| {
        for (h, hit) in hits.iter_mut().zip(trial(rng)) {
            *h += u64::from(hit);
        }
    })?;
    Ok(counts.try_into().expect("width is N"))
}

/// Runs every trial with a per-stream tally of `width` counters; tallies are
/// summed in stream order.
pub(crate) fn count_into<F>(cfg: &McConfig, width: usize, trial: F) -> Result<Vec<u64>>
where
    F: Fn(&mut ChaCha8Rng, &mut [u64]) + Sync,
{
    cfg.validate()?;
    let per_stream: Vec<Vec<u64>> = (0..cfg.stream_count)
        .into_par_iter()
        .map(|s| {
            let mut rng = cfg.stream_rng(s);
            let mut hits = vec![0u64; width];
            for _ in 0..cfg.trials_in_stream(s) {
                trial(&mut rng, &mut hits);
            }
            hits
        })
        .collect();
    let mut total = vec![0u64; width];
    for hits in per_stream {
        for (t, h) in total.iter_mut().zip(hits) {
            *t += h;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    #[default]
    None,
    /// `S_i > 0` for `0 < i < n`.
    Interior,
    /// `S_i > 0` for `0 < i <= n`.
    Prefix,
}

/// A path event: positivity, an optional barrier `S_i >= -h` for all
/// `1 <= i <= n`, and an optional endpoint window `k <= S_n < k + A`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Event {
    #[serde(default)]
    pub positivity: Positivity,
    #[serde(
        default,
        with = "rational::serde_str::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub barrier_h: Option<Rational>,
    #[serde(
        default,
        with = "window_serde",
        skip_serializing_if = "Option::is_none"
    )]
    pub endpoint_window: Option<(Rational, Rational)>,
}

mod window_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::{serde_str, Rational};

    #[derive(Serialize, Deserialize)]
    struct Window {
        #[serde(with = "serde_str")]
        k: Rational,
        #[serde(rename = "A", with = "serde_str")]
        a: Rational,
    }

    pub fn serialize<S: Serializer>(
        value: &Option<(Rational, Rational)>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        value
            .as_ref()
            .map(|(k, a)| Window {
                k: k.clone(),
                a: a.clone(),
            })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<(Rational, Rational)>, D::Error> {
        Ok(Option::<Window>::deserialize(d)?.map(|w| (w.k, w.a)))
    }
}

impl Event {
    pub fn window(k: Rational, a: Rational) -> Self {
        Event {
            endpoint_window: Some((k, a)),
            ..Default::default()
        }
    }

    pub fn with_positivity(mut self, positivity: Positivity) -> Self {
        self.positivity = positivity;
        self
    }

    pub fn with_barrier(mut self, h: Rational) -> Self {
        self.barrier_h = Some(h);
        self
    }
}

/// `hits / trials` for a path event.
pub fn estimate_event(
    dist: &StepDistribution,
    n: u64,
    event: &Event,
    cfg: &McConfig,
) -> Result<ProbResult> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let sampler = WalkSampler::new(dist)?;
    let limits = sampler.limits(event)?;
    let [hits] = count_hits(cfg, |rng| [sampler.event_hit(n, &limits, rng)])?;
    Ok(ProbResult::monte_carlo(
        hits,
        cfg.trials,
        cfg.seed,
        cfg.min_hits,
    ))
}

/// `P{S_i > 0, 0 < i < n | k <= S_n < k+A}` from paired samples.
///
/// The estimate is `a/b` with `b` the window hits and `a` the joint hits
/// among them; as the events are nested its standard error is
/// `sqrt(p(1-p)/b)`. The result reports `b` as `trials` and the full sample
/// size as `total_trials`.
pub fn estimate_conditional(
    dist: &StepDistribution,
    n: u64,
    k: &Rational,
    window_a: &Rational,
    cfg: &McConfig,
) -> Result<ProbResult> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let sampler = WalkSampler::new(dist)?;
    let event = Event::window(k.clone(), window_a.clone()).with_positivity(Positivity::Interior);
    let limits = sampler.limits(&event)?;
    let [window, joint] = count_hits(cfg, |rng| {
        let (window_hit, positive) = sampler.window_and_positivity(n, &limits, rng);
        [window_hit, window_hit && positive]
    })?;
    if window == 0 {
        return Err(Error::ZeroDenominatorSample { trials: cfg.trials });
    }
    let mut r = ProbResult::monte_carlo(joint, window, cfg.seed, cfg.min_hits);
    r.total_trials = Some(cfg.trials);
    if window < cfg.min_hits {
        r = r.with_flag(crate::walk::Flag::LowPrecision);
    } else {
        r.flags.retain(|f| *f != crate::walk::Flag::LowPrecision);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::builtin;
    use crate::rational::int;
    use crate::walk::Flag;

    #[test]
    fn stream_partition_covers_all_trials() {
        let cfg = McConfig::new(103, 1).with_streams(10);
        let total: u64 = (0..10).map(|s| cfg.trials_in_stream(s)).sum();
        assert_eq!(total, 103);
        assert!(McConfig::new(5, 1).with_streams(6).validate().is_err());
    }

    #[test]
    fn always_true_event() {
        let d = builtin("skew").unwrap();
        let r = estimate_event(&d, 1, &Event::default(), &McConfig::new(1000, 3)).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn window_estimates_agree_with_exact() {
        let d = builtin("rademacher").unwrap();
        let cfg = McConfig::new(200_000, 11);
        let r = estimate_event(&d, 4, &Event::window(int(2), int(2)), &cfg).unwrap();
        assert!(r.within(0.25, 3.0), "{r:?}");
        let joint = Event::window(int(2), int(2)).with_positivity(Positivity::Interior);
        let r = estimate_event(&d, 4, &joint, &cfg).unwrap();
        assert!(r.within(0.125, 3.0), "{r:?}");
        let c = estimate_conditional(&d, 4, &int(2), &int(2), &cfg).unwrap();
        assert!(c.within(0.5, 3.0), "{c:?}");
        assert_eq!(c.total_trials, Some(200_000));
    }

    #[test]
    fn determinism() {
        let d = builtin("lazy").unwrap();
        let e = Event::default().with_barrier(int(1));
        let a = estimate_event(&d, 20, &e, &McConfig::new(50_000, 9)).unwrap();
        let b = estimate_event(&d, 20, &e, &McConfig::new(50_000, 9)).unwrap();
        assert_eq!(a, b);
        let c = estimate_event(&d, 20, &e, &McConfig::new(50_000, 10)).unwrap();
        assert_ne!(a.hits, c.hits);
    }

    #[test]
    fn parity_miss_is_zero_denominator() {
        let d = builtin("rademacher").unwrap();
        assert!(matches!(
            estimate_conditional(&d, 4, &int(3), &int(1), &McConfig::new(10_000, 1)),
            Err(Error::ZeroDenominatorSample { .. })
        ));
    }

    #[test]
    fn rare_event_is_flagged() {
        let d = builtin("rademacher").unwrap();
        let r = estimate_event(
            &d,
            30,
            &Event::window(int(30), int(2)),
            &McConfig::new(1000, 1),
        )
        .unwrap();
        assert!(r.has_flag(Flag::LowPrecision));
    }

    #[test]
    fn event_json_roundtrip() {
        let e = Event::window(int(2), int(2)).with_positivity(Positivity::Interior);
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["endpoint_window"]["A"], "2");
        let back: Event = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
    }
}
