use std::ops::AddAssign;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::walk::{StepDistribution, StepSampler};

use super::{Event, Positivity};

/// Thresholds of an event expressed in the sampler's units.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Limits<T> {
    positivity: Positivity,
    /// Inclusive lower barrier.
    barrier: Option<T>,
    /// Half-open `[lo, hi)`.
    window: Option<(T, T)>,
}

/// Draws steps of a law. Finite laws sample scaled integers so every event
/// threshold is compared exactly; sampler-only laws work in `f64`.
#[derive(Clone, Debug)]
pub(crate) enum WalkSampler {
    Lattice(LatticeSampler),
    Float(Arc<dyn StepSampler>),
}

/// Inverse-CDF sampling against exact 128-bit cumulative thresholds.
#[derive(Clone, Debug)]
pub(crate) struct LatticeSampler {
    thresholds: Vec<u128>,
    values: Vec<i64>,
    scale: Rational,
}

impl LatticeSampler {
    fn new(dist: &StepDistribution) -> Result<Self> {
        let atoms = dist.require_atoms()?;
        let scale_int = rational::common_denominator(atoms.iter().map(|a| &a.value));
        let scale = Rational::from_integer(scale_int);
        let values = atoms
            .iter()
            .map(|a| {
                (&a.value * &scale).to_integer().to_i64().ok_or_else(|| {
                    Error::Overflow(format!("atom {} is too large to sample", a.value))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let two128 = Rational::from_integer(BigInt::from(1u8) << 128u32);
        let mut cumulative = Rational::zero();
        let mut thresholds = Vec::with_capacity(atoms.len() - 1);
        for a in &atoms[..atoms.len() - 1] {
            cumulative += &a.prob;
            let t = (&cumulative * &two128).floor().to_integer();
            thresholds.push(t.to_u128().unwrap_or(u128::MAX));
        }
        Ok(LatticeSampler {
            thresholds,
            values,
            scale,
        })
    }

    #[inline]
    fn draw(&self, rng: &mut dyn RngCore) -> i64 {
        let u: u128 = rng.random();
        self.values[self.thresholds.partition_point(|&t| t <= u)]
    }

    /// Smallest scaled integer `s` with `s >= x·scale`.
    fn ceil(&self, x: &Rational) -> Result<i64> {
        rational::ceil_i64(&(x * &self.scale))
    }
}

fn walk<T>(
    n: u64,
    limits: &Limits<T>,
    mut draw: impl FnMut() -> T,
    stop_early: bool,
) -> (bool, bool)
where
    T: Copy + PartialOrd + AddAssign + Default,
{
    let zero = T::default();
    let mut s = T::default();
    let mut constraints_ok = true;
    for i in 1..=n {
        s += draw();
        let positive_required = match limits.positivity {
            Positivity::None => false,
            Positivity::Interior => i < n,
            Positivity::Prefix => true,
        };
        if (positive_required && s <= zero) || limits.barrier.is_some_and(|b| s < b) {
            constraints_ok = false;
            if stop_early {
                return (false, false);
            }
        }
    }
    let window_ok = limits.window.is_none_or(|(lo, hi)| s >= lo && s < hi);
    (window_ok, constraints_ok)
}

impl WalkSampler {
    pub fn new(dist: &StepDistribution) -> Result<Self> {
        match dist.sampler() {
            Some(s) => Ok(WalkSampler::Float(Arc::clone(s))),
            None => Ok(WalkSampler::Lattice(LatticeSampler::new(dist)?)),
        }
    }

    pub fn limits(&self, event: &Event) -> Result<EventLimits> {
        if let Some(h) = &event.barrier_h {
            if h < &Rational::zero() {
                return Err(Error::invalid(format!(
                    "barrier h must be nonnegative, got {h}"
                )));
            }
        }
        if let Some((_, a)) = &event.endpoint_window {
            if a <= &Rational::zero() {
                return Err(Error::invalid(format!(
                    "window width must be positive, got {a}"
                )));
            }
        }
        Ok(match self {
            WalkSampler::Lattice(l) => EventLimits::Lattice(Limits {
                positivity: event.positivity,
                barrier: event.barrier_h.as_ref().map(|h| l.ceil(&-h)).transpose()?,
                window: event
                    .endpoint_window
                    .as_ref()
                    .map(|(k, a)| Ok::<_, Error>((l.ceil(k)?, l.ceil(&(k + a))?)))
                    .transpose()?,
            }),
            WalkSampler::Float(_) => EventLimits::Float(Limits {
                positivity: event.positivity,
                barrier: event.barrier_h.as_ref().map(|h| -rational::to_f64(h)),
                window: event
                    .endpoint_window
                    .as_ref()
                    .map(|(k, a)| (rational::to_f64(k), rational::to_f64(&(k + a)))),
            }),
        })
    }

    fn run(
        &self,
        n: u64,
        limits: &EventLimits,
        rng: &mut dyn RngCore,
        stop_early: bool,
    ) -> (bool, bool) {
        match (self, limits) {
            (WalkSampler::Lattice(l), EventLimits::Lattice(lim)) => {
                walk(n, lim, || l.draw(rng), stop_early)
            }
            (WalkSampler::Float(s), EventLimits::Float(lim)) => {
                walk(n, lim, || s.sample(rng), stop_early)
            }
            _ => unreachable!("limits built by a different sampler"),
        }
    }

    /// `true` when every part of the event holds.
    pub fn event_hit(&self, n: u64, limits: &EventLimits, rng: &mut dyn RngCore) -> bool {
        let (window, constraints) = self.run(n, limits, rng, true);
        window && constraints
    }

    /// `(window hit, path constraints hold)` from one full path.
    pub fn window_and_positivity(
        &self,
        n: u64,
        limits: &EventLimits,
        rng: &mut dyn RngCore,
    ) -> (bool, bool) {
        self.run(n, limits, rng, false)
    }

    /// Draws one step as a float, for callers that need raw step values.
    pub fn draw_f64(&self, rng: &mut dyn RngCore) -> f64 {
        match self {
            WalkSampler::Lattice(l) => {
                let v = l.draw(rng);
                rational::to_f64(&(Rational::from_integer(v.into()) / &l.scale))
            }
            WalkSampler::Float(s) => s.sample(rng),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum EventLimits {
    Lattice(Limits<i64>),
    Float(Limits<f64>),
}
