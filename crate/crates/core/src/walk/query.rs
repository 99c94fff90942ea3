use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

use super::StepDistribution;

/// A question about an `n`-step walk with mean-zero steps.
#[derive(Clone, Debug)]
pub struct WalkQuery<'a> {
    pub dist: &'a StepDistribution,
    pub n: u64,
    /// Target level; windows are `[k, k + window_a)`.
    pub k: Rational,
    pub window_a: Rational,
    pub barrier_h: Rational,
}

impl<'a> WalkQuery<'a> {
    pub fn new(
        dist: &'a StepDistribution,
        n: u64,
        k: Rational,
        window_a: Rational,
    ) -> Result<Self> {
        if !dist.is_mean_zero() {
            return Err(Error::NonZeroMean {
                label: dist.label().to_owned(),
                mean: dist
                    .mean_exact()
                    .map(|m| m.to_string())
                    .unwrap_or_else(|| dist.mean().to_string()),
            });
        }
        if n == 0 {
            return Err(Error::invalid("a walk query needs n >= 1"));
        }
        if !window_a.is_positive() {
            return Err(Error::invalid(format!(
                "window width must be positive, got {window_a}"
            )));
        }
        Ok(WalkQuery {
            dist,
            n,
            k,
            window_a,
            barrier_h: Rational::zero(),
        })
    }

    pub fn with_barrier(mut self, h: Rational) -> Result<Self> {
        if h.is_negative() {
            return Err(Error::invalid(format!(
                "barrier h must be nonnegative, got {h}"
            )));
        }
        self.barrier_h = h;
        Ok(self)
    }

    /// Checks that the window is acceptable for exact lattice computation.
    pub fn require_exact_lattice(&self) -> Result<()> {
        self.dist.lattice()?.require_acceptable(&self.window_a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Multiset {
    elements: Vec<Rational>,
}

impl Multiset {
    pub fn new(elements: Vec<Rational>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::invalid("multiset must be nonempty"));
        }
        Ok(Multiset { elements })
    }

    pub fn elements(&self) -> &[Rational] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total(&self) -> Rational {
        self.elements.iter().sum()
    }
}

/// A real quantity computed by the exact engine.
///
/// In rational mode `exact` holds the value and `error_bound` is zero; in
/// float mode `error_bound` bounds the accumulated rounding error.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalar {
    pub value: f64,
    pub exact: Option<Rational>,
    pub error_bound: f64,
}

impl Scalar {
    pub fn exact(r: Rational) -> Self {
        Scalar {
            value: rational::to_f64(&r),
            exact: Some(r),
            error_bound: 0.0,
        }
    }

    pub fn float(value: f64, error_bound: f64) -> Self {
        Scalar {
            value,
            exact: None,
            error_bound,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.exact {
            Some(r) => r.is_zero(),
            None => self.value == 0.0,
        }
    }

    /// `self / other`, propagating the float error bound to first order.
    pub fn ratio(&self, other: &Scalar) -> Result<Scalar> {
        if other.is_zero() {
            return Err(Error::ZeroDenominator("denominator is zero".into()));
        }
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Ok(Scalar::exact(a / b)),
            _ => {
                let value = self.value / other.value;
                let slack = (other.value - other.error_bound).max(f64::MIN_POSITIVE);
                let error_bound = (self.error_bound + value.abs() * other.error_bound) / slack
                    + value.abs() * f64::EPSILON;
                Ok(Scalar::float(value, error_bound))
            }
        }
    }

    pub fn rendered_exact(&self) -> Option<String> {
        self.exact.as_ref().map(|r| r.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactRational,
    ExactFloat,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactRational => "exact-rational",
            Method::ExactFloat => "exact-float",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Fewer hits than the configured minimum.
    LowPrecision,
    /// The requested target cannot be reached in `n` steps.
    Unreachable,
    /// A requested level was moved to the nearest lattice point above it.
    Snapped,
}

/// A probability together with how it was obtained.
///
/// For Monte Carlo results `value = hits / trials` and
/// `stderr = sqrt(value (1 - value) / trials)`. Conditional estimates report
/// the conditioning hits as `trials` so the same identities hold; the total
/// sample size is then in `total_trials`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbResult {
    pub value: f64,
    #[serde(
        with = "rational::serde_str::option",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub exact: Option<Rational>,
    pub method: Method,
    pub stderr: f64,
    pub trials: u64,
    pub hits: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub error_bound: f64,
    #[serde(default)]
    pub flags: Vec<Flag>,
}

impl ProbResult {
    pub fn from_scalar(s: Scalar) -> Self {
        let method = if s.exact.is_some() {
            Method::ExactRational
        } else {
            Method::ExactFloat
        };
        ProbResult {
            value: s.value,
            exact: s.exact,
            method,
            stderr: 0.0,
            trials: 0,
            hits: 0,
            total_trials: None,
            seed: None,
            error_bound: s.error_bound,
            flags: Vec::new(),
        }
    }

    pub fn monte_carlo(hits: u64, trials: u64, seed: u64, min_hits: u64) -> Self {
        let value = if trials == 0 {
            0.0
        } else {
            hits as f64 / trials as f64
        };
        let stderr = if trials == 0 {
            0.0
        } else {
            (value * (1.0 - value) / trials as f64).sqrt()
        };
        let mut flags = Vec::new();
        if hits < min_hits {
            flags.push(Flag::LowPrecision);
        }
        ProbResult {
            value,
            exact: None,
            method: Method::MonteCarlo,
            stderr,
            trials,
            hits,
            total_trials: None,
            seed: Some(seed),
            error_bound: 0.0,
            flags,
        }
    }

    pub fn with_flag(mut self, flag: Flag) -> Self {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
        self
    }

    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn scalar(&self) -> Scalar {
        Scalar {
            value: self.value,
            exact: self.exact.clone(),
            error_bound: self.error_bound,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.method != Method::MonteCarlo
    }

    /// `|value − reference| <= sigmas · stderr`.
    pub fn within(&self, reference: f64, sigmas: f64) -> bool {
        (self.value - reference).abs() <= sigmas * self.stderr
    }
}
