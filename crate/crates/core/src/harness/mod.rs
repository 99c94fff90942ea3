//! Scaling scans: compute a probability over a grid of `n` (and `k` or `h`),
//! normalize it by the expected rate, and report the spread of the ratios.

mod counterexample;
mod report;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_integer::Roots;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::distributions;
use crate::error::{Error, Result};
use crate::exact::{self, Arithmetic, BallotTables, DpConfig};
use crate::mc::{self, Event, McConfig, Positivity};
use crate::rational::{self, Rational};
use crate::walk::{Flag, LatticeInfo, ProbResult, StepDistribution};

pub use counterexample::{
    counterexample_report, AsymptoticClaim, CounterexampleReport, TargetRule, DIAGNOSTIC_LABEL,
};
pub use report::{BoundCell, BoundReport, CellMethod, ScanKind, Thresholds};

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct Defaults {
    pub version: u32,
    pub ballot_ratio: Thresholds,
    pub stopping: Thresholds,
    pub second_moment: Thresholds,
    pub spread: Thresholds,
    pub stopping_limit_rel_tol: f64,
    pub second_moment_half_rel_tol: f64,
    pub corollary_factor: f64,
    pub clt_rel_tol_rademacher: f64,
    pub clt_rel_tol_lazy: f64,
    pub mc_sigmas: f64,
    pub mc_agreement_fraction: f64,
    pub mc_trials: u64,
}

impl Defaults {
    pub fn thresholds(&self, kind: ScanKind) -> Thresholds {
        match kind {
            ScanKind::BallotRatio => self.ballot_ratio,
            ScanKind::Stopping => self.stopping,
            ScanKind::Spread => self.spread,
            ScanKind::SecondMoment => self.second_moment,
        }
    }
}

/// Versioned pass thresholds shipped with the library.
pub fn defaults() -> &'static Defaults {
    static DEFAULTS: OnceLock<Defaults> = OnceLock::new();
    DEFAULTS.get_or_init(|| {
        serde_json::from_str(include_str!("defaults.json")).expect("bundled defaults parse")
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one scan cell, a function of the master seed and the cell's coordinates only.
pub fn cell_seed(master: u64, kind: ScanKind, n: u64, param_index: usize) -> u64 {
    let tag = kind as u64 + 1;
    splitmix64(splitmix64(splitmix64(master ^ tag) ^ n) ^ param_index as u64)
}

/// `⌈√n⌉`.
pub fn ceil_sqrt(n: u64) -> u64 {
    let r = n.sqrt();
    if r * r == n {
        r
    } else {
        r + 1
    }
}

/// A per-`n` parameter: a fixed value, or `scale·⌈√n⌉`.
///
/// Written as a rational (`"2"`, `"3/2"`), `"sqrt_n"`, or `"<scale>*sqrt_n"`.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamRule {
    Fixed(Rational),
    SqrtN { scale: f64 },
}

impl ParamRule {
    /// Target level `k`: the rule value moved up to the lattice of `S_n`.
    /// Returns the level and whether it was moved.
    pub fn level(&self, lattice: &LatticeInfo, n: u64) -> Result<(Rational, bool)> {
        let target = match self {
            ParamRule::Fixed(x) => x.clone(),
            ParamRule::SqrtN { scale } => rational::from_f64_exact(scale * ceil_sqrt(n) as f64)?,
        };
        let snapped = lattice.snap_up(n, &target)?;
        let moved = snapped != target;
        Ok((snapped, moved))
    }

    /// Barrier `h`: fixed values as given; `scale·snap(√n)` where `snap`
    /// rounds `⌈√n⌉` up to a multiple of the span.
    pub fn barrier(&self, lattice: &LatticeInfo, n: u64) -> Result<Rational> {
        match self {
            ParamRule::Fixed(x) => Ok(x.clone()),
            ParamRule::SqrtN { scale } => {
                let root = Rational::from_integer(ceil_sqrt(n).into());
                let snapped = (&root / &lattice.span_h).ceil() * &lattice.span_h;
                Ok(snapped * rational::from_f64_exact(*scale)?)
            }
        }
    }
}

impl fmt::Display for ParamRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamRule::Fixed(x) => write!(f, "{x}"),
            ParamRule::SqrtN { scale } if *scale == 1.0 => f.write_str("sqrt_n"),
            ParamRule::SqrtN { scale } => write!(f, "{scale}*sqrt_n"),
        }
    }
}

impl FromStr for ParamRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(prefix) = s.strip_suffix("sqrt_n") {
            let prefix = prefix.trim().trim_end_matches('*').trim();
            let scale = if prefix.is_empty() {
                1.0
            } else {
                prefix
                    .parse::<f64>()
                    .ok()
                    .filter(|c| c.is_finite() && *c >= 0.0)
                    .ok_or_else(|| Error::invalid(format!("bad rule `{s}`")))?
            };
            return Ok(ParamRule::SqrtN { scale });
        }
        Ok(ParamRule::Fixed(rational::parse(s)?))
    }
}

impl Serialize for ParamRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ParamRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            Value::Number(n) => n.to_string().parse().map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!(
                "expected a rule string, got {other}"
            ))),
        }
    }
}

/// `[16, 32]`, `{"powers_of_two": [4, 12]}` or `{"range": [1, 5000]}`
/// (both bounds inclusive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NGrid {
    List(Vec<u64>),
    PowersOfTwo { powers_of_two: [u32; 2] },
    Range { range: [u64; 2] },
}

impl NGrid {
    pub fn values(&self) -> Result<Vec<u64>> {
        let v: Vec<u64> = match self {
            NGrid::List(v) => v.clone(),
            NGrid::PowersOfTwo {
                powers_of_two: [a, b],
            } => {
                if *b >= 63 {
                    return Err(Error::invalid("powers_of_two exponent must be below 63"));
                }
                (*a..=*b).map(|e| 1u64 << e).collect()
            }
            NGrid::Range { range: [a, b] } => (*a..=*b).collect(),
        };
        if v.is_empty() || v.contains(&0) {
            return Err(Error::invalid("n grid must be nonempty with every n >= 1"));
        }
        Ok(v)
    }
}

/// Execution settings shared by all scans.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    pub dp: DpConfig,
    /// Trials per cell when a cell falls back to Monte Carlo.
    pub mc_trials: u64,
    pub seed: u64,
    pub thresholds: Thresholds,
}

impl ScanOptions {
    pub fn new(kind: ScanKind, seed: u64) -> Self {
        ScanOptions {
            dp: DpConfig::float(),
            mc_trials: defaults().mc_trials,
            seed,
            thresholds: defaults().thresholds(kind),
        }
    }

    fn mc(&self, kind: ScanKind, n: u64, index: usize) -> McConfig {
        McConfig::new(self.mc_trials, cell_seed(self.seed, kind, n, index))
    }
}

fn fits(err: &Error) -> bool {
    !matches!(err, Error::StateSpaceTooLarge { .. })
}

fn n_pow(n: u64, e: f64) -> f64 {
    (n as f64).powf(e)
}

fn max_one(x: &Rational) -> f64 {
    rational::to_f64(x).max(1.0)
}

/// `P{k <= S_n < k+A, S_i > 0 for 0 < i < n}·n^{3/2}/max{k,1}` over the grid.
pub fn scan_ballot_ratio(
    dist: &StepDistribution,
    n_grid: &[u64],
    k_rules: &[ParamRule],
    window_a: &Rational,
    opts: &ScanOptions,
) -> Result<BoundReport> {
    let kind = ScanKind::BallotRatio;
    let lattice = dist.lattice()?;
    lattice.require_acceptable(window_a)?;
    if !dist.is_mean_zero() {
        crate::walk::WalkQuery::new(dist, 1, Rational::zero(), window_a.clone())?;
    }
    let rows: Vec<Vec<BoundCell>> = n_grid
        .par_iter()
        .map(|&n| {
            let tables = match BallotTables::new(dist, n, &opts.dp) {
                Ok(t) => Some(t),
                Err(e) if !fits(&e) => None,
                Err(e) => return Err(e),
            };
            k_rules
                .iter()
                .enumerate()
                .map(|(i, rule)| {
                    let (k, snapped) = rule.level(&lattice, n)?;
                    if !k.is_positive() {
                        return Err(Error::invalid(format!(
                            "rule {rule} gives k = {k} <= 0 at n = {n}"
                        )));
                    }
                    let mut r = match &tables {
                        Some(t) => ProbResult::from_scalar(t.joint_window(&k, window_a)?),
                        None => {
                            let event = Event::window(k.clone(), window_a.clone())
                                .with_positivity(Positivity::Interior);
                            mc::estimate_event(dist, n, &event, &opts.mc(kind, n, i))?
                        }
                    };
                    if snapped {
                        r = r.with_flag(Flag::Snapped);
                    }
                    let norm = n_pow(n, 1.5) / max_one(&k);
                    Ok(BoundCell::from_result(
                        n,
                        Some((k.to_string(), rule.to_string())),
                        &r,
                        norm,
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(BoundReport::new(
        kind,
        dist.label(),
        rows.concat(),
        opts.thresholds,
        opts.seed,
    ))
}

/// `P{T_h > n}·√n/max{h,1}` over the grid.
pub fn scan_stopping(
    dist: &StepDistribution,
    n_grid: &[u64],
    h_rules: &[ParamRule],
    opts: &ScanOptions,
) -> Result<BoundReport> {
    let kind = ScanKind::Stopping;
    let lattice = dist.lattice()?;
    let jobs: Vec<(u64, usize)> = n_grid
        .iter()
        .flat_map(|&n| (0..h_rules.len()).map(move |i| (n, i)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(n, i)| {
            let h = h_rules[i].barrier(&lattice, n)?;
            let r = match exact::stopping_time_tail(dist, n, &h, &opts.dp) {
                Ok(r) => r,
                Err(e) if !fits(&e) => mc::estimate_event(
                    dist,
                    n,
                    &Event::default().with_barrier(h.clone()),
                    &opts.mc(kind, n, i),
                )?,
                Err(e) => return Err(e),
            };
            let norm = n_pow(n, 0.5) / max_one(&h);
            Ok(BoundCell::from_result(
                n,
                Some((h.to_string(), h_rules[i].to_string())),
                &r,
                norm,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::new(
        kind,
        dist.label(),
        cells,
        opts.thresholds,
        opts.seed,
    ))
}

/// `sup_x P{x <= S_n <= x+1}·√n`, every grid point read from one evolution.
pub fn scan_spread(
    dist: &StepDistribution,
    n_grid: &[u64],
    opts: &ScanOptions,
) -> Result<BoundReport> {
    let n_max = *n_grid
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("empty n grid"))?;
    let seq = exact::spread_sup_sequence(dist, n_max, &opts.dp)?;
    let cells = n_grid
        .iter()
        .map(|&n| {
            let r = ProbResult::from_scalar(seq[n as usize - 1].clone());
            BoundCell::from_result(n, None, &r, n_pow(n, 0.5))
        })
        .collect();
    Ok(BoundReport::new(
        ScanKind::Spread,
        dist.label(),
        cells,
        opts.thresholds,
        opts.seed,
    ))
}

/// `E[S_n² | T_h > n]/n`, or with the extra condition `S_n >= eps·√n`.
pub fn scan_second_moment(
    dist: &StepDistribution,
    n_grid: &[u64],
    h_rules: &[ParamRule],
    threshold_eps: Option<f64>,
    opts: &ScanOptions,
) -> Result<BoundReport> {
    let lattice = dist.lattice()?;
    let jobs: Vec<(u64, usize)> = n_grid
        .iter()
        .flat_map(|&n| (0..h_rules.len()).map(move |i| (n, i)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(n, i)| {
            let h = h_rules[i].barrier(&lattice, n)?;
            let threshold = threshold_eps.map(|eps| eps * (n as f64).sqrt());
            let param = Some((h.to_string(), h_rules[i].to_string()));
            match exact::conditional_second_moment(dist, n, &h, threshold, &opts.dp) {
                Ok(s) => Ok(BoundCell::from_result(
                    n,
                    param,
                    &ProbResult::from_scalar(s),
                    1.0 / n as f64,
                )),
                Err(Error::ZeroDenominator(_)) => {
                    let zero = ProbResult::from_scalar(crate::walk::Scalar::float(0.0, 0.0));
                    Ok(BoundCell::from_result(n, param, &zero, 0.0))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::new(
        ScanKind::SecondMoment,
        dist.label(),
        cells,
        opts.thresholds,
        opts.seed,
    ))
}

/// A distribution named in a config: a builtin name or a literal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistSpec {
    Name(String),
    Literal(Value),
}

impl DistSpec {
    pub fn resolve(&self) -> Result<StepDistribution> {
        match self {
            DistSpec::Name(name) => distributions::builtin(name),
            DistSpec::Literal(v) => StepDistribution::from_json(v),
        }
    }
}

/// A scan described in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub kind: ScanKind,
    pub dist: DistSpec,
    pub n_grid: NGrid,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_rule: Vec<ParamRule>,
    #[serde(
        rename = "A",
        default,
        with = "rational::serde_str::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub window_a: Option<Rational>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_rule: Vec<ParamRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_eps: Option<f64>,
    #[serde(default = "float_mode")]
    pub arithmetic: Arithmetic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
}

fn float_mode() -> Arithmetic {
    Arithmetic::Float
}

impl ScanConfig {
    pub fn from_json(v: &Value) -> Result<Self> {
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn options(&self, seed: u64) -> ScanOptions {
        let mut opts = ScanOptions::new(self.kind, seed);
        opts.dp.arithmetic = self.arithmetic;
        if let Some(cap) = self.state_cap {
            opts.dp.state_cap = cap;
        }
        if let Some(t) = self.mc_trials {
            opts.mc_trials = t;
        }
        if self.max_spread.is_some() || self.max_ratio.is_some() {
            opts.thresholds = Thresholds {
                max_spread: self.max_spread,
                max_ratio: self.max_ratio,
            };
        }
        opts
    }

    pub fn run(&self, seed: u64) -> Result<BoundReport> {
        let dist = self.dist.resolve()?;
        let grid = self.n_grid.values()?;
        let opts = self.options(seed);
        let rules_or = |rules: &[ParamRule], name: &str| -> Result<Vec<ParamRule>> {
            if rules.is_empty() {
                Err(Error::invalid(format!(
                    "{} scan needs `{name}`",
                    self.kind.as_str()
                )))
            } else {
                Ok(rules.to_vec())
            }
        };
        match self.kind {
            ScanKind::BallotRatio => {
                let a = self
                    .window_a
                    .clone()
                    .ok_or_else(|| Error::invalid("ballot_ratio scan needs `A`"))?;
                scan_ballot_ratio(&dist, &grid, &rules_or(&self.k_rule, "k_rule")?, &a, &opts)
            }
            ScanKind::Stopping => {
                scan_stopping(&dist, &grid, &rules_or(&self.h_rule, "h_rule")?, &opts)
            }
            ScanKind::Spread => scan_spread(&dist, &grid, &opts),
            ScanKind::SecondMoment => scan_second_moment(
                &dist,
                &grid,
                &rules_or(&self.h_rule, "h_rule")?,
                self.threshold_eps,
                &opts,
            ),
        }
    }
}
