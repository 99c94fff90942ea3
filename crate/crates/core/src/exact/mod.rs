//! Exact constrained-path dynamic programming over the walk lattice.
//!
//! Every operation evolves the law of `S_t` one step at a time, pruning
//! states that violate the path constraint, then reads off window masses.

mod table;

use std::fmt;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::walk::{Flag, ProbResult, Scalar, StepDistribution, WalkQuery};

pub use table::{Evolution, PathLawTable};

pub const DEFAULT_STATE_CAP: u64 = 20_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arithmetic {
    #[default]
    Rational,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpConfig {
    pub arithmetic: Arithmetic,
    pub state_cap: u64,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            arithmetic: Arithmetic::Rational,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

impl DpConfig {
    pub fn float() -> Self {
        DpConfig {
            arithmetic: Arithmetic::Float,
            ..Default::default()
        }
    }
}

/// Path constraint enforced during the DP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    None,
    /// `S_i > 0` for `1 <= i <= n-1`.
    PositiveInterior,
    /// `S_i >= level` for `1 <= i <= n`.
    AtLeast(Rational),
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::None => f.write_str("none"),
            Constraint::PositiveInterior => f.write_str("strictly-positive-interior"),
            Constraint::AtLeast(level) => write!(f, "at-least({level})"),
        }
    }
}

fn start(dist: &StepDistribution, n: u64, cfg: &DpConfig) -> Result<Evolution> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let evo = Evolution::new(dist, cfg.arithmetic)?;
    evo.kernel().check_capacity(n, cfg.state_cap)?;
    Ok(evo)
}

/// Law of `S_n` restricted to paths satisfying `constraint`.
pub fn constrained_endpoint_law(
    dist: &StepDistribution,
    n: u64,
    constraint: Constraint,
    cfg: &DpConfig,
) -> Result<PathLawTable> {
    let mut evo = start(dist, n, cfg)?;
    for t in 1..=n {
        evo.step();
        let enforce = match constraint {
            Constraint::None => false,
            Constraint::PositiveInterior => t < n,
            Constraint::AtLeast(_) => true,
        };
        if enforce {
            evo.enforce(&constraint)?;
        }
    }
    Ok(evo.into_table(constraint))
}

fn result(s: Scalar) -> ProbResult {
    let unreachable = s.is_zero();
    let r = ProbResult::from_scalar(s);
    if unreachable {
        r.with_flag(Flag::Unreachable)
    } else {
        r
    }
}

/// `P{k <= S_n < k+A, S_i > 0 for 0 < i < n}`.
pub fn positive_path_window_prob(q: &WalkQuery<'_>, cfg: &DpConfig) -> Result<ProbResult> {
    q.require_exact_lattice()?;
    if !q.k.is_positive() {
        return Err(Error::invalid(format!("k must be positive, got {}", q.k)));
    }
    let table = constrained_endpoint_law(q.dist, q.n, Constraint::PositiveInterior, cfg)?;
    Ok(result(table.window_mass(&q.k, &q.window_a)?))
}

/// `P{k <= S_n < k+A}`.
pub fn endpoint_window_prob(
    dist: &StepDistribution,
    n: u64,
    k: &Rational,
    window_a: &Rational,
    cfg: &DpConfig,
) -> Result<ProbResult> {
    if !window_a.is_positive() {
        return Err(Error::invalid(format!(
            "window width must be positive, got {window_a}"
        )));
    }
    let table = constrained_endpoint_law(dist, n, Constraint::None, cfg)?;
    Ok(result(table.window_mass(k, window_a)?))
}

/// The joint (positive interior) and unconstrained laws of `S_n`, from which
/// ballot probabilities for any window can be read without rerunning the DP.
#[derive(Clone, Debug)]
pub struct BallotTables {
    pub joint: PathLawTable,
    pub endpoint: PathLawTable,
}

impl BallotTables {
    pub fn new(dist: &StepDistribution, n: u64, cfg: &DpConfig) -> Result<Self> {
        Ok(BallotTables {
            joint: constrained_endpoint_law(dist, n, Constraint::PositiveInterior, cfg)?,
            endpoint: constrained_endpoint_law(dist, n, Constraint::None, cfg)?,
        })
    }

    pub fn joint_window(&self, k: &Rational, window_a: &Rational) -> Result<Scalar> {
        self.joint.window_mass(k, window_a)
    }

    pub fn endpoint_window(&self, k: &Rational, window_a: &Rational) -> Result<Scalar> {
        self.endpoint.window_mass(k, window_a)
    }

    pub fn conditional(&self, k: &Rational, window_a: &Rational) -> Result<Scalar> {
        let den = self.endpoint_window(k, window_a)?;
        if den.is_zero() {
            return Err(Error::ZeroDenominator(format!(
                "P{{{k} <= S_{} < {k} + {window_a}}} is zero",
                self.endpoint.n()
            )));
        }
        self.joint_window(k, window_a)?.ratio(&den)
    }
}

/// `P{S_i > 0 for all 0 < i < n | k <= S_n < k+A}`.
pub fn conditional_ballot_prob(q: &WalkQuery<'_>, cfg: &DpConfig) -> Result<ProbResult> {
    q.require_exact_lattice()?;
    if !q.k.is_positive() {
        return Err(Error::invalid(format!("k must be positive, got {}", q.k)));
    }
    let tables = BallotTables::new(q.dist, q.n, cfg)?;
    Ok(ProbResult::from_scalar(
        tables.conditional(&q.k, &q.window_a)?,
    ))
}

/// `P{S_i > 0 for all 1 <= i <= m}`.
pub fn positive_prefix_prob(dist: &StepDistribution, m: u64, cfg: &DpConfig) -> Result<ProbResult> {
    let mut evo = start(dist, m, cfg)?;
    for _ in 0..m {
        evo.step();
        evo.enforce(&Constraint::PositiveInterior)?;
    }
    Ok(result(evo.into_table(Constraint::PositiveInterior).total()))
}

fn barrier(h: &Rational) -> Result<Constraint> {
    if h.is_negative() {
        return Err(Error::invalid(format!(
            "barrier h must be nonnegative, got {h}"
        )));
    }
    Ok(Constraint::AtLeast(-h))
}

/// `P{T_h > n} = P{S_i >= -h for all 1 <= i <= n}`.
pub fn stopping_time_tail(
    dist: &StepDistribution,
    n: u64,
    h: &Rational,
    cfg: &DpConfig,
) -> Result<ProbResult> {
    let table = constrained_endpoint_law(dist, n, barrier(h)?, cfg)?;
    Ok(result(table.total()))
}

/// `E[S_n² | T_h > n]`, or `E[S_n² | T_h > n, S_n >= threshold]`.
pub fn conditional_second_moment(
    dist: &StepDistribution,
    n: u64,
    h: &Rational,
    threshold: Option<f64>,
    cfg: &DpConfig,
) -> Result<Scalar> {
    let threshold = match threshold {
        Some(x) if x < 0.0 || !x.is_finite() => {
            return Err(Error::invalid(format!(
                "threshold must be a nonnegative number, got {x}"
            )))
        }
        Some(x) => Some(rational::from_f64_exact(x)?),
        None => None,
    };
    let table = constrained_endpoint_law(dist, n, barrier(h)?, cfg)?;
    let (mass, moment) = table.second_moment_parts(threshold.as_ref())?;
    if mass.is_zero() {
        return Err(Error::ZeroDenominator(format!(
            "no surviving paths for n={n}, h={h}, threshold={}",
            threshold
                .map(|t| t.to_string())
                .unwrap_or_else(|| "none".into())
        )));
    }
    moment.ratio(&mass)
}

/// `sup_x P{x <= S_n <= x+1}`.
pub fn spread_sup(dist: &StepDistribution, n: u64, cfg: &DpConfig) -> Result<Scalar> {
    constrained_endpoint_law(dist, n, Constraint::None, cfg)?.spread_sup()
}

/// `spread_sup(dist, n)` for every `n` in `1..=n_max`, from a single evolution.
pub fn spread_sup_sequence(
    dist: &StepDistribution,
    n_max: u64,
    cfg: &DpConfig,
) -> Result<Vec<Scalar>> {
    let mut evo = start(dist, n_max, cfg)?;
    let mut out = Vec::with_capacity(n_max as usize);
    for _ in 0..n_max {
        evo.step();
        out.push(evo.snapshot(Constraint::None).spread_sup()?);
    }
    Ok(out)
}

/// Survival probabilities `P{T_h > n}` for `n = 1..=n_max` from one evolution.
pub fn stopping_time_tail_sequence(
    dist: &StepDistribution,
    n_max: u64,
    h: &Rational,
    cfg: &DpConfig,
) -> Result<Vec<Scalar>> {
    let constraint = barrier(h)?;
    let mut evo = start(dist, n_max, cfg)?;
    let mut out = Vec::with_capacity(n_max as usize);
    for _ in 0..n_max {
        evo.step();
        evo.enforce(&constraint)?;
        out.push(evo.snapshot(constraint.clone()).total());
    }
    Ok(out)
}

/// The mass of `S_n = x` exactly at a lattice point.
pub fn point_mass(dist: &StepDistribution, n: u64, x: &Rational, cfg: &DpConfig) -> Result<Scalar> {
    let lattice = dist.lattice()?;
    lattice.require_on_lattice(n, x)?;
    let table = constrained_endpoint_law(dist, n, Constraint::None, cfg)?;
    Ok(table.mass_of(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn rademacher() -> StepDistribution {
        StepDistribution::finite(
            "rademacher",
            vec![(int(-1), ratio(1, 2)), (int(1), ratio(1, 2))],
        )
        .unwrap()
    }

    fn lazy() -> StepDistribution {
        let third = ratio(1, 3);
        StepDistribution::finite(
            "lazy",
            vec![
                (int(-1), third.clone()),
                (int(0), third.clone()),
                (int(1), third),
            ],
        )
        .unwrap()
    }

    fn cfg() -> DpConfig {
        DpConfig::default()
    }

    fn exact(r: &ProbResult) -> Rational {
        r.exact.clone().unwrap()
    }

    #[test]
    fn unconstrained_two_steps() {
        let t = constrained_endpoint_law(&rademacher(), 2, Constraint::None, &cfg()).unwrap();
        let got: Vec<_> = (0..t.len())
            .map(|s| (t.point_at(s), t.exact_mass_at(s).unwrap()))
            .collect();
        assert_eq!(
            got,
            vec![
                (int(-2), ratio(1, 4)),
                (int(0), ratio(1, 2)),
                (int(2), ratio(1, 4))
            ]
        );
    }

    #[test]
    fn positive_interior_four_steps() {
        let t = constrained_endpoint_law(&rademacher(), 4, Constraint::PositiveInterior, &cfg())
            .unwrap();
        assert_eq!(t.mass_of(&int(2)).exact, Some(ratio(2, 16)));
    }

    #[test]
    fn at_least_zero_two_steps() {
        let t = constrained_endpoint_law(&rademacher(), 2, Constraint::AtLeast(int(0)), &cfg())
            .unwrap();
        assert_eq!(t.mass_of(&int(0)).exact, Some(ratio(1, 4)));
        assert_eq!(t.mass_of(&int(2)).exact, Some(ratio(1, 4)));
        assert_eq!(t.total().exact, Some(ratio(1, 2)));
    }

    #[test]
    fn window_probabilities() {
        let d = rademacher();
        let q = |n, k| WalkQuery::new(&d, n, int(k), int(2)).unwrap();
        assert_eq!(
            exact(&positive_path_window_prob(&q(4, 2), &cfg()).unwrap()),
            ratio(1, 8)
        );
        assert_eq!(
            exact(&positive_path_window_prob(&q(2, 2), &cfg()).unwrap()),
            ratio(1, 4)
        );
        let zero = positive_path_window_prob(&q(3, 4), &cfg()).unwrap();
        assert_eq!(exact(&zero), int(0));
        assert!(zero.has_flag(Flag::Unreachable));
        assert_eq!(
            exact(&endpoint_window_prob(&d, 4, &int(2), &int(2), &cfg()).unwrap()),
            ratio(1, 4)
        );
        assert_eq!(
            exact(&endpoint_window_prob(&d, 4, &int(-4), &int(2), &cfg()).unwrap()),
            ratio(1, 16)
        );
        assert_eq!(
            exact(&endpoint_window_prob(&d, 1, &int(0), &int(2), &cfg()).unwrap()),
            ratio(1, 2)
        );
    }

    #[test]
    fn conditional_ballot() {
        let d = rademacher();
        let q = |n, k| WalkQuery::new(&d, n, int(k), int(2)).unwrap();
        assert_eq!(
            exact(&conditional_ballot_prob(&q(4, 2), &cfg()).unwrap()),
            ratio(1, 2)
        );
        assert_eq!(
            exact(&conditional_ballot_prob(&q(2, 2), &cfg()).unwrap()),
            int(1)
        );
        assert_eq!(
            exact(&conditional_ballot_prob(&q(6, 2), &cfg()).unwrap()),
            ratio(1, 3)
        );
        assert!(matches!(
            conditional_ballot_prob(&q(4, 6), &cfg()),
            Err(Error::ZeroDenominator(_))
        ));
        let narrow = WalkQuery::new(&d, 4, int(3), int(1)).unwrap();
        assert!(matches!(
            conditional_ballot_prob(&narrow, &cfg()),
            Err(Error::UnacceptableWindow { .. })
        ));
    }

    #[test]
    fn prefix_and_stopping() {
        let d = rademacher();
        assert_eq!(
            exact(&positive_prefix_prob(&d, 1, &cfg()).unwrap()),
            ratio(1, 2)
        );
        assert_eq!(
            exact(&positive_prefix_prob(&d, 2, &cfg()).unwrap()),
            ratio(1, 4)
        );
        assert_eq!(
            exact(&positive_prefix_prob(&d, 4, &cfg()).unwrap()),
            ratio(3, 16)
        );
        assert_eq!(
            exact(&stopping_time_tail(&d, 2, &int(0), &cfg()).unwrap()),
            ratio(1, 2)
        );
        assert_eq!(
            exact(&stopping_time_tail(&d, 1, &int(1), &cfg()).unwrap()),
            int(1)
        );
        assert_eq!(
            exact(&stopping_time_tail(&d, 4, &int(0), &cfg()).unwrap()),
            ratio(3, 8)
        );
        let seq = stopping_time_tail_sequence(&d, 4, &int(0), &cfg()).unwrap();
        assert_eq!(seq[1].exact, Some(ratio(1, 2)));
        assert_eq!(seq[3].exact, Some(ratio(3, 8)));
    }

    #[test]
    fn second_moments() {
        let d = rademacher();
        let m = |n, t| {
            conditional_second_moment(&d, n, &int(0), t, &cfg())
                .unwrap()
                .exact
                .unwrap()
        };
        assert_eq!(m(2, None), int(2));
        assert_eq!(m(2, Some(1.0)), int(4));
        assert_eq!(m(1, None), int(1));
        assert!(matches!(
            conditional_second_moment(&d, 2, &int(0), Some(5.0), &cfg()),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn spreads() {
        assert_eq!(
            spread_sup(&rademacher(), 1, &cfg()).unwrap().exact,
            Some(ratio(1, 2))
        );
        assert_eq!(
            spread_sup(&rademacher(), 2, &cfg()).unwrap().exact,
            Some(ratio(1, 2))
        );
        assert_eq!(
            spread_sup(&lazy(), 1, &cfg()).unwrap().exact,
            Some(ratio(2, 3))
        );
        let seq = spread_sup_sequence(&rademacher(), 4, &cfg()).unwrap();
        assert_eq!(seq[3].exact, Some(ratio(6, 16)));
    }

    #[test]
    fn float_mode_tracks_rational_mode() {
        let d = lazy();
        let exact = constrained_endpoint_law(&d, 60, Constraint::PositiveInterior, &cfg()).unwrap();
        let float =
            constrained_endpoint_law(&d, 60, Constraint::PositiveInterior, &DpConfig::float())
                .unwrap();
        assert!(!float.is_exact());
        assert_eq!(exact.len(), float.len());
        for slot in 0..exact.len() {
            let diff = (exact.mass_at(slot) - float.mass_at(slot)).abs();
            assert!(
                diff <= float.error_bound(),
                "slot {slot}: {diff} > {}",
                float.error_bound()
            );
        }
        let te = exact.total();
        let tf = float.total();
        assert!((te.value - tf.value).abs() <= tf.error_bound);
    }

    #[test]
    fn state_cap() {
        let small = DpConfig {
            state_cap: 10,
            ..DpConfig::default()
        };
        assert!(matches!(
            constrained_endpoint_law(&rademacher(), 100, Constraint::None, &small),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn point_mass_checks_lattice() {
        assert_eq!(
            point_mass(&rademacher(), 4, &int(0), &cfg()).unwrap().exact,
            Some(ratio(6, 16))
        );
        assert!(matches!(
            point_mass(&rademacher(), 4, &int(1), &cfg()),
            Err(Error::OffLattice { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let t = constrained_endpoint_law(&rademacher(), 2, Constraint::AtLeast(int(0)), &cfg())
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "lattice_point_num,lattice_point_den,mass (at-least(0))"
        );
        assert_eq!(lines.next().unwrap(), "0,1,2.5000000000000000e-1");
        assert_eq!(lines.next().unwrap(), "2,1,2.5000000000000000e-1");
    }
}
