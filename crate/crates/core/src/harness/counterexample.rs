use serde::{Deserialize, Serialize};

use crate::distributions::{Family, LeveledDistribution};
use crate::error::{Error, Result};
use crate::exact::{BallotTables, DpConfig};
use crate::mc::{self, Event, LevelSummary, McConfig, Positivity};
use crate::rational::{self, Rational};
use crate::walk::{Flag, ProbResult};

use super::ceil_sqrt;

pub const DIAGNOSTIC_LABEL: &str =
    "finite-n diagnostic: asymptotic rate not testable at this scale";

/// How the target level `k` is chosen from `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRule {
    N,
    SqrtN,
}

impl TargetRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(TargetRule::N),
            "sqrt_n" => Ok(TargetRule::SqrtN),
            other => Err(Error::invalid(format!(
                "target rule must be `n` or `sqrt_n`, got `{other}`"
            ))),
        }
    }

    fn target(self, n: u64) -> u64 {
        match self {
            TargetRule::N => n,
            TargetRule::SqrtN => ceil_sqrt(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticClaim {
    pub statement: String,
    pub testable: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub label: String,
    pub family: Family,
    pub max_level: u32,
    pub n: u64,
    #[serde(with = "rational::serde_str")]
    pub k: Rational,
    #[serde(rename = "A", with = "rational::serde_str")]
    pub window_a: Rational,
    pub snapped: bool,
    /// `P{k <= S_n < k+A}`.
    pub endpoint: ProbResult,
    /// `P{k <= S_n < k+A, S_i > 0 for 0 < i < n}`.
    pub joint: ProbResult,
    /// `None` when the endpoint window has probability zero.
    pub conditional: Option<ProbResult>,
    pub bertrand: f64,
    /// `conditional / (k/n)`.
    pub ratio_to_bertrand: Option<f64>,
    pub mc_conditional: Option<ProbResult>,
    pub level_summary: LevelSummary,
    pub folded_tail_log2_bound: f64,
    pub approximated: bool,
    pub asymptotic_claims: Vec<AsymptoticClaim>,
}

fn claims(family: Family) -> Vec<AsymptoticClaim> {
    let (statements, regime): (&[&str], &str) = match family {
        Family::Tower => (
            &[
                "P{S_n = n} = Omega(n^(-7/2))",
                "P{S_i > 0 for 0 < i < n | S_n = n} = O(1/sqrt(n))",
            ],
            "requires n = f(k)^2 for large k; f(4)^2 = 2^32 steps with atoms up to 2^65536",
        ),
        Family::Heavy => (
            &[
                "P{S_n = sqrt(n)} = Omega(1/(sqrt(log n) n^(5/8)))",
                "P{S_n = sqrt(n), S_i > 0 for 0 < i < n} = O(log(n)^(13/2) / n^(5/4))",
                "P{S_i > 0 for 0 < i < n | S_n = sqrt(n)} = O(log(n)^7 / n^(5/8))",
            ],
            "requires n = g(k)^2 for large k; g(4)^2 = 2^32 steps with atoms up to 2^16",
        ),
    };
    statements
        .iter()
        .map(|s| AsymptoticClaim {
            statement: (*s).to_owned(),
            testable: false,
            reason: regime.to_owned(),
        })
        .collect()
}

/// Exact endpoint, joint and conditional values for a counterexample law at
/// one `(n, k)`, with a Monte Carlo cross-check and a level summary. Falls back
/// to Monte Carlo when the DP does not fit.
pub fn counterexample_report(
    dist: &LeveledDistribution,
    n: u64,
    window_a: &Rational,
    rule: TargetRule,
    mc_cfg: &McConfig,
    dp: &DpConfig,
) -> Result<CounterexampleReport> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let base = &dist.base;
    let lattice = base.lattice()?;
    lattice.require_acceptable(window_a)?;
    let target = Rational::from_integer(rule.target(n).into());
    let k = lattice.snap_up(n, &target)?;
    let snapped = k != target;
    let window = Event::window(k.clone(), window_a.clone());
    let mc_conditional = match mc::estimate_conditional(base, n, &k, window_a, mc_cfg) {
        Ok(r) => Some(r),
        Err(Error::ZeroDenominatorSample { .. }) => None,
        Err(e) => return Err(e),
    };
    let (endpoint, joint, conditional) = match BallotTables::new(base, n, dp) {
        Ok(t) => {
            let endpoint = ProbResult::from_scalar(t.endpoint_window(&k, window_a)?);
            let joint = ProbResult::from_scalar(t.joint_window(&k, window_a)?);
            let conditional = match t.conditional(&k, window_a) {
                Ok(s) => Some(ProbResult::from_scalar(s)),
                Err(Error::ZeroDenominator(_)) => None,
                Err(e) => return Err(e),
            };
            (endpoint, joint, conditional)
        }
        Err(Error::StateSpaceTooLarge { .. }) => {
            let endpoint = mc::estimate_event(base, n, &window, mc_cfg)?;
            let joint = mc::estimate_event(
                base,
                n,
                &window.clone().with_positivity(Positivity::Interior),
                mc_cfg,
            )?;
            (endpoint, joint, mc_conditional.clone())
        }
        Err(e) => return Err(e),
    };
    let bertrand = rational::to_f64(&k) / n as f64;
    let ratio_to_bertrand = conditional.as_ref().map(|c| c.value / bertrand);
    let mut tag = |r: ProbResult| {
        if snapped {
            r.with_flag(Flag::Snapped)
        } else {
            r
        }
    };
    let (endpoint, joint) = (tag(endpoint), tag(joint));
    let conditional = conditional.map(&mut tag);
    let level_summary =
        mc::summarize_levels(dist, n, mc::sample_level_decomposition(dist, n, mc_cfg)?);
    Ok(CounterexampleReport {
        label: DIAGNOSTIC_LABEL.to_owned(),
        family: dist.family,
        max_level: dist.max_level,
        n,
        k,
        window_a: window_a.clone(),
        snapped,
        endpoint,
        joint,
        conditional,
        bertrand,
        ratio_to_bertrand,
        mc_conditional,
        level_summary,
        folded_tail_log2_bound: dist.folded_tail_log2_bound,
        approximated: dist.approximated,
        asymptotic_claims: claims(dist.family),
    })
}
