use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rational;
use crate::walk::{Flag, ProbResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    BallotRatio,
    Stopping,
    Spread,
    SecondMoment,
}

impl ScanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanKind::BallotRatio => "ballot_ratio",
            ScanKind::Stopping => "stopping",
            ScanKind::Spread => "spread",
            ScanKind::SecondMoment => "second_moment",
        }
    }

    pub fn normalization(self) -> &'static str {
        match self {
            ScanKind::BallotRatio => {
                "P{k <= S_n < k+A, S_i > 0 for 0 < i < n} * n^(3/2) / max(k, 1)"
            }
            ScanKind::Stopping => "P{T_h > n} * sqrt(n) / max(h, 1)",
            ScanKind::Spread => "sup_x P{x <= S_n <= x+1} * sqrt(n)",
            ScanKind::SecondMoment => "E[S_n^2 | T_h > n (, S_n >= eps sqrt(n))] / n",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMethod {
    Exact,
    Mc,
}

/// One grid point of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCell {
    pub n: u64,
    /// `k` for ballot scans, `h` for stopping and second-moment scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    /// The rule that produced `param`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    pub raw_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_exact: Option<String>,
    /// `None` for unreachable cells.
    pub normalized_ratio: Option<f64>,
    pub method: CellMethod,
    pub stderr: f64,
    pub error_bound: f64,
    pub flags: Vec<Flag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl BoundCell {
    pub(crate) fn from_result(
        n: u64,
        param: Option<(String, String)>,
        r: &ProbResult,
        normalization: f64,
    ) -> Self {
        let reachable = r.value > 0.0;
        let mut flags = r.flags.clone();
        if !reachable && !flags.contains(&Flag::Unreachable) {
            flags.push(Flag::Unreachable);
        }
        let (param, rule) = param.map_or((None, None), |(p, r)| (Some(p), Some(r)));
        BoundCell {
            n,
            param,
            rule,
            raw_prob: r.value,
            raw_exact: r.exact.as_ref().map(|x| x.to_string()),
            normalized_ratio: reachable.then_some(r.value * normalization),
            method: if r.is_exact() {
                CellMethod::Exact
            } else {
                CellMethod::Mc
            },
            stderr: r.stderr,
            error_bound: r.error_bound,
            flags,
            seed: r.seed,
        }
    }

    pub fn is_reachable(&self) -> bool {
        self.normalized_ratio.is_some()
    }
}

/// Pass thresholds for a scan; either may be absent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Bound on `ratio_max / ratio_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_spread: Option<f64>,
    /// Bound on `ratio_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
}

/// Normalized-ratio statistics over a scan grid. `fitted_lower_c` and
/// `fitted_upper_c` are the smallest and largest observed ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub scan: ScanKind,
    pub dist: String,
    pub normalization: String,
    pub cells: Vec<BoundCell>,
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    pub fitted_lower_c: Option<f64>,
    pub fitted_upper_c: Option<f64>,
    pub ratio_spread: Option<f64>,
    pub thresholds: Thresholds,
    pub pass: bool,
    pub defaults_version: u32,
    pub seed: u64,
}

impl BoundReport {
    pub(crate) fn new(
        scan: ScanKind,
        dist: &str,
        cells: Vec<BoundCell>,
        thresholds: Thresholds,
        seed: u64,
    ) -> Self {
        let ratios: Vec<f64> = cells.iter().filter_map(|c| c.normalized_ratio).collect();
        let ratio_min = ratios.iter().copied().reduce(f64::min);
        let ratio_max = ratios.iter().copied().reduce(f64::max);
        let ratio_spread = ratio_min.zip(ratio_max).map(|(lo, hi)| hi / lo);
        let pass = match (ratio_spread, ratio_max) {
            (Some(spread), Some(max)) => {
                thresholds.max_spread.is_none_or(|t| spread <= t)
                    && thresholds.max_ratio.is_none_or(|t| max <= t)
            }
            _ => false,
        };
        BoundReport {
            scan,
            dist: dist.to_owned(),
            normalization: scan.normalization().to_owned(),
            cells,
            ratio_min,
            ratio_max,
            fitted_lower_c: ratio_min,
            fitted_upper_c: ratio_max,
            ratio_spread,
            thresholds,
            pass,
            defaults_version: super::defaults().version,
            seed,
        }
    }

    /// Most extreme ratios over the cells selected by `keep`.
    pub fn ratio_range(&self, keep: impl Fn(&BoundCell) -> bool) -> Option<(f64, f64)> {
        let r: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| keep(c))
            .filter_map(|c| c.normalized_ratio)
            .collect();
        Some((
            r.iter().copied().reduce(f64::min)?,
            r.iter().copied().reduce(f64::max)?,
        ))
    }

    /// Grid rows: `n, param, rule, raw_prob, raw_exact, normalized_ratio,
    /// method, stderr, error_bound, flags, seed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n",
            "param",
            "rule",
            "raw_prob",
            "raw_exact",
            "normalized_ratio",
            "method",
            "stderr",
            "error_bound",
            "flags",
            "seed",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.n.to_string(),
                c.param.clone().unwrap_or_default(),
                c.rule.clone().unwrap_or_default(),
                rational::sig17(c.raw_prob),
                c.raw_exact.clone().unwrap_or_default(),
                c.normalized_ratio.map(rational::sig17).unwrap_or_default(),
                match c.method {
                    CellMethod::Exact => "exact".into(),
                    CellMethod::Mc => "mc".into(),
                },
                rational::sig17(c.stderr),
                rational::sig17(c.error_bound),
                c.flags
                    .iter()
                    .map(|f| {
                        serde_json::to_value(f)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_owned))
                            .unwrap_or_default()
                    })
                    .collect::<Vec<_>>()
                    .join(";"),
                c.seed.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
