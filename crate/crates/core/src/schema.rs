//! Versioned JSON documents emitted by the command-line tool, and the
//! validator that re-reads them.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::approx::CltRow;
use crate::distributions::LeveledDistribution;
use crate::error::{Error, Result};
use crate::harness::{BoundReport, CounterexampleReport, ScanConfig};
use crate::mc::ChernoffRecord;
use crate::walk::{LatticeInfo, Method, ProbResult, StepDistribution};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rational,
    Float,
    Mc,
    /// Exact and Monte Carlo cells in one document.
    Mixed,
}

impl Mode {
    pub fn of(r: &ProbResult) -> Mode {
        match r.method {
            Method::ExactRational => Mode::Rational,
            Method::ExactFloat => Mode::Float,
            Method::MonteCarlo => Mode::Mc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawEntry {
    pub x: String,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistSummary {
    pub distribution: Value,
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_exact: Option<String>,
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_exact: Option<String>,
    pub lattice: LatticeInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Distribution(DistSummary),
    Exact {
        query: Value,
        result: ProbResult,
    },
    Law {
        query: Value,
        constraint: String,
        entries: Vec<LawEntry>,
    },
    Simulate {
        query: Value,
        result: ProbResult,
    },
    Chernoff {
        records: Vec<ChernoffRecord>,
    },
    Scan {
        config: ScanConfig,
        report: BoundReport,
    },
    Counterexample {
        report: Box<CounterexampleReport>,
    },
    CltCompare {
        rows: Vec<CltRow>,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Distribution(_) => "distribution",
            Payload::Exact { .. } => "exact",
            Payload::Law { .. } => "law",
            Payload::Simulate { .. } => "simulate",
            Payload::Chernoff { .. } => "chernoff",
            Payload::Scan { .. } => "scan",
            Payload::Counterexample { .. } => "counterexample",
            Payload::CltCompare { .. } => "clt_compare",
        }
    }
}

/// `{"ballotlab_schema": 1, "kind": ..., "mode": ..., ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub ballotlab_schema: u32,
    pub mode: Mode,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Document {
    pub fn new(mode: Mode, payload: Payload) -> Self {
        Document {
            ballotlab_schema: SCHEMA_VERSION,
            mode,
            payload,
        }
    }

    pub fn to_json(&self) -> Result<Value> {
        Ok(serde_json::to_value(self)?)
    }

    /// Pretty JSON with a trailing newline.
    pub fn render(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(msg()))
    }
}

fn check_mc(r: &ProbResult) -> Result<()> {
    check(r.method == Method::MonteCarlo, || {
        "simulate result must be monte-carlo".into()
    })?;
    check(r.seed.is_some(), || {
        "simulate result must carry its seed".into()
    })?;
    check(r.hits <= r.trials, || "hits exceed trials".into())
}

fn check_prob(r: &ProbResult) -> Result<()> {
    check(
        r.value.is_finite() && r.stderr >= 0.0 && r.error_bound >= 0.0,
        || format!("malformed result value {}", r.value),
    )?;
    if let Some(x) = &r.exact {
        check(r.method == Method::ExactRational, || {
            "exact value on a non-rational result".into()
        })?;
        check(
            (crate::rational::to_f64(x) - r.value).abs() <= f64::EPSILON * r.value.abs(),
            || format!("value {} disagrees with exact {x}", r.value),
        )?;
    }
    Ok(())
}

/// Parses a document and checks its internal consistency.
pub fn validate(v: &Value) -> Result<Document> {
    let version = v.get("ballotlab_schema").and_then(Value::as_u64);
    check(version == Some(u64::from(SCHEMA_VERSION)), || {
        format!("expected \"ballotlab_schema\": {SCHEMA_VERSION}, found {version:?}")
    })?;
    let doc: Document = serde_json::from_value(v.clone())?;
    match &doc.payload {
        Payload::Distribution(d) => {
            if d.distribution.get("levels").is_some() {
                LeveledDistribution::from_json(&d.distribution)?;
            } else {
                StepDistribution::from_json(&d.distribution)?;
            }
        }
        Payload::Exact { result, .. } => {
            check_prob(result)?;
            check(result.method != Method::MonteCarlo, || {
                "exact result has monte-carlo method".into()
            })?;
            check(doc.mode == Mode::of(result), || {
                "mode does not match result method".into()
            })?;
        }
        Payload::Law { entries, .. } => {
            for e in entries {
                crate::rational::parse(&e.x)?;
                if let Some(x) = &e.exact {
                    crate::rational::parse(x)?;
                }
            }
        }
        Payload::Simulate { result, .. } => {
            check_prob(result)?;
            check_mc(result)?;
            check(doc.mode == Mode::Mc, || {
                "simulate documents have mode mc".into()
            })?;
        }
        Payload::Chernoff { records } => {
            for r in records {
                check(r.upper_hits <= r.trials && r.lower_hits <= r.trials, || {
                    "hits exceed trials".into()
                })?;
            }
        }
        Payload::Scan { report, .. } => {
            if let (Some(lo), Some(hi)) = (report.ratio_min, report.ratio_max) {
                for c in &report.cells {
                    if let Some(r) = c.normalized_ratio {
                        check(lo <= r && r <= hi, || {
                            format!("cell n={} ratio {r} outside [{lo}, {hi}]", c.n)
                        })?;
                    }
                }
            }
        }
        Payload::Counterexample { report } => {
            check_prob(&report.endpoint)?;
            check_prob(&report.joint)?;
            check(report.asymptotic_claims.iter().all(|c| !c.testable), || {
                "asymptotic claims must be marked untestable".into()
            })?;
        }
        Payload::CltCompare { .. } => {}
    }
    Ok(doc)
}
