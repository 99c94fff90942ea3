//! JSON queries for `exact` and `simulate`.

use ballotlab::exact::{self, Arithmetic, Constraint, DpConfig};
use ballotlab::harness::DistSpec;
use ballotlab::mc::{self, Event, McConfig, PermutationMode, Positivity};
use ballotlab::rational::{self, Rational};
use ballotlab::schema::{Document, LawEntry, Mode, Payload};
use ballotlab::walk::{Multiset, ProbResult, WalkQuery};
use ballotlab::{Error, Result, StepDistribution};
use serde_json::{Map, Value};

pub struct Query {
    raw: Value,
    fields: Map<String, Value>,
}

impl Query {
    pub fn parse(v: Value) -> Result<Self> {
        let fields = v
            .as_object()
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("query must be a JSON object".into()))?;
        Ok(Query { raw: v, fields })
    }

    pub fn op(&self) -> Result<&str> {
        self.fields
            .get("op")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidArgument("query needs a string `op`".into()))
    }

    fn get(&self, key: &str) -> Result<&Value> {
        self.fields.get(key).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "query op `{}` needs `{key}`",
                self.op().unwrap_or("?")
            ))
        })
    }

    fn u64(&self, key: &str) -> Result<u64> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| Error::InvalidArgument(format!("`{key}` must be a nonnegative integer")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .as_f64()
            .ok_or_else(|| Error::InvalidArgument(format!("`{key}` must be a number")))
    }

    fn rat(&self, key: &str) -> Result<Rational> {
        rational_value(self.get(key)?)
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.fields.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    fn dist(&self) -> Result<StepDistribution> {
        let spec: DistSpec = serde_json::from_value(self.get("dist")?.clone())?;
        spec.resolve()
    }

    fn dp(&self) -> Result<DpConfig> {
        let mut cfg = DpConfig::default();
        if let Some(a) = self.fields.get("arithmetic") {
            cfg.arithmetic = serde_json::from_value::<Arithmetic>(a.clone())?;
        }
        if self.fields.contains_key("state_cap") {
            cfg.state_cap = self.u64("state_cap")?;
        }
        Ok(cfg)
    }

    fn walk<'a>(&self, dist: &'a StepDistribution) -> Result<WalkQuery<'a>> {
        WalkQuery::new(dist, self.u64("n")?, self.rat("k")?, self.rat("A")?)
    }

    fn multiset(&self) -> Result<Multiset> {
        let elems = self
            .get("elements")?
            .as_array()
            .ok_or_else(|| Error::InvalidArgument("`elements` must be an array".into()))?
            .iter()
            .map(rational_value)
            .collect::<Result<Vec<_>>>()?;
        Multiset::new(elems)
    }

    fn constraint(&self) -> Result<Constraint> {
        let s = match self.fields.get("constraint") {
            None => return Ok(Constraint::None),
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::InvalidArgument("`constraint` must be a string".into()))?,
        };
        match s {
            "none" => Ok(Constraint::None),
            "positive_interior" | "strictly-positive-interior" => Ok(Constraint::PositiveInterior),
            other => match other.strip_prefix("at_least:") {
                Some(level) => Ok(Constraint::AtLeast(rational::parse(level)?)),
                None => Err(Error::InvalidArgument(format!(
                    "constraint must be none, positive_interior or at_least:<x>, got `{other}`"
                ))),
            },
        }
    }

    /// Runs the query with the exact engine.
    pub fn run_exact(&self) -> Result<Document> {
        let cfg = self.dp()?;
        let op = self.op()?;
        let result = match op {
            "endpoint_law" => {
                let dist = self.dist()?;
                let table = exact::constrained_endpoint_law(
                    &dist,
                    self.u64("n")?,
                    self.constraint()?,
                    &cfg,
                )?;
                let entries = (0..table.len())
                    .map(|slot| LawEntry {
                        x: table.point_at(slot).to_string(),
                        mass: table.mass_at(slot),
                        exact: table.exact_mass_at(slot).map(|m| m.to_string()),
                    })
                    .collect();
                let mode = if table.is_exact() {
                    Mode::Rational
                } else {
                    Mode::Float
                };
                return Ok(Document::new(
                    mode,
                    Payload::Law {
                        query: self.raw.clone(),
                        constraint: table.constraint().to_string(),
                        entries,
                    },
                ));
            }
            "conditional_ballot" => {
                exact::conditional_ballot_prob(&self.walk(&self.dist()?)?, &cfg)?
            }
            "positive_path_window" => {
                exact::positive_path_window_prob(&self.walk(&self.dist()?)?, &cfg)?
            }
            "endpoint_window" => exact::endpoint_window_prob(
                &self.dist()?,
                self.u64("n")?,
                &self.rat("k")?,
                &self.rat("A")?,
                &cfg,
            )?,
            "positive_prefix" => exact::positive_prefix_prob(&self.dist()?, self.u64("m")?, &cfg)?,
            "stopping_tail" => {
                exact::stopping_time_tail(&self.dist()?, self.u64("n")?, &self.rat("h")?, &cfg)?
            }
            "second_moment" => ProbResult::from_scalar(exact::conditional_second_moment(
                &self.dist()?,
                self.u64("n")?,
                &self.rat("h")?,
                self.opt_f64("threshold")?,
                &cfg,
            )?),
            "spread_sup" => {
                ProbResult::from_scalar(exact::spread_sup(&self.dist()?, self.u64("n")?, &cfg)?)
            }
            "point_mass" => ProbResult::from_scalar(exact::point_mass(
                &self.dist()?,
                self.u64("n")?,
                &self.rat("x")?,
                &cfg,
            )?),
            "permutation_positive" => mc::permutation_positive_prob(
                &self.multiset()?,
                PermutationMode::Exact,
                &McConfig::new(1, 0),
            )?,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown exact op `{other}`"
                )))
            }
        };
        Ok(Document::new(
            Mode::of(&result),
            Payload::Exact {
                query: self.raw.clone(),
                result,
            },
        ))
    }

    /// Runs the query by simulation.
    pub fn run_mc(&self, cfg: &McConfig) -> Result<Document> {
        let op = self.op()?;
        let n = || self.u64("n");
        let result = match op {
            "chernoff_rand" => {
                let t = self.get("t")?;
                let ts: Vec<f64> = match t.as_array() {
                    Some(list) => list
                        .iter()
                        .map(|x| {
                            x.as_f64().ok_or_else(|| {
                                Error::InvalidArgument("`t` entries must be numbers".into())
                            })
                        })
                        .collect::<Result<_>>()?,
                    None => vec![self.f64("t")?],
                };
                let records = mc::chernoff_rand_grid(
                    self.u64("m")?,
                    self.f64("q")?,
                    self.f64("v")?,
                    &ts,
                    cfg,
                )?;
                return Ok(Document::new(Mode::Mc, Payload::Chernoff { records }));
            }
            "conditional_ballot" => {
                let dist = self.dist()?;
                let q = self.walk(&dist)?;
                mc::estimate_conditional(&dist, q.n, &q.k, &q.window_a, cfg)?
            }
            "positive_path_window" | "endpoint_window" => {
                let dist = self.dist()?;
                let q = self.walk(&dist)?;
                let mut event = Event::window(q.k.clone(), q.window_a.clone());
                if op == "positive_path_window" {
                    event = event.with_positivity(Positivity::Interior);
                }
                mc::estimate_event(&dist, q.n, &event, cfg)?
            }
            "positive_prefix" => {
                let event = Event::default().with_positivity(Positivity::Prefix);
                mc::estimate_event(&self.dist()?, self.u64("m")?, &event, cfg)?
            }
            "stopping_tail" => {
                let event = Event::default().with_barrier(self.rat("h")?);
                mc::estimate_event(&self.dist()?, n()?, &event, cfg)?
            }
            "event" => {
                let event: Event = serde_json::from_value(self.get("event")?.clone())?;
                mc::estimate_event(&self.dist()?, n()?, &event, cfg)?
            }
            "permutation_positive" => {
                mc::permutation_positive_prob(&self.multiset()?, PermutationMode::Mc, cfg)?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown simulate op `{other}`"
                )))
            }
        };
        Ok(Document::new(
            Mode::Mc,
            Payload::Simulate {
                query: self.raw.clone(),
                result,
            },
        ))
    }
}

/// A rational from a JSON string (`"3/2"`, `"0.5"`) or number.
pub fn rational_value(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => rational::parse(s),
        Value::Number(n) => rational::parse(&n.to_string()),
        other => Err(Error::InvalidArgument(format!(
            "expected a rational, got {other}"
        ))),
    }
}
