use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

use super::lattice::{lattice_info, LatticeInfo};

/// One support point of a finite step law.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub value: Rational,
    pub prob: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    FiniteSupport,
    SamplerOnly,
}

/// A step law that can only be sampled, e.g. one with irrational atoms.
///
/// Such laws have no exact lattice and are usable by the Monte Carlo engine
/// only.
pub trait StepSampler: Send + Sync + fmt::Debug {
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    fn mean(&self) -> f64;
    /// May be `f64::INFINITY`.
    fn variance(&self) -> f64;
}

/// Finitely many float-valued atoms, sampled by inverse CDF.
#[derive(Clone, Debug)]
pub struct FloatAtoms {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl FloatAtoms {
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.len() < 2 {
            return Err(Error::SingleAtom);
        }
        if atoms.iter().any(|&(v, p)| !v.is_finite() || !(p > 0.0)) {
            return Err(Error::InvalidDistribution(
                "float atoms need finite values and positive probabilities".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = atoms
            .iter()
            .map(|a| {
                acc += a.1;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        let mean: f64 = atoms.iter().map(|&(v, p)| v * p).sum();
        let second: f64 = atoms.iter().map(|&(v, p)| v * v * p).sum();
        Ok(FloatAtoms {
            values: atoms.iter().map(|a| a.0).collect(),
            cumulative,
            mean,
            variance: second - mean * mean,
        })
    }
}

impl StepSampler for FloatAtoms {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.values[idx.min(self.values.len() - 1)]
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn variance(&self) -> f64 {
        self.variance
    }
}

#[derive(Clone, Debug)]
enum Law {
    Finite(Vec<Atom>),
    Sampler(Arc<dyn StepSampler>),
}

/// The law of a single step `X` of the walk.
///
/// Finite-support laws have rational atoms, sorted by value, with
/// probabilities summing to exactly one. Mean zero is not required here:
/// biased laws can be built and inspected, and [`WalkQuery`](super::WalkQuery)
/// rejects them.
#[derive(Clone, Debug)]
pub struct StepDistribution {
    label: String,
    law: Law,
    mean_exact: Option<Rational>,
    variance_exact: Option<Rational>,
    mean: f64,
    variance: f64,
}

impl StepDistribution {
    pub fn finite(label: impl Into<String>, atoms: Vec<(Rational, Rational)>) -> Result<Self> {
        let label = label.into();
        if atoms.len() < 2 {
            return Err(Error::SingleAtom);
        }
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(value, prob)| Atom { value, prob })
            .collect();
        if let Some(a) = atoms.iter().find(|a| !a.prob.is_positive()) {
            return Err(Error::InvalidDistribution(format!(
                "atom {} has non-positive probability {}",
                a.value, a.prob
            )));
        }
        atoms.sort_by(|a, b| a.value.cmp(&b.value));
        if let Some(w) = atoms.windows(2).find(|w| w[0].value == w[1].value) {
            return Err(Error::InvalidDistribution(format!(
                "duplicate atom value {}",
                w[0].value
            )));
        }
        let total: Rational = atoms.iter().map(|a| &a.prob).sum();
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mean: Rational = atoms.iter().map(|a| &a.value * &a.prob).sum();
        let second: Rational = atoms.iter().map(|a| &a.value * &a.value * &a.prob).sum();
        let variance = &second - &mean * &mean;
        Ok(StepDistribution {
            label,
            mean: rational::to_f64(&mean),
            variance: rational::to_f64(&variance),
            mean_exact: Some(mean),
            variance_exact: Some(variance),
            law: Law::Finite(atoms),
        })
    }

    pub fn sampler_only(label: impl Into<String>, sampler: Arc<dyn StepSampler>) -> Self {
        StepDistribution {
            label: label.into(),
            mean: sampler.mean(),
            variance: sampler.variance(),
            mean_exact: None,
            variance_exact: None,
            law: Law::Sampler(sampler),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> StepKind {
        match self.law {
            Law::Finite(_) => StepKind::FiniteSupport,
            Law::Sampler(_) => StepKind::SamplerOnly,
        }
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.law {
            Law::Finite(atoms) => Some(atoms),
            Law::Sampler(_) => None,
        }
    }

    pub fn require_atoms(&self) -> Result<&[Atom]> {
        self.atoms()
            .ok_or_else(|| Error::NotFiniteSupport(self.label.clone()))
    }

    pub fn sampler(&self) -> Option<&Arc<dyn StepSampler>> {
        match &self.law {
            Law::Sampler(s) => Some(s),
            Law::Finite(_) => None,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn mean_exact(&self) -> Option<&Rational> {
        self.mean_exact.as_ref()
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn variance_exact(&self) -> Option<&Rational> {
        self.variance_exact.as_ref()
    }

    /// Exactly zero for finite laws; within float noise for sampler-only laws.
    pub fn is_mean_zero(&self) -> bool {
        match &self.mean_exact {
            Some(m) => m.is_zero(),
            None => self.mean.abs() <= 1e-12 * self.variance.sqrt().max(1.0),
        }
    }

    pub fn lattice(&self) -> Result<LatticeInfo> {
        lattice_info(self)
    }

    /// A window width is acceptable if it is at least the lattice span, or
    /// merely positive for sampler-only laws.
    pub fn is_acceptable(&self, width: &Rational) -> bool {
        match self.lattice() {
            Ok(lat) => lat.is_acceptable(width),
            Err(_) => width.is_positive(),
        }
    }

    pub fn max_abs_atom(&self) -> Option<Rational> {
        self.atoms()
            .map(|atoms| atoms.iter().map(|a| a.value.abs()).max().unwrap())
    }

    /// JSON literal `{"label": .., "atoms": [[value_num, value_den, prob_num, prob_den], ..]}`.
    pub fn to_json(&self) -> Result<Value> {
        let atoms = self.require_atoms()?;
        let rows: Vec<Value> = atoms
            .iter()
            .map(|a| {
                Value::Array(vec![
                    rational::bigint_to_json(a.value.numer()),
                    rational::bigint_to_json(a.value.denom()),
                    rational::bigint_to_json(a.prob.numer()),
                    rational::bigint_to_json(a.prob.denom()),
                ])
            })
            .collect();
        Ok(json!({ "label": self.label, "atoms": rows }))
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let label = value
            .get("label")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::invalid("distribution literal needs a string `label`"))?;
        let rows = value
            .get("atoms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("distribution literal needs an `atoms` array"))?;
        let mut atoms = Vec::with_capacity(rows.len());
        for row in rows {
            let cells = row.as_array().filter(|c| c.len() == 4).ok_or_else(|| {
                Error::invalid(format!("atom entry {row} is not [vn, vd, pn, pd]"))
            })?;
            let ints = cells
                .iter()
                .map(rational::bigint_from_json)
                .collect::<Result<Vec<BigInt>>>()?;
            if ints[1].is_zero() || ints[3].is_zero() {
                return Err(Error::invalid(format!(
                    "zero denominator in atom entry {row}"
                )));
            }
            atoms.push((
                Rational::new(ints[0].clone(), ints[1].clone()),
                Rational::new(ints[2].clone(), ints[3].clone()),
            ));
        }
        StepDistribution::finite(label, atoms)
    }
}

/// Result of [`moment`]: exact when the order is a positive integer.
#[derive(Clone, Debug, PartialEq)]
pub struct Moment {
    pub value: f64,
    pub exact: Option<Rational>,
}

/// `E[X^order]` (or `E[|X|^order]` when `absolute`).
pub fn moment(dist: &StepDistribution, order: f64, absolute: bool) -> Result<Moment> {
    let atoms = dist.require_atoms()?;
    if !(order > 0.0) || !order.is_finite() {
        return Err(Error::invalid(format!(
            "moment order must be positive, got {order}"
        )));
    }
    let integral = order.fract() == 0.0 && order <= u32::MAX as f64;
    if !integral && !absolute {
        return Err(Error::NonIntegerOrderWithoutAbsolute(order));
    }
    if integral {
        let k = order as u32;
        let exact: Rational = atoms
            .iter()
            .map(|a| {
                let base = if absolute {
                    a.value.abs()
                } else {
                    a.value.clone()
                };
                num_traits::pow(base, k as usize) * &a.prob
            })
            .sum();
        return Ok(Moment {
            value: rational::to_f64(&exact),
            exact: Some(exact),
        });
    }
    let value = atoms
        .iter()
        .map(|a| rational::to_f64(&a.value).abs().powf(order) * a.prob.to_f64().unwrap_or(f64::NAN))
        .sum();
    Ok(Moment { value, exact: None })
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

    #[test]
    fn rademacher_moments() {
        let d = rademacher();
        assert_eq!(moment(&d, 2.0, false).unwrap().exact, Some(int(1)));
        assert_eq!(moment(&d, 1.0, false).unwrap().exact, Some(int(0)));
        assert_eq!(moment(&d, 1.0, true).unwrap().exact, Some(int(1)));
        let m = moment(&d, 1.5, true).unwrap();
        assert_eq!(m.exact, None);
        assert!((m.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_integer_order_needs_absolute() {
        assert!(matches!(
            moment(&rademacher(), 1.5, false),
            Err(Error::NonIntegerOrderWithoutAbsolute(_))
        ));
        assert!(moment(&rademacher(), 0.0, true).is_err());
    }

    #[test]
    fn rejects_bad_atoms() {
        assert!(matches!(
            StepDistribution::finite("x", vec![(int(1), int(1))]),
            Err(Error::SingleAtom)
        ));
        assert!(
            StepDistribution::finite("x", vec![(int(1), ratio(1, 2)), (int(1), ratio(1, 2))])
                .is_err()
        );
        assert!(
            StepDistribution::finite("x", vec![(int(1), ratio(1, 2)), (int(2), ratio(1, 3))])
                .is_err()
        );
        assert!(StepDistribution::finite("x", vec![(int(1), int(1)), (int(2), int(0))]).is_err());
    }

    #[test]
    fn biased_laws_can_be_built() {
        let d =
            StepDistribution::finite("biased", vec![(int(0), ratio(1, 2)), (int(1), ratio(1, 2))])
                .unwrap();
        assert_eq!(d.mean_exact(), Some(&ratio(1, 2)));
        assert!(!d.is_mean_zero());
    }

    #[test]
    fn json_literal_roundtrip() {
        let d = rademacher();
        let v = d.to_json().unwrap();
        assert_eq!(v["atoms"][0], json!([-1, 1, 1, 2]));
        let back = StepDistribution::from_json(&v).unwrap();
        assert_eq!(back.atoms(), d.atoms());
        assert_eq!(back.label(), "rademacher");
    }

    #[test]
    fn json_accepts_big_integers_as_strings() {
        let v = json!({"label": "big", "atoms": [[-1, 1, "1", "2"], [1, 1, 1, "2"]]});
        assert_eq!(
            StepDistribution::from_json(&v).unwrap().atoms(),
            rademacher().atoms()
        );
    }

    #[test]
    fn sampler_only_law() {
        let root2 = 2f64.sqrt();
        let p = root2 / (1.0 + root2);
        let atoms = FloatAtoms::new(&[(1.0, p), (-root2, 1.0 - p)]).unwrap();
        let d = StepDistribution::sampler_only("irrational", Arc::new(atoms));
        assert_eq!(d.kind(), StepKind::SamplerOnly);
        assert!(d.is_mean_zero());
        assert!(matches!(
            moment(&d, 2.0, false),
            Err(Error::NotFiniteSupport(_))
        ));
        assert!(d.is_acceptable(&ratio(1, 100)));
    }
}
