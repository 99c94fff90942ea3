//! Built-in step laws: the standard test walks and the two tower-level
//! counterexample families, truncated at level `K`.
//!
//! The truncated laws keep the level atoms `±v_k` (`1 <= k <= K`) with their
//! exact per-sign mass and give the `±1` atoms `½(1 − Σ_{k<=K} v_k^{-β})`, so
//! the result is a genuine mean-zero probability law.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rational::{self, int, ratio, Rational};
use crate::walk::StepDistribution;

pub const MAX_TOWER_LEVEL: u32 = 4;

/// Bits of precision used when `g^{3/2}` is irrational.
const SQRT_BITS: u64 = 40;

/// `f(0) = 1`, `f(k+1) = 2^{f(k)}`.
pub fn tower_f(k: u32) -> Result<u64> {
    let mut v: u64 = 1;
    for _ in 0..k {
        if v >= 64 {
            return Err(Error::Overflow(format!(
                "tower_f({k}) does not fit in 64 bits"
            )));
        }
        v = 1u64 << v;
    }
    Ok(v)
}

/// Arbitrary-precision `f(k)`; `f(5) = 2^65536` is the largest value produced.
pub fn tower_f_big(k: u32) -> Result<BigUint> {
    if k > 5 {
        return Err(Error::Overflow(format!(
            "tower_f({k}) is too large to materialize"
        )));
    }
    let mut v = BigUint::one();
    for _ in 0..k {
        let shift = v.to_u64().expect("exponent fits for k <= 5");
        v = BigUint::one() << shift;
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Per-sign mass `1/(2 f(k)^4)`.
    Tower,
    /// Per-sign mass `1/(2 g(k)^{3/2})`.
    Heavy,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Tower => "tower",
            Family::Heavy => "heavy",
        }
    }

    pub fn beta(self) -> f64 {
        match self {
            Family::Tower => 4.0,
            Family::Heavy => 1.5,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tower" => Ok(Family::Tower),
            "heavy" => Ok(Family::Heavy),
            other => Err(Error::UnknownName(other.to_owned())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level {
    pub k: u32,
    pub value: BigInt,
    pub per_sign_prob: Rational,
}

/// A truncated counterexample law together with its level structure.
/// Level 0 holds the `±1` atoms.
#[derive(Clone, Debug)]
pub struct LeveledDistribution {
    pub base: StepDistribution,
    pub family: Family,
    pub levels: Vec<Level>,
    pub max_level: u32,
    /// `log2` of an upper bound on the total variation between this law and
    /// the untruncated one, `log2(2 v_{K+1}^{-β})`.
    pub folded_tail_log2_bound: f64,
    /// Set when some `v_k^{-β}` is irrational and was replaced by a rational
    /// within `2^-40` relative error.
    pub approximated: bool,
}

impl LeveledDistribution {
    fn build(
        family: Family,
        level_values: Vec<BigInt>,
        level_probs: Vec<Rational>,
        approximated: bool,
    ) -> Result<Self> {
        let max_level = level_values.len() as u32;
        let level_total: Rational = level_probs.iter().sum::<Rational>() * int(2);
        if level_total >= int(1) {
            return Err(Error::NegativeMass(level_total.to_string()));
        }
        let unit = (int(1) - level_total) / int(2);
        let mut levels = vec![Level {
            k: 0,
            value: BigInt::one(),
            per_sign_prob: unit,
        }];
        for (i, (value, prob)) in level_values.into_iter().zip(level_probs).enumerate() {
            levels.push(Level {
                k: i as u32 + 1,
                value,
                per_sign_prob: prob,
            });
        }
        let mut atoms = Vec::with_capacity(2 * levels.len());
        for level in &levels {
            let v = Rational::from_integer(level.value.clone());
            atoms.push((-v.clone(), level.per_sign_prob.clone()));
            atoms.push((v, level.per_sign_prob.clone()));
        }
        let base = StepDistribution::finite(format!("{}:{max_level}", family.as_str()), atoms)?;
        // v_{K+1} >= f(K+1) = 2^{f(K)}.
        let f_k = tower_f(max_level)
            .map(|v| v as f64)
            .unwrap_or(f64::INFINITY);
        Ok(LeveledDistribution {
            base,
            family,
            levels,
            max_level,
            folded_tail_log2_bound: 1.0 - family.beta() * f_k,
            approximated,
        })
    }

    /// Level index of a step value, or `None` if `|x|` is not a level value.
    pub fn level_of(&self, x: f64) -> Option<u32> {
        let a = x.abs();
        self.levels
            .iter()
            .find(|l| l.value.to_f64() == Some(a))
            .map(|l| l.k)
    }

    pub fn level_values(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| l.value.to_f64().unwrap_or(f64::INFINITY))
            .collect()
    }

    /// The base literal plus a `levels` block.
    pub fn to_json(&self) -> Result<Value> {
        let mut v = self.base.to_json()?;
        let levels: Vec<Value> = self
            .levels
            .iter()
            .map(|l| {
                json!({
                    "k": l.k,
                    "value": rational::bigint_to_json(&l.value),
                    "per_sign_prob_num": rational::bigint_to_json(l.per_sign_prob.numer()),
                    "per_sign_prob_den": rational::bigint_to_json(l.per_sign_prob.denom()),
                })
            })
            .collect();
        let obj = v.as_object_mut().expect("literal is an object");
        obj.insert("family".into(), json!(self.family.as_str()));
        obj.insert("max_level".into(), json!(self.max_level));
        obj.insert("approximated".into(), json!(self.approximated));
        obj.insert("levels".into(), Value::Array(levels));
        Ok(v)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let base = StepDistribution::from_json(value)?;
        let family = Family::parse(
            value
                .get("family")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::NotLeveled(base.label().to_owned()))?,
        )?;
        let rows = value
            .get("levels")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::NotLeveled(base.label().to_owned()))?;
        let mut levels = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let field = |name: &str| {
                row.get(name)
                    .ok_or_else(|| Error::invalid(format!("level entry {row} lacks `{name}`")))
                    .and_then(rational::bigint_from_json)
            };
            let k = field("k")?;
            if k != BigInt::from(i) {
                return Err(Error::invalid(format!(
                    "level entries must be listed in order, found k={k} at {i}"
                )));
            }
            let den = field("per_sign_prob_den")?;
            if den.is_zero() {
                return Err(Error::invalid(format!(
                    "zero denominator in level entry {row}"
                )));
            }
            levels.push(Level {
                k: i as u32,
                value: field("value")?,
                per_sign_prob: Rational::new(field("per_sign_prob_num")?, den),
            });
        }
        if levels.len() < 2 {
            return Err(Error::invalid(
                "a leveled law needs the unit level and at least one more",
            ));
        }
        let rebuilt = LeveledDistribution::build(
            family,
            levels[1..].iter().map(|l| l.value.clone()).collect(),
            levels[1..]
                .iter()
                .map(|l| l.per_sign_prob.clone())
                .collect(),
            value
                .get("approximated")
                .and_then(Value::as_bool)
                .unwrap_or(false),
        )?;
        if rebuilt.levels != levels || rebuilt.base.atoms() != base.atoms() {
            return Err(Error::invalid(
                "levels block is inconsistent with the atoms",
            ));
        }
        Ok(rebuilt)
    }
}

fn unit_fraction(den: BigUint) -> Rational {
    Rational::new(BigInt::one(), BigInt::from(den))
}

/// Atoms `±1`, `±f(k)` for `1 <= k <= K`, per-sign mass `1/(2 f(k)^4)`.
pub fn tower_distribution(max_level: u32) -> Result<LeveledDistribution> {
    if max_level == 0 {
        return Err(Error::invalid("tower distribution needs K >= 1"));
    }
    if max_level > MAX_TOWER_LEVEL {
        return Err(Error::Overflow(format!(
            "tower distribution is limited to K <= {MAX_TOWER_LEVEL}; f({max_level})^4 is not representable"
        )));
    }
    let mut values = Vec::new();
    let mut probs = Vec::new();
    for k in 1..=max_level {
        let f = tower_f_big(k)?;
        probs.push(unit_fraction(f.pow(4u32) * 2u32));
        values.push(BigInt::from(f));
    }
    LeveledDistribution::build(Family::Tower, values, probs, false)
}

/// `1/(2 g^{3/2})` as a rational: exact when `g` is a perfect square,
/// otherwise with `√g` rounded down to `SQRT_BITS` binary digits.
fn heavy_level_prob(g: &BigUint) -> (Rational, bool) {
    let root = g.sqrt();
    if &(&root * &root) == g {
        return (unit_fraction(g * &root * 2u32), false);
    }
    let scaled = (g << (2 * SQRT_BITS)).sqrt();
    let prob = Rational::new(BigInt::one() << SQRT_BITS, BigInt::from(g * scaled * 2u32));
    (prob, true)
}

/// Atoms `±1`, `±g(k)` with per-sign mass `1/(2 g(k)^{3/2})`; `g = f` unless
/// `g_values` (for `k = 1..=K`) is given.
pub fn heavy_tower_distribution(
    max_level: u32,
    g_values: Option<&[BigUint]>,
) -> Result<LeveledDistribution> {
    if max_level == 0 {
        return Err(Error::invalid("heavy distribution needs K >= 1"));
    }
    let g: Vec<BigUint> = match g_values {
        Some(values) => {
            if values.len() != max_level as usize {
                return Err(Error::InvalidG(format!(
                    "expected {max_level} values g(1..={max_level}), got {}",
                    values.len()
                )));
            }
            let mut prev = BigUint::one();
            for (i, v) in values.iter().enumerate() {
                let k = i as u32 + 1;
                if v <= &prev {
                    return Err(Error::InvalidG(format!(
                        "g must be strictly increasing, g({k}) = {v}"
                    )));
                }
                if v < &tower_f_big(k)? {
                    return Err(Error::InvalidG(format!("g({k}) = {v} is below f({k})")));
                }
                prev = v.clone();
            }
            values.to_vec()
        }
        None => {
            if max_level > MAX_TOWER_LEVEL {
                return Err(Error::Overflow(format!(
                    "heavy distribution with g = f is limited to K <= {MAX_TOWER_LEVEL}"
                )));
            }
            (1..=max_level).map(tower_f_big).collect::<Result<_>>()?
        }
    };
    let mut approximated = false;
    let mut probs = Vec::new();
    for v in &g {
        let (p, approx) = heavy_level_prob(v);
        approximated |= approx;
        probs.push(p);
    }
    let values = g.into_iter().map(BigInt::from).collect();
    LeveledDistribution::build(Family::Heavy, values, probs, approximated)
}

fn split_level(name: &str) -> Option<(&str, Result<u32>)> {
    let (family, k) = name.split_once(':')?;
    let k = k
        .trim()
        .parse::<u32>()
        .map_err(|_| Error::invalid(format!("bad level in `{name}`")));
    Some((family.trim(), k))
}

/// Leveled law by name: `tower:K` or `heavy:K`.
pub fn leveled(name: &str) -> Result<LeveledDistribution> {
    match split_level(name) {
        Some(("tower", k)) => tower_distribution(k?),
        Some(("heavy", k)) => heavy_tower_distribution(k?, None),
        _ => match name {
            "rademacher" | "lazy" | "skew" => Err(Error::NotLeveled(name.to_owned())),
            "tower" | "heavy" => Err(Error::invalid(format!(
                "`{name}` needs a level, e.g. `{name}:2`"
            ))),
            other => Err(Error::UnknownName(other.to_owned())),
        },
    }
}

/// Named law: `rademacher`, `lazy`, `skew`, `tower:K`, `heavy:K`.
pub fn builtin(name: &str) -> Result<StepDistribution> {
    match name {
        "rademacher" => {
            StepDistribution::finite(name, vec![(int(-1), ratio(1, 2)), (int(1), ratio(1, 2))])
        }
        "lazy" => StepDistribution::finite(
            name,
            vec![
                (int(-1), ratio(1, 3)),
                (int(0), ratio(1, 3)),
                (int(1), ratio(1, 3)),
            ],
        ),
        "skew" => {
            StepDistribution::finite(name, vec![(int(2), ratio(1, 3)), (int(-1), ratio(2, 3))])
        }
        _ => leveled(name).map(|l| l.base),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::moment;

    #[test]
    fn tower_values() {
        assert_eq!(tower_f(0).unwrap(), 1);
        assert_eq!(tower_f(3).unwrap(), 16);
        assert_eq!(tower_f(4).unwrap(), 65536);
        assert!(matches!(tower_f(5), Err(Error::Overflow(_))));
        assert_eq!(tower_f_big(5).unwrap().bits(), 65537);
        assert!(tower_f_big(6).is_err());
    }

    #[test]
    fn tower_k1_atoms() {
        let t = tower_distribution(1).unwrap();
        let atoms: Vec<_> = t
            .base
            .atoms()
            .unwrap()
            .iter()
            .map(|a| (a.value.clone(), a.prob.clone()))
            .collect();
        assert_eq!(
            atoms,
            vec![
                (int(-2), ratio(1, 32)),
                (int(-1), ratio(15, 32)),
                (int(1), ratio(15, 32)),
                (int(2), ratio(1, 32)),
            ]
        );
        assert!(!t.approximated);
    }

    #[test]
    fn tower_k2_atoms() {
        let t = tower_distribution(2).unwrap();
        assert_eq!(t.levels[0].per_sign_prob, ratio(239, 512));
        assert_eq!(t.levels[1].per_sign_prob, ratio(1, 32));
        assert_eq!(t.levels[2].per_sign_prob, ratio(1, 512));
        assert_eq!(
            moment(&t.base, 2.0, false).unwrap().exact,
            Some(ratio(319, 256))
        );
    }

    #[test]
    fn tower_k4_is_exact() {
        let t = tower_distribution(4).unwrap();
        assert_eq!(t.base.mean_exact(), Some(&int(0)));
        assert!(t.base.variance_exact().unwrap() < &int(2));
        assert_eq!(t.folded_tail_log2_bound, 1.0 - 4.0 * 65536.0);
        assert!(tower_distribution(5).is_err());
    }

    #[test]
    fn heavy_k1() {
        let h = heavy_tower_distribution(1, None).unwrap();
        assert!(h.approximated);
        let p2 = rational::to_f64(&h.levels[1].per_sign_prob);
        assert!((p2 - 2f64.powf(-1.5) / 2.0).abs() < 1e-12);
        let p1 = rational::to_f64(&h.levels[0].per_sign_prob);
        assert!((p1 - 0.5 * (1.0 - 2f64.powf(-1.5))).abs() < 1e-12);
        assert_eq!(h.base.mean_exact(), Some(&int(0)));
    }

    #[test]
    fn heavy_perfect_square_levels_are_exact() {
        let g = [BigUint::from(4u32), BigUint::from(16u32)];
        let h = heavy_tower_distribution(2, Some(&g)).unwrap();
        assert!(!h.approximated);
        assert_eq!(h.levels[1].per_sign_prob, ratio(1, 16));
        assert_eq!(h.levels[2].per_sign_prob, ratio(1, 128));
    }

    #[test]
    fn heavy_rejects_bad_g() {
        let below = [BigUint::from(2u32), BigUint::from(3u32)];
        assert!(matches!(
            heavy_tower_distribution(2, Some(&below)),
            Err(Error::InvalidG(_))
        ));
        let flat = [BigUint::from(4u32), BigUint::from(4u32)];
        assert!(matches!(
            heavy_tower_distribution(2, Some(&flat)),
            Err(Error::InvalidG(_))
        ));
    }

    #[test]
    fn heavy_variance_grows() {
        let v: Vec<Rational> = (1..=4)
            .map(|k| {
                heavy_tower_distribution(k, None)
                    .unwrap()
                    .base
                    .variance_exact()
                    .unwrap()
                    .clone()
            })
            .collect();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn builtins() {
        let r = builtin("rademacher").unwrap();
        assert_eq!(r.atoms().unwrap().len(), 2);
        let s = builtin("skew").unwrap();
        assert_eq!(s.mean_exact(), Some(&int(0)));
        assert_eq!(s.lattice().unwrap().span_h, int(3));
        assert_eq!(builtin("tower:3").unwrap().label(), "tower:3");
        assert!(matches!(builtin("nosuch"), Err(Error::UnknownName(_))));
        assert!(matches!(leveled("lazy"), Err(Error::NotLeveled(_))));
    }

    #[test]
    fn json_roundtrip() {
        for l in [
            tower_distribution(4).unwrap(),
            heavy_tower_distribution(3, None).unwrap(),
        ] {
            let v = l.to_json().unwrap();
            let back = LeveledDistribution::from_json(&v).unwrap();
            assert_eq!(back.base.atoms(), l.base.atoms());
            assert_eq!(back.levels, l.levels);
            assert_eq!(back.approximated, l.approximated);
        }
        let v = tower_distribution(4).unwrap().to_json().unwrap();
        assert_eq!(v["levels"][4]["per_sign_prob_den"], "36893488147419103232");
    }

    #[test]
    fn level_lookup() {
        let t = tower_distribution(3).unwrap();
        assert_eq!(t.level_of(-16.0), Some(3));
        assert_eq!(t.level_of(1.0), Some(0));
        assert_eq!(t.level_of(3.0), None);
    }
}
