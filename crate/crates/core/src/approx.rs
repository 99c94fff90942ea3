//! Closed-form local CLT approximations and Chernoff-type tail bounds.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, DpConfig};
use crate::rational::{self, Rational};
use crate::walk::StepDistribution;

/// `h·exp(−x²/(2nσ²)) / sqrt(2πσ²n)`, the window form of the local CLT.
pub fn stone_window_approx(sigma2: f64, n: u64, x: f64, hwindow: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || n == 0 || !(hwindow > 0.0) {
        return Err(Error::invalid(format!(
            "need sigma2 > 0, n >= 1, h > 0; got sigma2={sigma2}, n={n}, h={hwindow}"
        )));
    }
    let v = sigma2 * n as f64;
    Ok(hwindow * (-x * x / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
}

/// Whether the lattice form multiplies by the span `h`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanFactor {
    #[default]
    Include,
    Omit,
}

/// `P{S_n = x} ≈ span_h·exp(−x²/(2nσ²)) / sqrt(2πσ²n)` for `x` on the lattice of `S_n`.
pub fn stone_lattice_approx(
    dist: &StepDistribution,
    n: u64,
    x: &Rational,
    span: SpanFactor,
) -> Result<f64> {
    let lattice = dist.lattice()?;
    lattice.require_on_lattice(n, x)?;
    let h = match span {
        SpanFactor::Include => rational::to_f64(&lattice.span_h),
        SpanFactor::Omit => 1.0,
    };
    stone_window_approx(dist.variance(), n, rational::to_f64(x), h)
}

/// `(exp{−c²μ/(2(1+c/3))}, exp{−c²μ/2})` with `μ = np`: bounds on
/// `P{B > (1+c)μ}` and `P{B < (1−c)μ}` for `B ~ Bin(n, p)`.
pub fn chernoff_binomial_bounds(n: u64, p: f64, c: f64) -> Result<(f64, f64)> {
    if n == 0 || !(p > 0.0 && p < 1.0) || !(c > 0.0) {
        return Err(Error::invalid(format!(
            "need n >= 1, 0 < p < 1, c > 0; got n={n}, p={p}, c={c}"
        )));
    }
    let mu = n as f64 * p;
    Ok((
        (-c * c * mu / (2.0 * (1.0 + c / 3.0))).exp(),
        (-c * c * mu / 2.0).exp(),
    ))
}

/// Bounds on `P{Y > t}` and `P{Y < −t}` for `Y = V_1 + … + V_U`, `U ~ Bin(m, q)`,
/// `V_i = ±v` fair:
/// `exp{−t²/(8mq + 4tv/3)} + exp{−mq/3}` and `exp{−t²/(8mq)} + exp{−mq/3}`.
pub fn chernoff_rand_bounds(m: u64, q: f64, v: f64, t: f64) -> Result<(f64, f64)> {
    if m == 0 || !(q > 0.0 && q < 1.0) || !(v > 0.0) || !(t > 0.0) {
        return Err(Error::invalid(format!(
            "need m >= 1, 0 < q < 1, v > 0, t > 0; got m={m}, q={q}, v={v}, t={t}"
        )));
    }
    let mq = m as f64 * q;
    let tail = (-mq / 3.0).exp();
    Ok((
        (-t * t / (8.0 * mq + 4.0 * t * v / 3.0)).exp() + tail,
        (-t * t / (8.0 * mq)).exp() + tail,
    ))
}

/// How `clt_compare` picks `x` for each `n`; the value is moved up to the
/// nearest lattice point of `S_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XRule {
    Zero,
    /// `c·sqrt(n)`.
    SqrtN(f64),
    Fixed(#[serde(with = "rational::serde_str")] Rational),
}

impl XRule {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" || s == "0" {
            return Ok(XRule::Zero);
        }
        if let Some(c) = s
            .strip_suffix("sqrt_n")
            .or_else(|| s.strip_suffix("sqrt(n)"))
        {
            let c = c.trim().trim_end_matches('*').trim();
            let c = if c.is_empty() {
                1.0
            } else {
                c.parse()
                    .map_err(|_| Error::invalid(format!("bad x rule `{s}`")))?
            };
            return Ok(XRule::SqrtN(c));
        }
        Ok(XRule::Fixed(rational::parse(s)?))
    }

    fn target(&self, n: u64) -> Result<Rational> {
        match self {
            XRule::Zero => Ok(Rational::from_integer(0.into())),
            XRule::SqrtN(c) => rational::from_f64_exact(c * (n as f64).sqrt()),
            XRule::Fixed(x) => Ok(x.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltRow {
    pub n: u64,
    #[serde(with = "rational::serde_str")]
    pub x: Rational,
    pub exact: f64,
    pub approx: f64,
    pub rel_error: f64,
}

/// Exact `P{S_n = x}` from the DP against the lattice local CLT.
pub fn clt_compare(
    dist: &StepDistribution,
    n_grid: &[u64],
    x_rule: &XRule,
    span: SpanFactor,
    cfg: &DpConfig,
) -> Result<Vec<CltRow>> {
    let lattice = dist.lattice()?;
    n_grid
        .iter()
        .map(|&n| {
            let x = lattice.snap_up(n, &x_rule.target(n)?)?;
            let exact = exact::point_mass(dist, n, &x, cfg)?.value;
            let approx = stone_lattice_approx(dist, n, &x, span)?;
            Ok(CltRow {
                n,
                x,
                exact,
                approx,
                rel_error: (approx / exact - 1.0).abs(),
            })
        })
        .collect()
}

/// CSV with columns `n, x_num, x_den, exact, approx, rel_error`.
pub fn write_clt_csv<W: Write>(rows: &[CltRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "x_num", "x_den", "exact", "approx", "rel_error"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.x.numer().to_string(),
            r.x.denom().to_string(),
            rational::sig17(r.exact),
            rational::sig17(r.approx),
            rational::sig17(r.rel_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::builtin;
    use crate::rational::int;

    #[test]
    fn window_form() {
        let a = stone_window_approx(1.0, 100, 0.0, 1.0).unwrap();
        assert!((a - 1.0 / (200.0 * PI).sqrt()).abs() < 1e-15);
        let b = stone_window_approx(4.0, 25, 0.0, 1.0).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(stone_window_approx(1.0, 100, 1e3, 1.0).unwrap() < 1e-300);
    }

    #[test]
    fn lattice_form() {
        let r = builtin("rademacher").unwrap();
        let a = stone_lattice_approx(&r, 100, &int(0), SpanFactor::Include).unwrap();
        assert!((a - 0.079788).abs() < 1e-6);
        assert!(matches!(
            stone_lattice_approx(&r, 100, &int(1), SpanFactor::Include),
            Err(Error::OffLattice { .. })
        ));
        let lazy = builtin("lazy").unwrap();
        let l = stone_lattice_approx(&lazy, 90, &int(0), SpanFactor::Include).unwrap();
        assert!((l - 0.051503).abs() < 1e-6);
    }

    #[test]
    fn chernoff_formulas() {
        let (u, l) = chernoff_binomial_bounds(100, 0.5, 0.2).unwrap();
        assert!((u - (-0.9375f64).exp()).abs() < 1e-15);
        assert!((l - (-1.0f64).exp()).abs() < 1e-15);
        let (u, _) = chernoff_rand_bounds(100, 0.5, 1.0, 30.0).unwrap();
        assert!((u - 0.129321).abs() < 1e-6);
        let (u, l) = chernoff_rand_bounds(100, 0.5, 1.0, 1e-9).unwrap();
        assert!(u > 1.0 && l > 1.0);
    }

    #[test]
    fn clt_rows() {
        let r = builtin("rademacher").unwrap();
        let rows = clt_compare(
            &r,
            &[4, 5, 100],
            &XRule::Zero,
            SpanFactor::Include,
            &DpConfig::default(),
        )
        .unwrap();
        assert_eq!(rows[0].exact, 0.375);
        assert_eq!(rows[1].x, int(1));
        assert!(rows[2].rel_error < 0.003);
        let mut buf = Vec::new();
        write_clt_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("n,x_num,x_den,exact,approx,rel_error\n4,0,1,"));
    }

    #[test]
    fn x_rules() {
        assert_eq!(XRule::parse("zero").unwrap(), XRule::Zero);
        assert_eq!(XRule::parse("2sqrt_n").unwrap(), XRule::SqrtN(2.0));
        assert_eq!(XRule::parse("sqrt_n").unwrap(), XRule::SqrtN(1.0));
        assert_eq!(
            XRule::parse("3/2").unwrap(),
            XRule::Fixed(crate::rational::ratio(3, 2))
        );
    }
}
