use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::approx::chernoff_rand_bounds;
use crate::error::{Error, Result};

use super::{count_into, McConfig};

/// Empirical tails of `Y = V_1 + … + V_U` next to the closed-form bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffRecord {
    pub m: u64,
    pub q: f64,
    pub v: f64,
    pub t: f64,
    pub trials: u64,
    pub seed: u64,
    pub upper_hits: u64,
    pub lower_hits: u64,
    /// `P{Y > t}`.
    pub upper_emp: f64,
    /// `P{Y < −t}`.
    pub lower_emp: f64,
    pub upper_stderr: f64,
    pub lower_stderr: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
}

impl ChernoffRecord {
    /// Both empirical tails, less `sigmas` standard errors, sit below their bounds.
    pub fn holds(&self, sigmas: f64) -> bool {
        self.upper_emp - sigmas * self.upper_stderr <= self.upper_bound
            && self.lower_emp - sigmas * self.lower_stderr <= self.lower_bound
    }
}

pub fn chernoff_rand_check(
    m: u64,
    q: f64,
    v: f64,
    t: f64,
    cfg: &McConfig,
) -> Result<ChernoffRecord> {
    Ok(chernoff_rand_grid(m, q, v, &[t], cfg)?.remove(0))
}

/// One sample of `Y` per trial, shared by every threshold in `ts`.
///
/// `Y = v·(2B − U)` with `U ~ Bin(m, q)` and `B ~ Bin(U, ½)` the number of
/// positive signs.
pub fn chernoff_rand_grid(
    m: u64,
    q: f64,
    v: f64,
    ts: &[f64],
    cfg: &McConfig,
) -> Result<Vec<ChernoffRecord>> {
    let bounds = ts
        .iter()
        .map(|&t| chernoff_rand_bounds(m, q, v, t))
        .collect::<Result<Vec<_>>>()?;
    let count =
        Binomial::new(m, q).map_err(|e| Error::invalid(format!("binomial({m}, {q}): {e}")))?;
    let counts = count_into(cfg, 2 * ts.len(), |rng, hits| {
        let u = count.sample(rng);
        let b = if u == 0 {
            0
        } else {
            Binomial::new(u, 0.5).expect("valid parameters").sample(rng)
        };
        let y = v * (2 * b as i64 - u as i64) as f64;
        for (i, &t) in ts.iter().enumerate() {
            hits[2 * i] += u64::from(y > t);
            hits[2 * i + 1] += u64::from(y < -t);
        }
    })?;
    let n = cfg.trials as f64;
    let stderr = |p: f64| (p * (1.0 - p) / n).sqrt();
    Ok(ts
        .iter()
        .zip(bounds)
        .enumerate()
        .map(|(i, (&t, (upper_bound, lower_bound)))| {
            let upper_emp = counts[2 * i] as f64 / n;
            let lower_emp = counts[2 * i + 1] as f64 / n;
            ChernoffRecord {
                m,
                q,
                v,
                t,
                trials: cfg.trials,
                seed: cfg.seed,
                upper_hits: counts[2 * i],
                lower_hits: counts[2 * i + 1],
                upper_emp,
                lower_emp,
                upper_stderr: stderr(upper_emp),
                lower_stderr: stderr(lower_emp),
                upper_bound,
                lower_bound,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_dominates_at_moderate_deviation() {
        let r = chernoff_rand_check(100, 0.5, 1.0, 30.0, &McConfig::new(200_000, 1)).unwrap();
        assert!(r.upper_emp < 1e-3, "{r:?}");
        assert!((r.upper_bound - 0.129321).abs() < 1e-6);
        assert!(r.holds(3.0));
    }

    #[test]
    fn symmetric_tails() {
        let r = chernoff_rand_check(50, 0.5, 2.0, 4.0, &McConfig::new(200_000, 2)).unwrap();
        let se = (r.upper_stderr.powi(2) + r.lower_stderr.powi(2)).sqrt();
        assert!((r.upper_emp - r.lower_emp).abs() < 4.0 * se);
    }

    #[test]
    fn grid_matches_single() {
        let cfg = McConfig::new(10_000, 3);
        let g = chernoff_rand_grid(10, 0.1, 1.0, &[1.0, 2.0], &cfg).unwrap();
        let s = chernoff_rand_check(10, 0.1, 1.0, 2.0, &cfg).unwrap();
        assert_eq!(g[1], s);
    }
}
