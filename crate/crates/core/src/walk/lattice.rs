use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

use super::StepDistribution;

/// Lattice data of a finite-support step law.
///
/// Every atom lies on `offset_z + span_h·ℤ` with `span_h` maximal, so after
/// `n` steps the walk lives on `n·offset_z + span_h·ℤ`. Points of that lattice
/// are addressed by an integer index `j` via `point(n, j) = n·offset_z + span_h·j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeInfo {
    pub is_lattice: bool,
    #[serde(with = "rational::serde_str")]
    pub span_h: Rational,
    #[serde(with = "rational::serde_str")]
    pub offset_z: Rational,
    #[serde(with = "rational::serde_str")]
    pub period_d: Rational,
}

pub fn lattice_info(dist: &StepDistribution) -> Result<LatticeInfo> {
    let atoms = dist.require_atoms()?;
    if atoms.len() < 2 {
        return Err(Error::SingleAtom);
    }
    let common = rational::common_denominator(atoms.iter().map(|a| &a.value));
    let scaled: Vec<BigInt> = atoms
        .iter()
        .map(|a| (&a.value * Rational::from_integer(common.clone())).to_integer())
        .collect();
    let gcd = scaled[1..]
        .iter()
        .fold(BigInt::zero(), |acc, v| acc.gcd(&(v - &scaled[0])));
    let span_h = Rational::new(gcd, common);
    let offset_z = rational::rem_euclid(&atoms[0].value, &span_h);
    Ok(LatticeInfo {
        is_lattice: true,
        period_d: span_h.recip(),
        span_h,
        offset_z,
    })
}

impl LatticeInfo {
    /// `(n·offset_z) mod span_h`.
    pub fn walk_offset(&self, n: u64) -> Rational {
        rational::rem_euclid(
            &(&self.offset_z * Rational::from_integer(n.into())),
            &self.span_h,
        )
    }

    pub fn point(&self, n: u64, index: i64) -> Rational {
        &self.offset_z * Rational::from_integer(n.into()) + &self.span_h * rational::int(index)
    }

    /// The real-valued position `(x − n·offset_z)/span_h` of `x` in index units.
    pub fn index_position(&self, n: u64, x: &Rational) -> Rational {
        (x - &self.offset_z * Rational::from_integer(n.into())) / &self.span_h
    }

    pub fn index_of(&self, n: u64, x: &Rational) -> Option<i64> {
        let pos = self.index_position(n, x);
        if pos.is_integer() {
            rational::floor_i64(&pos).ok()
        } else {
            None
        }
    }

    pub fn contains(&self, n: u64, x: &Rational) -> bool {
        self.index_position(n, x).is_integer()
    }

    pub fn require_on_lattice(&self, n: u64, x: &Rational) -> Result<i64> {
        self.index_of(n, x).ok_or_else(|| Error::OffLattice {
            x: x.to_string(),
            n,
        })
    }

    /// Smallest lattice point of `S_n` that is `>= x`.
    pub fn snap_up(&self, n: u64, x: &Rational) -> Result<Rational> {
        let j = rational::ceil_i64(&self.index_position(n, x))?;
        Ok(self.point(n, j))
    }

    /// First index `j` with `point(n, j) >= x`.
    pub fn first_index_at_least(&self, n: u64, x: &Rational) -> Result<i64> {
        rational::ceil_i64(&self.index_position(n, x))
    }

    /// First index `j` with `point(n, j) > x`.
    pub fn first_index_above(&self, n: u64, x: &Rational) -> Result<i64> {
        Ok(rational::floor_i64(&self.index_position(n, x))? + 1)
    }

    pub fn is_acceptable(&self, width: &Rational) -> bool {
        width.is_positive() && width >= &self.span_h
    }

    pub fn require_acceptable(&self, width: &Rational) -> Result<()> {
        if self.is_acceptable(width) {
            Ok(())
        } else {
            Err(Error::UnacceptableWindow {
                width: width.to_string(),
                span: self.span_h.to_string(),
            })
        }
    }

    /// The `(d, z)` pair with `dX − z` integer-valued: `d = 1/span_h`, `z = offset_z·d`.
    pub fn integer_form(&self) -> (Rational, Rational) {
        (self.period_d.clone(), &self.offset_z * &self.period_d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn law(atoms: &[(Rational, Rational)]) -> StepDistribution {
        StepDistribution::finite("t", atoms.to_vec()).unwrap()
    }

    #[test]
    fn rademacher_lattice() {
        let lat = law(&[(int(-1), ratio(1, 2)), (int(1), ratio(1, 2))])
            .lattice()
            .unwrap();
        assert_eq!(lat.span_h, int(2));
        assert_eq!(lat.offset_z, int(1));
        assert_eq!(lat.period_d, ratio(1, 2));
        assert!(lat.is_acceptable(&int(2)));
        assert!(!lat.is_acceptable(&int(1)));
        assert_eq!(lat.walk_offset(2), int(0));
        assert_eq!(lat.walk_offset(3), int(1));
        assert_eq!(lat.integer_form(), (ratio(1, 2), ratio(1, 2)));
    }

    #[test]
    fn skew_lattice() {
        let lat = law(&[(int(2), ratio(1, 3)), (int(-1), ratio(2, 3))])
            .lattice()
            .unwrap();
        assert_eq!(lat.span_h, int(3));
        assert_eq!(lat.offset_z, int(2));
    }

    #[test]
    fn lazy_lattice() {
        let third = ratio(1, 3);
        let lat = law(&[
            (int(-1), third.clone()),
            (int(0), third.clone()),
            (int(1), third),
        ])
        .lattice()
        .unwrap();
        assert_eq!(lat.span_h, int(1));
        assert_eq!(lat.offset_z, int(0));
    }

    #[test]
    fn fractional_atoms() {
        let lat = law(&[(ratio(-1, 2), ratio(1, 2)), (ratio(3, 4), ratio(1, 2))])
            .lattice()
            .unwrap();
        assert_eq!(lat.span_h, ratio(5, 4));
        assert_eq!(lat.offset_z, ratio(3, 4));
    }

    #[test]
    fn snapping_and_membership() {
        let lat = law(&[(int(-1), ratio(1, 2)), (int(1), ratio(1, 2))])
            .lattice()
            .unwrap();
        assert!(lat.contains(4, &int(2)));
        assert!(!lat.contains(4, &int(3)));
        assert_eq!(lat.snap_up(4, &int(3)).unwrap(), int(4));
        assert_eq!(lat.snap_up(5, &int(3)).unwrap(), int(3));
        assert!(matches!(
            lat.require_on_lattice(100, &int(1)),
            Err(Error::OffLattice { .. })
        ));
    }
}
