use std::io::Write;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::walk::{LatticeInfo, Scalar, StepDistribution};

use super::{Arithmetic, Constraint};

const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// The step law rewritten in lattice-index units: atom `i` moves the index by
/// `offsets[i]` with probability `exact_weights[i] / denominator`.
#[derive(Clone, Debug)]
pub(crate) struct StepKernel {
    pub lattice: LatticeInfo,
    offsets: Vec<i64>,
    exact_weights: Vec<BigInt>,
    denominator: BigInt,
    float_weights: Vec<f64>,
    min_offset: i64,
    max_offset: i64,
    max_abs_atom: Rational,
}

impl StepKernel {
    pub fn new(dist: &StepDistribution) -> Result<Self> {
        let atoms = dist.require_atoms()?;
        let lattice = dist.lattice()?;
        let offsets = atoms
            .iter()
            .map(|a| {
                let idx = (&a.value - &lattice.offset_z) / &lattice.span_h;
                debug_assert!(idx.is_integer());
                rational::floor_i64(&idx)
            })
            .collect::<Result<Vec<i64>>>()?;
        let denominator = rational::common_denominator(atoms.iter().map(|a| &a.prob));
        let scale = Rational::from_integer(denominator.clone());
        let exact_weights = atoms
            .iter()
            .map(|a| (&a.prob * &scale).to_integer())
            .collect();
        let float_weights = atoms.iter().map(|a| rational::to_f64(&a.prob)).collect();
        Ok(StepKernel {
            min_offset: *offsets.iter().min().unwrap(),
            max_offset: *offsets.iter().max().unwrap(),
            max_abs_atom: dist.max_abs_atom().unwrap(),
            lattice,
            offsets,
            exact_weights,
            denominator,
            float_weights,
        })
    }

    /// Estimated number of lattice states after `n` steps, `n·max|atom|/span_h`.
    pub fn estimated_states(&self, n: u64) -> u128 {
        let est = Rational::from_integer(n.into()) * &self.max_abs_atom / &self.lattice.span_h;
        est.ceil().to_integer().to_u128().unwrap_or(u128::MAX)
    }

    pub fn check_capacity(&self, n: u64, cap: u64) -> Result<()> {
        let states = self.estimated_states(n);
        if states > cap as u128 {
            Err(Error::StateSpaceTooLarge { states, cap })
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Masses {
    /// `mass[j] = numerators[j] / denominator`.
    Exact {
        numerators: Vec<BigInt>,
        denominator: BigInt,
    },
    Float {
        values: Vec<f64>,
        error_bound: f64,
    },
}

impl Masses {
    fn len(&self) -> usize {
        match self {
            Masses::Exact { numerators, .. } => numerators.len(),
            Masses::Float { values, .. } => values.len(),
        }
    }

    fn is_zero_at(&self, i: usize) -> bool {
        match self {
            Masses::Exact { numerators, .. } => numerators[i].is_zero(),
            Masses::Float { values, .. } => values[i] == 0.0,
        }
    }

    fn drain_front(&mut self, count: usize) {
        match self {
            Masses::Exact { numerators, .. } => drop(numerators.drain(..count)),
            Masses::Float { values, .. } => drop(values.drain(..count)),
        }
    }

    fn truncate(&mut self, len: usize) {
        match self {
            Masses::Exact { numerators, .. } => numerators.truncate(len),
            Masses::Float { values, .. } => values.truncate(len),
        }
    }
}

/// Step-by-step evolution of the (possibly constrained) law of `S_t`.
///
/// Each call to [`step`](Self::step) convolves with the step law; pruning
/// removes states that violate a constraint so they carry no dead mass.
#[derive(Clone, Debug)]
pub struct Evolution {
    kernel: StepKernel,
    steps: u64,
    lo: i64,
    masses: Masses,
}

impl Evolution {
    pub fn new(dist: &StepDistribution, arithmetic: Arithmetic) -> Result<Self> {
        let kernel = StepKernel::new(dist)?;
        let masses = match arithmetic {
            Arithmetic::Rational => Masses::Exact {
                numerators: vec![BigInt::one()],
                denominator: BigInt::one(),
            },
            Arithmetic::Float => Masses::Float {
                values: vec![1.0],
                error_bound: 0.0,
            },
        };
        Ok(Evolution {
            kernel,
            steps: 0,
            lo: 0,
            masses,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn lattice(&self) -> &LatticeInfo {
        &self.kernel.lattice
    }

    pub(crate) fn kernel(&self) -> &StepKernel {
        &self.kernel
    }

    pub fn step(&mut self) {
        self.steps += 1;
        let k = &self.kernel;
        let len = self.masses.len();
        if len == 0 {
            return;
        }
        let new_len = len + (k.max_offset - k.min_offset) as usize;
        match &mut self.masses {
            Masses::Exact {
                numerators,
                denominator,
            } => {
                let mut next = vec![BigInt::zero(); new_len];
                for (offset, weight) in k.offsets.iter().zip(&k.exact_weights) {
                    let shift = (offset - k.min_offset) as usize;
                    let target = &mut next[shift..shift + len];
                    if weight.is_one() {
                        for (t, m) in target.iter_mut().zip(numerators.iter()) {
                            *t += m;
                        }
                    } else {
                        for (t, m) in target.iter_mut().zip(numerators.iter()) {
                            if !m.is_zero() {
                                *t += m * weight;
                            }
                        }
                    }
                }
                *numerators = next;
                *denominator *= &k.denominator;
            }
            Masses::Float {
                values,
                error_bound,
            } => {
                let total_before: f64 = values.iter().sum();
                let mut next = vec![0.0; new_len];
                for (offset, weight) in k.offsets.iter().zip(&k.float_weights) {
                    let shift = (offset - k.min_offset) as usize;
                    for (t, m) in next[shift..shift + len].iter_mut().zip(values.iter()) {
                        *t += m * weight;
                    }
                }
                let atoms = k.offsets.len() as f64;
                let weight_sum: f64 = k.float_weights.iter().sum();
                *error_bound = *error_bound * weight_sum.max(1.0)
                    + (atoms + 2.0) * UNIT_ROUNDOFF * total_before * weight_sum.max(1.0);
                *values = next;
            }
        }
        self.lo += k.min_offset;
        self.trim();
    }

    /// Removes every state with index below `min_index`.
    pub fn prune_below(&mut self, min_index: i64) {
        if min_index <= self.lo {
            return;
        }
        let cut = ((min_index - self.lo) as usize).min(self.masses.len());
        self.masses.drain_front(cut);
        self.lo = min_index;
        self.trim();
    }

    /// Applies the constraint as it stands after the current step.
    pub(crate) fn enforce(&mut self, constraint: &Constraint) -> Result<()> {
        let t = self.steps;
        let min_index = match constraint {
            Constraint::None => return Ok(()),
            Constraint::PositiveInterior => self
                .kernel
                .lattice
                .first_index_above(t, &Rational::zero())?,
            Constraint::AtLeast(level) => self.kernel.lattice.first_index_at_least(t, level)?,
        };
        self.prune_below(min_index);
        Ok(())
    }

    fn trim(&mut self) {
        let len = self.masses.len();
        let leading = (0..len).take_while(|&i| self.masses.is_zero_at(i)).count();
        if leading == len {
            self.masses.truncate(0);
            return;
        }
        let trailing = (0..len)
            .rev()
            .take_while(|&i| self.masses.is_zero_at(i))
            .count();
        self.masses.truncate(len - trailing);
        self.masses.drain_front(leading);
        self.lo += leading as i64;
    }

    pub fn snapshot(&self, constraint: Constraint) -> PathLawTable {
        PathLawTable {
            n: self.steps,
            constraint,
            lattice: self.kernel.lattice.clone(),
            lo: self.lo,
            masses: self.masses.clone(),
        }
    }

    pub fn into_table(self, constraint: Constraint) -> PathLawTable {
        PathLawTable {
            n: self.steps,
            constraint,
            lattice: self.kernel.lattice,
            lo: self.lo,
            masses: self.masses,
        }
    }
}

/// `P{S_n = x, constraint holds}` for every reachable lattice point `x`.
#[derive(Clone, Debug)]
pub struct PathLawTable {
    n: u64,
    constraint: Constraint,
    lattice: LatticeInfo,
    lo: i64,
    masses: Masses,
}

impl PathLawTable {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn lattice(&self) -> &LatticeInfo {
        &self.lattice
    }

    pub fn span_h(&self) -> &Rational {
        &self.lattice.span_h
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.masses, Masses::Exact { .. })
    }

    pub fn arithmetic(&self) -> Arithmetic {
        match self.masses {
            Masses::Exact { .. } => Arithmetic::Rational,
            Masses::Float { .. } => Arithmetic::Float,
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lattice index of the first stored state.
    pub fn first_index(&self) -> i64 {
        self.lo
    }

    /// The walk value of the first stored state.
    pub fn support_origin(&self) -> Rational {
        self.lattice.point(self.n, self.lo)
    }

    pub fn point_at(&self, slot: usize) -> Rational {
        self.lattice.point(self.n, self.lo + slot as i64)
    }

    pub fn mass_at(&self, slot: usize) -> f64 {
        match &self.masses {
            Masses::Exact {
                numerators,
                denominator,
            } => rational::to_f64(&Rational::new(
                numerators[slot].clone(),
                denominator.clone(),
            )),
            Masses::Float { values, .. } => values[slot],
        }
    }

    pub fn exact_mass_at(&self, slot: usize) -> Option<Rational> {
        match &self.masses {
            Masses::Exact {
                numerators,
                denominator,
            } => Some(Rational::new(numerators[slot].clone(), denominator.clone())),
            Masses::Float { .. } => None,
        }
    }

    /// Mass at walk value `x` (zero off the lattice or outside the support).
    pub fn mass_of(&self, x: &Rational) -> Scalar {
        match self.lattice.index_of(self.n, x) {
            Some(j) => self.sum_indices(j, j),
            None => self.sum_indices(1, 0),
        }
    }

    pub fn error_bound(&self) -> f64 {
        match &self.masses {
            Masses::Exact { .. } => 0.0,
            Masses::Float { error_bound, .. } => *error_bound,
        }
    }

    /// Total mass of states with lattice index in `[first, last]`.
    pub fn sum_indices(&self, first: i64, last: i64) -> Scalar {
        let len = self.len() as i64;
        let a = (first - self.lo).max(0);
        let b = (last - self.lo).min(len - 1);
        match &self.masses {
            Masses::Exact {
                numerators,
                denominator,
            } => {
                let sum: BigInt = if a > b {
                    BigInt::zero()
                } else {
                    numerators[a as usize..=b as usize].iter().sum()
                };
                Scalar::exact(Rational::new(sum, denominator.clone()))
            }
            Masses::Float {
                values,
                error_bound,
            } => {
                if a > b {
                    return Scalar::float(0.0, 0.0);
                }
                let slice = &values[a as usize..=b as usize];
                let sum: f64 = slice.iter().sum();
                Scalar::float(sum, error_bound + slice.len() as f64 * UNIT_ROUNDOFF * sum)
            }
        }
    }

    pub fn total(&self) -> Scalar {
        self.sum_indices(i64::MIN / 2, i64::MAX / 2)
    }

    /// Mass of `S_n ∈ [lo, lo + width)`.
    pub fn window_mass(&self, lo: &Rational, width: &Rational) -> Result<Scalar> {
        let first = self.lattice.first_index_at_least(self.n, lo)?;
        let last = self.lattice.first_index_at_least(self.n, &(lo + width))? - 1;
        Ok(self.sum_indices(first, last))
    }

    /// Mass of `S_n > x`.
    pub fn mass_above(&self, x: &Rational) -> Result<Scalar> {
        let first = self.lattice.first_index_above(self.n, x)?;
        Ok(self.sum_indices(first, i64::MAX / 2))
    }

    /// Mass of `S_n >= x`.
    pub fn mass_at_least(&self, x: &Rational) -> Result<Scalar> {
        let first = self.lattice.first_index_at_least(self.n, x)?;
        Ok(self.sum_indices(first, i64::MAX / 2))
    }

    /// `(Σ mass, Σ x²·mass)` over states with `S_n >= from` (all states if `None`).
    pub fn second_moment_parts(&self, from: Option<&Rational>) -> Result<(Scalar, Scalar)> {
        let first = match from {
            Some(x) => self.lattice.first_index_at_least(self.n, x)?,
            None => i64::MIN / 2,
        };
        let mass = self.sum_indices(first, i64::MAX / 2);
        let start = (first - self.lo).max(0) as usize;
        let moment = match &self.masses {
            Masses::Exact {
                numerators,
                denominator,
            } => {
                let mut acc = Rational::zero();
                for (slot, num) in numerators.iter().enumerate().skip(start) {
                    if num.is_zero() {
                        continue;
                    }
                    let x = self.point_at(slot);
                    acc += &x * &x * Rational::from_integer(num.clone());
                }
                Scalar::exact(acc / Rational::from_integer(denominator.clone()))
            }
            Masses::Float {
                values,
                error_bound,
            } => {
                let mut acc = 0.0;
                let mut max_sq: f64 = 0.0;
                for (slot, m) in values.iter().enumerate().skip(start) {
                    let x = rational::to_f64(&self.point_at(slot));
                    max_sq = max_sq.max(x * x);
                    acc += x * x * m;
                }
                let terms = values.len().saturating_sub(start) as f64;
                Scalar::float(
                    acc,
                    error_bound * max_sq + (terms + 2.0) * UNIT_ROUNDOFF * acc,
                )
            }
        };
        Ok((mass, moment))
    }

    /// `sup_x P{x <= S_n <= x + 1}`, scanning windows whose left edge sits on
    /// a support point.
    pub fn spread_sup(&self) -> Result<Scalar> {
        let span = rational::floor_i64(&self.lattice.period_d)?.max(0) as usize;
        let width = span + 1;
        let len = self.len();
        if len == 0 {
            return Ok(self.sum_indices(1, 0));
        }
        match &self.masses {
            Masses::Exact {
                numerators,
                denominator,
            } => {
                let mut window: BigInt = numerators[..width.min(len)].iter().sum();
                let mut best = window.clone();
                for start in 1..len {
                    window -= &numerators[start - 1];
                    if start + width - 1 < len {
                        window += &numerators[start + width - 1];
                    }
                    if window > best {
                        best = window.clone();
                    }
                }
                Ok(Scalar::exact(Rational::new(best, denominator.clone())))
            }
            Masses::Float {
                values,
                error_bound,
            } => {
                // Recompute each window from scratch to avoid drift in the running sum.
                let best = (0..len)
                    .map(|start| values[start..(start + width).min(len)].iter().sum::<f64>())
                    .fold(0.0, f64::max);
                Ok(Scalar::float(
                    best,
                    error_bound + width as f64 * UNIT_ROUNDOFF * best,
                ))
            }
        }
    }

    /// CSV with columns `lattice_point_num, lattice_point_den, mass`; the third
    /// header cell names the constraint.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "lattice_point_num",
            "lattice_point_den",
            &format!("mass ({})", self.constraint),
        ])?;
        for slot in 0..self.len() {
            let x = self.point_at(slot);
            w.write_record([
                x.numer().to_string(),
                x.denom().to_string(),
                rational::sig17(self.mass_at(slot)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Iterates `(walk value, mass)` over stored states.
    pub fn entries(&self) -> impl Iterator<Item = (Rational, f64)> + '_ {
        (0..self.len()).map(move |slot| (self.point_at(slot), self.mass_at(slot)))
    }
}
