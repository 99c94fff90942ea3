//! Brute-force path enumeration, independent of the DP.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer-valued step law given as `(value, numerator, denominator)`.
pub fn law(atoms: &[(i64, i64, i64)]) -> Vec<(i64, Q)> {
    atoms.iter().map(|&(v, p, d)| (v, q(p, d))).collect()
}

pub fn rademacher() -> Vec<(i64, Q)> {
    law(&[(-1, 1, 2), (1, 1, 2)])
}

pub fn lazy() -> Vec<(i64, Q)> {
    law(&[(-1, 1, 3), (0, 1, 3), (1, 1, 3)])
}

pub fn skew() -> Vec<(i64, Q)> {
    law(&[(-1, 2, 3), (2, 1, 3)])
}

/// Visits every path of `n` steps with its probability.
pub fn for_each_path(atoms: &[(i64, Q)], n: usize, mut visit: impl FnMut(&[i64], &Q)) {
    let mut idx = vec![0usize; n];
    let mut steps = vec![0i64; n];
    loop {
        let mut p = Q::one();
        for (slot, &i) in idx.iter().enumerate() {
            steps[slot] = atoms[i].0;
            p *= &atoms[i].1;
        }
        visit(&steps, &p);
        let mut pos = 0;
        loop {
            if pos == n {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < atoms.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

pub fn partial_sums(steps: &[i64]) -> Vec<i64> {
    steps
        .iter()
        .scan(0i64, |s, &x| {
            *s += x;
            Some(*s)
        })
        .collect()
}

/// Probability of the set of paths whose partial sums satisfy `event`.
pub fn prob(atoms: &[(i64, Q)], n: usize, event: impl Fn(&[i64]) -> bool) -> Q {
    let mut total = Q::zero();
    for_each_path(atoms, n, |steps, p| {
        if event(&partial_sums(steps)) {
            total += p;
        }
    });
    total
}

/// `E[S_n² ; event]`.
pub fn second_moment(atoms: &[(i64, Q)], n: usize, event: impl Fn(&[i64]) -> bool) -> Q {
    let mut total = Q::zero();
    for_each_path(atoms, n, |steps, p| {
        let s = partial_sums(steps);
        if event(&s) {
            let end = s[n - 1];
            total += p * q(end * end, 1);
        }
    });
    total
}

pub fn interior_positive(s: &[i64]) -> bool {
    s[..s.len() - 1].iter().all(|&x| x > 0)
}

pub fn in_window(s: &[i64], k: i64, a: i64) -> bool {
    let end = *s.last().unwrap();
    k <= end && end < k + a
}
