mod common;

use ballotlab::distributions::{builtin, tower_distribution};
use ballotlab::exact::{self, Constraint, DpConfig};
use ballotlab::mc::{permutation_positive_prob, McConfig, PermutationMode};
use ballotlab::rational::{int, ratio};
use ballotlab::walk::{Multiset, WalkQuery};
use ballotlab::StepDistribution;
use common::*;
use num_traits::Zero;

fn cases() -> Vec<(StepDistribution, Vec<(i64, Q)>)> {
    vec![
        (builtin("rademacher").unwrap(), rademacher()),
        (builtin("lazy").unwrap(), lazy()),
        (builtin("skew").unwrap(), skew()),
        (
            builtin("tower:1").unwrap(),
            law(&[(-2, 1, 32), (-1, 15, 32), (1, 15, 32), (2, 1, 32)]),
        ),
    ]
}

fn rational_cfg() -> DpConfig {
    DpConfig::default()
}

#[test]
fn joint_and_endpoint_windows_match_enumeration() {
    for (dist, atoms) in cases() {
        for n in 1..=6usize {
            for k in 1..=5i64 {
                for a in [1i64, 2, 3] {
                    if !dist.is_acceptable(&int(a)) {
                        continue;
                    }
                    let q = WalkQuery::new(&dist, n as u64, int(k), int(a)).unwrap();
                    let joint = exact::positive_path_window_prob(&q, &rational_cfg()).unwrap();
                    let want = prob(&atoms, n, |s| interior_positive(s) && in_window(s, k, a));
                    assert_eq!(
                        joint.exact.unwrap(),
                        want,
                        "{} n={n} k={k} A={a}",
                        dist.label()
                    );
                    let end = exact::endpoint_window_prob(
                        &dist,
                        n as u64,
                        &int(k),
                        &int(a),
                        &rational_cfg(),
                    )
                    .unwrap();
                    assert_eq!(end.exact.unwrap(), prob(&atoms, n, |s| in_window(s, k, a)));
                }
            }
        }
    }
}

#[test]
fn conditional_matches_enumeration() {
    for (dist, atoms) in cases() {
        let a = if dist.label() == "skew" { 3 } else { 2 };
        for n in 1..=6usize {
            for k in 1..=4i64 {
                let den = prob(&atoms, n, |s| in_window(s, k, a));
                let q = WalkQuery::new(&dist, n as u64, int(k), int(a)).unwrap();
                let got = exact::conditional_ballot_prob(&q, &rational_cfg());
                if den.is_zero() {
                    assert!(got.is_err());
                    continue;
                }
                let num = prob(&atoms, n, |s| interior_positive(s) && in_window(s, k, a));
                assert_eq!(got.unwrap().exact.unwrap(), num / den);
            }
        }
    }
}

#[test]
fn stopping_prefix_and_moments_match_enumeration() {
    for (dist, atoms) in cases() {
        for n in 1..=6usize {
            for h in 0..=2i64 {
                let got =
                    exact::stopping_time_tail(&dist, n as u64, &int(h), &rational_cfg()).unwrap();
                let survive = |s: &[i64]| s.iter().all(|&x| x >= -h);
                assert_eq!(got.exact.unwrap(), prob(&atoms, n, survive));
                let m2 = exact::conditional_second_moment(
                    &dist,
                    n as u64,
                    &int(h),
                    None,
                    &rational_cfg(),
                )
                .unwrap();
                let want = second_moment(&atoms, n, survive) / prob(&atoms, n, survive);
                assert_eq!(m2.exact.unwrap(), want);
            }
            let prefix = exact::positive_prefix_prob(&dist, n as u64, &rational_cfg()).unwrap();
            assert_eq!(
                prefix.exact.unwrap(),
                prob(&atoms, n, |s| s.iter().all(|&x| x > 0))
            );
        }
    }
}

#[test]
fn thresholded_second_moment_matches_enumeration() {
    let dist = builtin("lazy").unwrap();
    let atoms = lazy();
    for n in 2..=6usize {
        let threshold = 0.5 * (n as f64).sqrt();
        let got = exact::conditional_second_moment(
            &dist,
            n as u64,
            &int(0),
            Some(threshold),
            &rational_cfg(),
        )
        .unwrap();
        let event = |s: &[i64]| s.iter().all(|&x| x >= 0) && s[n - 1] as f64 >= threshold;
        assert_eq!(
            got.exact.unwrap(),
            second_moment(&atoms, n, event) / prob(&atoms, n, event)
        );
    }
}

#[test]
fn endpoint_law_and_spread_match_enumeration() {
    for (dist, atoms) in cases() {
        for n in 1..=5usize {
            let table =
                exact::constrained_endpoint_law(&dist, n as u64, Constraint::None, &rational_cfg())
                    .unwrap();
            let mut want = std::collections::BTreeMap::<i64, Q>::new();
            for_each_path(&atoms, n, |steps, p| {
                *want.entry(steps.iter().sum()).or_insert_with(Q::zero) += p;
            });
            for (x, m) in &want {
                assert_eq!(table.mass_of(&int(*x)).exact.unwrap(), m.clone());
            }
            let spread = want
                .keys()
                .map(|&x| want.range(x..=x + 1).map(|(_, m)| m.clone()).sum::<Q>())
                .max()
                .unwrap();
            assert_eq!(
                exact::spread_sup(&dist, n as u64, &rational_cfg())
                    .unwrap()
                    .exact
                    .unwrap(),
                spread
            );
        }
    }
}

#[test]
fn tower_conditional_against_enumeration() {
    // Tower K=1 has 4 atoms (256 paths at n=4); K=2 has 6 atoms (1296 paths).
    for (level, atoms) in [
        (
            1u32,
            law(&[(-2, 1, 32), (-1, 15, 32), (1, 15, 32), (2, 1, 32)]),
        ),
        (
            2u32,
            law(&[
                (-4, 1, 512),
                (-2, 1, 32),
                (-1, 239, 512),
                (1, 239, 512),
                (2, 1, 32),
                (4, 1, 512),
            ]),
        ),
    ] {
        let d = tower_distribution(level).unwrap();
        let q = WalkQuery::new(&d.base, 4, int(4), int(1)).unwrap();
        let got = exact::conditional_ballot_prob(&q, &rational_cfg()).unwrap();
        let den = prob(&atoms, 4, |s| s[3] == 4);
        let num = prob(&atoms, 4, |s| interior_positive(s) && s[3] == 4);
        assert_eq!(got.exact.unwrap(), num / den, "K={level}");
    }
}

#[test]
fn permutation_matches_enumeration_of_orderings() {
    let sets: [&[i64]; 5] = [
        &[1, 1, -1],
        &[3, -1, -1],
        &[2, 2, -1, -1, -1],
        &[1, 1, 1, -1, -1, 0],
        &[5, -2, -2, 1],
    ];
    for set in sets {
        let ms = Multiset::new(set.iter().map(|&x| int(x)).collect()).unwrap();
        let got =
            permutation_positive_prob(&ms, PermutationMode::Exact, &McConfig::new(1, 0)).unwrap();
        let mut idx: Vec<usize> = (0..set.len()).collect();
        let (mut good, mut total) = (0u64, 0u64);
        permute(&mut idx, 0, &mut |order| {
            total += 1;
            let mut s = 0;
            good += u64::from(order.iter().all(|&i| {
                s += set[i];
                s > 0
            }));
        });
        assert_eq!(
            got.exact.unwrap(),
            ratio(good as i64, total as i64),
            "{set:?}"
        );
    }
}

fn permute(idx: &mut Vec<usize>, at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == idx.len() {
        visit(idx);
        return;
    }
    for i in at..idx.len() {
        idx.swap(at, i);
        permute(idx, at + 1, visit);
        idx.swap(at, i);
    }
}
