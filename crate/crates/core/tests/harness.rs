use ballotlab::distributions::{
    builtin, heavy_tower_distribution, tower_distribution, LeveledDistribution,
};
use ballotlab::harness::{self, ParamRule, ScanConfig, ScanKind, ScanOptions};
use ballotlab::mc::{self, McConfig};
use ballotlab::rational::{int, ratio};
use ballotlab::schema::{self, Document, Mode, Payload};
use proptest::prelude::*;
use serde_json::json;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn report_bounds_every_cell(lo in 1u64..=20, span in 0u64..=30, fixed in 1i64..=6) {
        let d = builtin("lazy").unwrap();
        let grid: Vec<u64> = (lo..=lo + span).collect();
        let rules = [ParamRule::Fixed(int(fixed)), "sqrt_n".parse().unwrap()];
        let r = harness::scan_ballot_ratio(&d, &grid, &rules, &int(1), &ScanOptions::new(ScanKind::BallotRatio, 0)).unwrap();
        let (min, max) = (r.ratio_min.unwrap(), r.ratio_max.unwrap());
        for c in &r.cells {
            if let Some(x) = c.normalized_ratio {
                prop_assert!(min <= x && x <= max);
            }
        }
        let spread = r.thresholds.max_spread.unwrap();
        prop_assert_eq!(r.pass, max / min <= spread);
    }
}

#[test]
fn mc_fallback_scan_is_deterministic() {
    let cfg = ScanConfig::from_json(&json!({
        "kind": "stopping",
        "dist": "skew",
        "n_grid": [8, 16, 32],
        "h_rule": ["0", "sqrt_n"],
        "state_cap": 4,
        "mc_trials": 5000
    }))
    .unwrap();
    let a = cfg.run(11).unwrap();
    let b = cfg.run(11).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(a.cells.iter().all(|c| c.method == harness::CellMethod::Mc));
    let c = cfg.run(12).unwrap();
    assert_ne!(a.cells[0].raw_prob, c.cells[0].raw_prob);
}

#[test]
fn scan_document_roundtrips() {
    let cfg = ScanConfig::from_json(&json!({
        "kind": "second_moment",
        "dist": "rademacher",
        "n_grid": {"range": [1, 12]},
        "h_rule": ["0"],
        "threshold_eps": 0.5
    }))
    .unwrap();
    let report = cfg.run(0).unwrap();
    let doc = Document::new(
        Mode::Float,
        Payload::Scan {
            config: cfg,
            report,
        },
    );
    let text = doc.render().unwrap();
    let back = schema::validate(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back, doc);
}

#[test]
fn tower_variances() {
    let mut last = ratio(0, 1);
    for k in 1..=4 {
        let d = tower_distribution(k).unwrap();
        assert_eq!(d.base.mean_exact().unwrap(), &int(0));
        let total: ballotlab::Rational =
            d.base.atoms().unwrap().iter().map(|a| a.prob.clone()).sum();
        assert_eq!(total, int(1));
        let v = d.base.variance_exact().unwrap().clone();
        assert!(v < int(2) && v > last, "K={k}: {v}");
        last = v;
    }
    assert!((ballotlab::rational::to_f64(&last) - 1.25).abs() < 0.01);
}

#[test]
fn heavy_variance_grows_and_levels_roundtrip() {
    let mut last = 0.0;
    for k in 1..=4 {
        let d = heavy_tower_distribution(k, None).unwrap();
        let v = d.base.variance();
        assert!(v > last);
        last = v;
        let back = LeveledDistribution::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back.base.atoms(), d.base.atoms());
        assert_eq!(back.levels, d.levels);
    }
}

#[test]
fn level_decomposition_sums_to_endpoint() {
    let d = tower_distribution(3).unwrap();
    let paths: Vec<_> = mc::sample_level_decomposition(&d, 64, &McConfig::new(300, 4))
        .unwrap()
        .collect();
    for p in &paths {
        let total: i64 = (0..=3).map(|l| p.sum(l)).sum();
        assert_eq!(total, p.endpoint());
        assert_eq!((0..=3).map(|l| p.count(l)).sum::<u64>(), 64);
        assert_eq!(p.truncated_endpoints[&0], p.sum(0));
    }
    let summary = mc::summarize_levels(&d, 64, paths.iter().cloned());
    let again = mc::summarize_levels(&d, 64, paths.into_iter().rev());
    assert_eq!(summary, again);
    assert_eq!(summary.trials, 300);
}
