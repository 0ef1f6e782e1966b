mod common;

use common::*;
use ppi_core::engine::{
    allocate, expected_profile, governance_map, run_simulation, step_indicators, SimulationConfig,
};
use ppi_core::network::SpilloverNetwork;
use proptest::prelude::*;
use rand::Rng;

fn random_config(n: usize, seed: u64, signed: bool, max_periods: usize) -> SimulationConfig {
    let mut r = rng(seed);
    let initial: Vec<f64> = (0..n).map(|_| r.random_range(0.05..0.8)).collect();
    let targets = initial.iter().map(|i| (i + r.random_range(0.0..0.3)).min(1.0)).collect();
    let lo = if signed { -0.5 } else { 0.0 };
    SimulationConfig {
        initial,
        targets,
        network: random_network(n, 0.4, lo, 0.6, seed ^ 0x5eed),
        gamma: r.random_range(0.05..1.5),
        budget: r.random_range(0.2..1.0),
        beta: 1.0,
        epsilon: 1e-2,
        max_periods,
        seed,
        rule_of_law: 0,
        control_of_corruption: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_period_conserves_budget_and_stays_feasible(n in 3usize..12, seed in any::<u64>(), signed in any::<bool>()) {
        let cfg = random_config(n, seed, signed, 300);
        let trace = run_simulation(&cfg).unwrap();
        for p in &trace.periods {
            let total: f64 = p.allocations.iter().sum();
            prop_assert!((total - cfg.budget).abs() < 1e-12);
            for ((a, c), i) in p.allocations.iter().zip(&p.contributions).zip(&p.indicators) {
                prop_assert!(*c >= 0.0 && c <= a);
                prop_assert!((0.0..=1.0).contains(i));
            }
        }
        prop_assert!(trace.diversion >= 0.0);
        prop_assert_eq!(trace.length, trace.periods.len());
    }

    #[test]
    fn gaps_never_widen_on_nonnegative_networks(n in 3usize..12, seed in any::<u64>()) {
        let cfg = random_config(n, seed, false, 300);
        let trace = run_simulation(&cfg).unwrap();
        let mut prev = cfg.initial.clone();
        for p in &trace.periods {
            for i in 0..n {
                prop_assert!(cfg.targets[i] - p.indicators[i] <= cfg.targets[i] - prev[i]);
            }
            prev = p.indicators.clone();
        }
    }

    #[test]
    fn identical_seed_gives_identical_trace(n in 3usize..10, seed in any::<u64>()) {
        let cfg = random_config(n, seed, true, 200);
        prop_assert_eq!(run_simulation(&cfg).unwrap(), run_simulation(&cfg).unwrap());
    }

    #[test]
    fn diversion_is_the_scaled_sum_of_diverted_funds(n in 3usize..10, seed in any::<u64>()) {
        let cfg = random_config(n, seed, false, 200);
        let trace = run_simulation(&cfg).unwrap();
        let mut total = 0.0;
        for p in &trace.periods {
            for (a, c) in p.allocations.iter().zip(&p.contributions) {
                total += a - c;
            }
        }
        let expected = total / (n as f64 * cfg.budget);
        prop_assert!((trace.diversion - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn profile_is_mean_of_allocation_shares(n in 3usize..10, seed in any::<u64>()) {
        let cfg = random_config(n, seed, false, 100);
        let trace = run_simulation(&cfg).unwrap();
        let profile = trace.profile(cfg.budget).unwrap();
        prop_assert!((profile.shares().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        if !trace.periods.is_empty() {
            let m = trace.periods.len() as f64;
            for i in 0..n {
                let direct = trace.periods.iter().map(|p| p.allocations[i] / cfg.budget).sum::<f64>() / m;
                prop_assert!((profile.shares()[i] - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn governance_map_is_monotone_on_the_unit_interval(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (fl, fh) = (governance_map(lo).unwrap(), governance_map(hi).unwrap());
        prop_assert!(fl <= fh);
        prop_assert!((0.0..=1.0).contains(&fl) && (0.0..=1.0).contains(&fh));
    }

    #[test]
    fn allocation_follows_weighted_gaps(gaps in prop::collection::vec(-0.2f64..0.8, 2..10), budget in 0.1f64..1.0) {
        let degrees: Vec<usize> = (0..gaps.len()).map(|i| i % 4).collect();
        let theta = vec![false; gaps.len()];
        let p = allocate(&gaps, &degrees, &theta, 0.3, budget).unwrap();
        let weights: Vec<f64> = gaps.iter().zip(&degrees).map(|(g, k)| g.max(0.0) * (*k as f64 + 1.0)).collect();
        let total: f64 = weights.iter().sum();
        prop_assert!((p.iter().sum::<f64>() - budget).abs() < 1e-12);
        if total > 0.0 {
            for (pi, w) in p.iter().zip(&weights) {
                prop_assert!((pi - w / total * budget).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn target_at_start_ends_before_the_first_period() {
    let mut cfg = random_config(6, 3, false, 100);
    cfg.targets = cfg.initial.clone();
    let trace = run_simulation(&cfg).unwrap();
    assert_eq!(trace.length, 0);
    assert_eq!(trace.diversion, 0.0);
    assert!(trace.converged);
}

#[test]
fn isolated_node_hand_step() {
    let net = SpilloverNetwork::empty(1);
    assert_eq!(step_indicators(&[0.5], &[1.0], &[1.0], &net, 0.5, 1.0).unwrap(), vec![0.75]);
}

#[test]
fn symmetric_pair_splits_evenly() {
    let cfg = SimulationConfig {
        initial: vec![0.4, 0.4],
        targets: vec![0.8, 0.8],
        network: SpilloverNetwork::empty(2),
        gamma: 0.8,
        budget: 1.0,
        beta: 1.0,
        epsilon: 1e-2,
        max_periods: 2000,
        seed: 0,
        rule_of_law: 0,
        control_of_corruption: 1,
    };
    let est = expected_profile(&cfg, 1000, 77).unwrap();
    for s in est.mean.shares() {
        assert!((s - 0.5).abs() < 0.02, "{:?}", est.mean.shares());
    }
}

#[test]
fn single_run_mean_is_that_run() {
    let cfg = random_config(5, 11, false, 200);
    let est = expected_profile(&cfg, 1, 5).unwrap();
    assert_eq!(est.mean, est.runs[0].profile);
}
