mod common;

use std::collections::BTreeSet;

use common::*;
use ppi_core::network::{estimate_network, orient_edge, tmfg_filter, Score};
use ppi_core::panel::{
    classify_groups, generate_synthetic_panel, load_panel, pillar_means, ColumnMap, Group, IndicatorPanel,
    PanelParts,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reorder_countries(panel: &IndicatorPanel, order: &[usize]) -> IndicatorPanel {
    let parts: PanelParts = panel.clone().into();
    let per_country = panel.n_indicators() * panel.years().len();
    let mut meta = parts.meta.clone();
    meta.countries = order.iter().map(|&k| parts.meta.countries[k].clone()).collect();
    let values = order
        .iter()
        .flat_map(|&k| parts.values[k * per_country..(k + 1) * per_country].iter().copied())
        .collect();
    IndicatorPanel::new(PanelParts { meta, years: parts.years, values }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn panel_round_trips_through_csv_and_json(nc in 2usize..6, ni in 5usize..8, ny in 2usize..6, seed in any::<u64>()) {
        let panel = generate_synthetic_panel(nc, ni, ny, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        panel.save(dir.path()).unwrap();
        let loaded = load_panel(&dir.path().join("panel.csv"), &dir.path().join("meta.json"), &ColumnMap::default()).unwrap();
        prop_assert_eq!(&loaded, &panel);
        prop_assert_eq!(IndicatorPanel::from_json(&panel.to_json()).unwrap(), panel);
    }

    #[test]
    fn groups_partition_the_countries(nc in 2usize..10, seed in any::<u64>(), early_mask in any::<u16>(), reference in 0usize..10) {
        let panel = generate_synthetic_panel(nc, 5, 3, seed).unwrap();
        let codes: Vec<String> = panel.countries().map(str::to_string).collect();
        let reference = &codes[reference % nc];
        let early: BTreeSet<String> = codes
            .iter()
            .enumerate()
            .filter(|(k, c)| early_mask & (1 << k) != 0 && *c != reference)
            .map(|(_, c)| c.clone())
            .collect();
        let groups = classify_groups(&panel, reference, &early).unwrap();
        let mut seen = BTreeSet::new();
        for g in [Group::EarlyMember, Group::HigherIncome, Group::Reference, Group::LowerIncome] {
            for c in groups.members(g) {
                prop_assert!(seen.insert(c.to_string()), "{} in two groups", c);
            }
        }
        prop_assert_eq!(seen.len(), nc);
        prop_assert_eq!(groups.members(Group::Reference), vec![reference.as_str()]);
    }

    #[test]
    fn pillar_means_ignore_country_order(nc in 3usize..7, seed in any::<u64>()) {
        let panel = generate_synthetic_panel(nc, 6, 4, seed).unwrap();
        let mut order: Vec<usize> = (0..nc).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = reorder_countries(&panel, &order);
        let codes: Vec<String> = panel.countries().map(str::to_string).collect();
        let early: BTreeSet<String> = [codes[1].clone()].into();
        let a = pillar_means(&panel, &classify_groups(&panel, &codes[0], &early).unwrap(), 2006..=2009).unwrap();
        let b = pillar_means(&shuffled, &classify_groups(&shuffled, &codes[0], &early).unwrap(), 2006..=2009).unwrap();
        prop_assert_eq!(&a.pillars, &b.pillars);
        for (ra, rb) in a.means.iter().zip(&b.means) {
            for (x, y) in ra.iter().zip(rb) {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (None, None) => {}
                    _ => prop_assert!(false, "group emptiness differs"),
                }
            }
        }
    }

    #[test]
    fn tmfg_is_a_connected_planar_triangulation(n in 4usize..16, seed in any::<u64>(), signed in any::<bool>()) {
        let w = random_symmetric(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let score = if signed { Score::Signed } else { Score::Absolute };
        let edges = tmfg_filter(&w, score).unwrap();
        prop_assert_eq!(norm_edges(&edges).len(), 3 * (n - 2));
        prop_assert!(planar_insertion_certificate(n, &edges));
        prop_assert!(connected(n, &edges));
    }

    #[test]
    fn tmfg_on_five_nodes_matches_exhaustive_search(seed in any::<u64>()) {
        let w = random_symmetric(&mut ChaCha8Rng::seed_from_u64(seed), 5);
        let edges = tmfg_filter(&w, Score::Absolute).unwrap();
        prop_assert_eq!(norm_edges(&edges), five_vertex_oracle(&w));
    }

    #[test]
    fn orientation_is_antisymmetric(seed in any::<u64>(), len in 5usize..60) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..len).map(|_| laplace(&mut r)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + laplace(&mut r)).collect();
        let a = orient_edge(&x, &y).unwrap();
        let b = orient_edge(&y, &x).unwrap();
        prop_assert_eq!(a.weight, b.weight);
        prop_assert_eq!(a.statistic, -b.statistic);
        if a.statistic != 0.0 {
            prop_assert_ne!(a.forward, b.forward);
        }
    }

    #[test]
    fn estimate_network_is_permutation_equivariant(n in 4usize..10, seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let levels = random_walk(&mut r, n, 12, -0.05, 0.06);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        // Column i of the original becomes column perm[i].
        let relabelled: Vec<Vec<f64>> = levels
            .iter()
            .map(|row| {
                let mut out = vec![0.0; n];
                for (i, v) in row.iter().enumerate() {
                    out[perm[i]] = *v;
                }
                out
            })
            .collect();
        let a = estimate_network(&levels, &[]).unwrap();
        let b = estimate_network(&relabelled, &[]).unwrap();
        let mut expected = a.permuted(&perm).unwrap().edges();
        let mut got = b.edges();
        let key = |e: &ppi_core::network::Edge| (e.source, e.target);
        expected.sort_by_key(key);
        got.sort_by_key(key);
        prop_assert_eq!(expected.len(), got.len());
        for (e, g) in expected.iter().zip(&got) {
            prop_assert_eq!((e.source, e.target), (g.source, g.target));
            prop_assert!((e.weight - g.weight).abs() < 1e-12);
        }
    }
}

#[test]
fn four_indicator_country_gives_six_edges() {
    let levels = random_walk(&mut rng(4), 4, 8, -0.05, 0.06);
    let panel = build_panel(
        vec![CountrySeries { code: "AAA".into(), levels, ipc: 0.5, budget: 1.0 }],
        &[],
        None,
    );
    let net = estimate_network(&panel.country_matrix("AAA").unwrap(), &[]).unwrap();
    assert_eq!(net.edge_count(), 6);
    assert_eq!(net, estimate_network(&panel.country_matrix("AAA").unwrap(), &[]).unwrap());
    assert!(generate_synthetic_panel(2, 4, 8, 4).is_err());
}

#[test]
fn estimated_networks_carry_one_direction_per_pair() {
    for seed in 0..50 {
        let panel = generate_synthetic_panel(2, 9, 10, seed).unwrap();
        let net = estimate_network(&panel.country_matrix("C01").unwrap(), &[]).unwrap();
        assert_eq!(net.edge_count(), 3 * (9 - 2));
        for i in 0..9 {
            assert_eq!(net.weight(i, i), 0.0);
            for j in 0..9 {
                assert!(net.weight(i, j) == 0.0 || net.weight(j, i) == 0.0, "seed {seed}: {i}<->{j}");
            }
            let incident = (0..9).filter(|&j| net.weight(i, j) != 0.0 || net.weight(j, i) != 0.0).count();
            assert_eq!(net.degrees()[i], incident);
        }
    }
}

#[test]
fn pooling_adds_difference_rows() {
    let panel = generate_synthetic_panel(3, 6, 6, 9).unwrap();
    let own = panel.country_matrix("C00").unwrap();
    let pooled = estimate_network(&own, &[panel.country_matrix("C01").unwrap()]).unwrap();
    assert_eq!(pooled.edge_count(), 12);
    assert!(estimate_network(&own, &[vec![vec![0.5; 5]; 6]]).is_err());
}
