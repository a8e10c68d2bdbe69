mod common;

use duocover::clustering::{
    cluster_medoids, compute_overlapping_clusters, kcn_candidates, run_rng, sample_candidates, MedoidFallback,
    SamplingConfig,
};
use duocover::pipeline::{seeded_rng, SpatialProfile};
use duocover::solver::check_feasible;
use proptest::prelude::*;

use common::*;

/// Overlapping cost of an assignment under the given means, recomputed here.
fn assignment_cost(inst: &duocover::Instance, means: &[(f64, f64)], p: &[Vec<usize>], s: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    for c in 0..means.len() {
        for &i in p[c].iter().chain(&s[c]) {
            let site = inst.site(i);
            let d = ((site.x - means[c].0).powi(2) + (site.y - means[c].1).powi(2)).sqrt();
            total += site.alpha * site.load * d;
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn returned_state_is_consistent(seed in 0u64..100_000, n in 3usize..80, k in 2usize..10) {
        let k = k.min(n);
        let mut rng = seeded_rng(seed);
        let inst = scattered_instance(&mut rng, n, 2);
        let st = compute_overlapping_clusters(&inst, k, &mut run_rng(seed, 1)).unwrap();
        prop_assert_eq!(st.k(), k);
        // P gets the closest mean, S the second closest
        for c in 0..k {
            for &i in &st.p[c] {
                let site = inst.site(i);
                let d = |m: (f64, f64)| ((site.x - m.0).powi(2) + (site.y - m.1).powi(2)).sqrt();
                prop_assert!(st.means.iter().all(|&m| d(st.means[c]) <= d(m)));
            }
        }
        prop_assert!(rel_close(assignment_cost(&inst, &st.means, &st.p, &st.s), st.cost, 1e-9));
        prop_assert_eq!(*st.accepted_costs.last().unwrap(), st.cost);
        prop_assert_eq!(st.iterations, st.accepted_costs.len() + 1);
    }

    #[test]
    fn medoids_come_from_their_cluster(seed in 0u64..100_000, n in 4usize..60, k in 2usize..8) {
        let k = k.min(n);
        let mut rng = seeded_rng(seed);
        let inst = scattered_instance(&mut rng, n, 2);
        let st = compute_overlapping_clusters(&inst, k, &mut run_rng(seed, 0)).unwrap();
        for fallback in [MedoidFallback::Verbatim, MedoidFallback::AvoidChosen] {
            let med = cluster_medoids(&inst, &st, fallback);
            for c in 0..k {
                match med[c] {
                    Some(m) if !st.p[c].is_empty() => prop_assert!(st.p[c].contains(&m)),
                    Some(m) => prop_assert!(st.s[c].contains(&m)),
                    None => prop_assert!(st.p[c].is_empty() && st.s[c].is_empty()),
                }
            }
        }
    }

    #[test]
    fn sampled_positions_are_medoids_of_own_clusters(seed in 0u64..100_000, n in 4usize..50) {
        let mut rng = seeded_rng(seed);
        let inst = scattered_instance(&mut rng, n, 2);
        let k = 2 + (seed as usize % 4).min(n - 2);
        let cm = sample_candidates(&inst, &SamplingConfig::new(3, k, seed)).unwrap();
        // rebuild the union from the individual runs
        let mut want = vec![Vec::new(); n];
        for run in 0..3 {
            let st = compute_overlapping_clusters(&inst, k, &mut run_rng(seed, run)).unwrap();
            let med = cluster_medoids(&inst, &st, MedoidFallback::AvoidChosen);
            for c in 0..k {
                if let Some(m) = med[c] {
                    for i in st.members(c) {
                        want[i].push(m);
                    }
                }
            }
        }
        for (i, w) in want.iter_mut().enumerate() {
            w.sort_unstable();
            w.dedup();
            prop_assert_eq!(cm.pos(i), &w[..]);
        }
    }
}

#[test]
fn sampling_is_reproducible_and_thread_invariant() {
    let inst = random_instance(5, 120, 8, SpatialProfile::ClusteredTowns);
    let base = sample_candidates(&inst, &SamplingConfig::new(20, 8, 42)).unwrap();
    let again = sample_candidates(&inst, &SamplingConfig::new(20, 8, 42)).unwrap();
    let threaded = sample_candidates(
        &inst,
        &SamplingConfig {
            threads: 5,
            ..SamplingConfig::new(20, 8, 42)
        },
    )
    .unwrap();
    assert_eq!(base, again);
    assert_eq!(base, threaded);
    let other = sample_candidates(&inst, &SamplingConfig::new(20, 8, 43)).unwrap();
    assert_ne!(base, other);
}

#[test]
fn more_runs_only_add_candidates() {
    let inst = random_instance(6, 90, 6, SpatialProfile::Uniform);
    let mut prev = sample_candidates(&inst, &SamplingConfig::new(1, 6, 7)).unwrap();
    for runs in [2, 5, 10, 30] {
        let cur = sample_candidates(&inst, &SamplingConfig::new(runs, 6, 7)).unwrap();
        assert!(prev.is_subset_of(&cur));
        prev = cur;
    }
}

#[test]
fn cbs_maps_are_feasible_on_generated_instances() {
    for seed in 0..12u64 {
        let profile = if seed % 2 == 0 { SpatialProfile::Uniform } else { SpatialProfile::ClusteredTowns };
        let inst = random_instance(seed, 60, 6, profile);
        let cm = sample_candidates(&inst, &SamplingConfig::new(30, 6, seed)).unwrap();
        assert!((0..60).all(|i| cm.pos(i).len() >= 2));
        assert!(check_feasible(60, 6, &cm).is_feasible());
    }
}

#[test]
fn kcn_lists_are_cheapest_and_nested() {
    let inst = random_instance(8, 30, 4, SpatialProfile::Uniform);
    let costs = oracle_matrix(&inst);
    for nb in 1..=30 {
        let cm = kcn_candidates(&inst, nb).unwrap();
        for i in 0..30 {
            let chosen = cm.pos(i);
            assert_eq!(chosen.len(), nb);
            let worst_in = chosen.iter().map(|&j| costs[i][j]).fold(f64::MIN, f64::max);
            let best_out = (0..30)
                .filter(|j| !chosen.contains(j))
                .map(|j| costs[i][j])
                .fold(f64::INFINITY, f64::min);
            assert!(worst_in <= best_out * (1.0 + 1e-12));
        }
        if nb > 1 {
            assert!(kcn_candidates(&inst, nb - 1).unwrap().is_subset_of(&cm));
        }
    }
    assert!(kcn_candidates(&inst, 31).is_err());
}
