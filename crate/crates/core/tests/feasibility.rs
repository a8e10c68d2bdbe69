mod common;

use duocover::clustering::{kcn_candidates, CandidateMap, CandidateSource};
use duocover::pipeline::{seeded_rng, SpatialProfile};
use duocover::solver::{check_feasible, Feasibility};
use proptest::prelude::*;
use rand::Rng;

use common::*;

fn covers(cm: &CandidateMap, open: &[usize], rows: &[usize]) -> bool {
    rows.iter()
        .all(|&i| cm.pos(i).iter().filter(|j| open.contains(j)).count() >= 2)
}

fn restrict(cm: &CandidateMap, rows: &[usize]) -> CandidateMap {
    let pos = rows.iter().map(|&i| cm.pos(i).to_vec()).collect();
    CandidateMap::new(pos, cm.n_positions(), CandidateSource::Imported).unwrap()
}

fn arb_map() -> impl Strategy<Value = (usize, usize, CandidateMap)> {
    (3usize..=12, 0u64..u64::MAX, 0.15f64..0.7).prop_map(|(n, seed, density)| {
        let mut rng = seeded_rng(seed);
        let k = rng.random_range(2..=n);
        let pos = (0..n)
            .map(|_| (0..n).filter(|_| rng.random_bool(density)).collect())
            .collect();
        (n, k, CandidateMap::new(pos, n, CandidateSource::Imported).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn agrees_with_brute_force((n, k, cm) in arb_map()) {
        let all: Vec<usize> = (0..cm.len()).collect();
        match check_feasible(n, k, &cm) {
            Feasibility::Feasible { witness } => {
                prop_assert_eq!(witness.len(), k);
                prop_assert!(witness.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(covers(&cm, &witness, &all));
                prop_assert!(brute_feasible(n, k, &cm));
            }
            Feasibility::Infeasible { certificate } => {
                prop_assert!(!brute_feasible(n, k, &cm));
                prop_assert!(!certificate.is_empty());
                // the certificate rows alone are already infeasible
                prop_assert!(!brute_feasible(n, k, &restrict(&cm, &certificate)));
            }
            Feasibility::Unknown => prop_assert!(false, "no deadline was set"),
        }
    }
}

#[test]
fn kcn_feasibility_is_monotone() {
    for seed in 0..4u64 {
        let inst = random_instance(seed, 40, 5, SpatialProfile::ClusteredTowns);
        let mut seen_feasible = false;
        for nb in 1..=40 {
            let f = check_feasible(40, 5, &kcn_candidates(&inst, nb).unwrap());
            assert!(!f.is_feasible() || nb >= 2);
            if seen_feasible {
                assert!(f.is_feasible(), "seed {seed}: infeasible again at {nb}");
            }
            seen_feasible |= f.is_feasible();
        }
        assert!(seen_feasible);
    }
}

#[test]
fn near_threshold_maps_resolve_quickly() {
    let inst = random_instance(77, 150, 10, SpatialProfile::ClusteredTowns);
    let started = std::time::Instant::now();
    for nb in 2..=60 {
        let f = check_feasible(150, 10, &kcn_candidates(&inst, nb).unwrap());
        assert!(!matches!(f, Feasibility::Unknown));
    }
    assert!(started.elapsed().as_secs() < 30, "{:?}", started.elapsed());
}
