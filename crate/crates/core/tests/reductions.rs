mod common;

use duocover::pipeline::seeded_rng;
use duocover::reductions::{
    beta_for, hitting_set_to_scp, random_hitting_set, random_scp, scp_to_dcp, solve_dcp, solve_scp, HittingSetInstance,
    ScpInstance,
};
use proptest::prelude::*;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hitting_set_answers_survive_both_steps(seed in 0u64..1_000_000, universe in 2usize..8, n_sets in 1usize..7) {
        let mut rng = seeded_rng(seed);
        let m = 1 + (seed as usize % universe);
        let hs = random_hitting_set(&mut rng, universe, n_sets, m);
        let truth = brute_hitting_set(universe, &hs.sets, m);
        let scp = hitting_set_to_scp(&hs).unwrap();
        prop_assert_eq!(solve_scp(&scp).unwrap().yes, truth);
        let dcp = scp_to_dcp(&scp);
        let d = solve_dcp(&dcp).unwrap();
        prop_assert_eq!(d.yes, truth);
        prop_assert_eq!(dcp.beta, -1.0);
        // the extra column is open in every optimum
        prop_assert!(d.open.contains(&dcp.extra_column()));
    }

    #[test]
    fn dcp_optimum_is_scp_optimum_plus_offset(seed in 0u64..1_000_000, rows in 1usize..7, cols in 2usize..8) {
        let mut rng = seeded_rng(seed);
        let k = 1 + (seed as usize % cols);
        let scp = random_scp(&mut rng, rows, cols, k, 50);
        let dcp = scp_to_dcp(&scp);
        let scp_opt = enumerate_single_cover(&scp.costs, k);
        let (dcp_opt, _) = enumerate_optimum(&dcp.costs, k + 1, None).unwrap();
        prop_assert_eq!(dcp_opt, scp_opt + rows as f64 * dcp.beta);
        prop_assert_eq!(solve_dcp(&dcp).unwrap().value, dcp_opt);
        prop_assert_eq!(solve_scp(&scp).unwrap().value, scp_opt);
        prop_assert!(dcp.costs.iter().all(|r| r[..cols].iter().all(|&c| c > dcp.beta)));
    }
}

#[test]
fn beta_is_strictly_below_every_cost() {
    for costs in [vec![vec![0.0, 3.0]], vec![vec![-7.5, 2.0]], vec![vec![1e6, 2e6]], vec![vec![-1e6, 0.0]]] {
        let scp = ScpInstance::new(costs.clone(), 1, 0.0).unwrap();
        let b = beta_for(&scp);
        assert!(costs.iter().flatten().all(|&c| c - b >= 1.0));
    }
}

#[test]
fn construction_errors() {
    assert!(HittingSetInstance::new(3, vec![vec![0, 3]], 1).is_err());
    assert!(ScpInstance::new(vec![], 1, 0.0).is_err());
    assert!(ScpInstance::new(vec![vec![f64::NAN]], 1, 0.0).is_err());
}
