//! Exact and candidate-restricted optimisation of the double-coverage
//! placement problem.

mod bnb;
mod feasibility;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_medoids, compute_overlapping_clusters, run_rng, CandidateMap, MedoidFallback};
use crate::error::{Error, Result};
use crate::instance::{Allocation, CostMatrix, Instance};

pub use feasibility::{check_feasible, check_feasible_until, Feasibility};

use bnb::{Col, Model, Search, Tuning};

/// Seed of the clustering run whose medoids warm-start the exact search.
pub const WARM_START_SEED: u64 = 0x05ee_dcb5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub allocation: Option<Allocation>,
    /// Best lower bound at termination; equals the optimum when `Optimal`.
    pub bound: f64,
    pub nodes_explored: u64,
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn total_cost(&self) -> Option<f64> {
        self.allocation.as_ref().map(|a| a.total_cost)
    }

    fn infeasible(started: Instant) -> Self {
        SolveResult {
            status: SolveStatus::Infeasible,
            allocation: None,
            bound: f64::INFINITY,
            nodes_explored: 0,
            wall_time: started.elapsed(),
        }
    }

    /// Serializable summary. `wall_time` is omitted unless `with_time`.
    pub fn report(&self, with_time: bool) -> SolveReport {
        let alloc = self.allocation.as_ref();
        SolveReport {
            status: self.status,
            total_cost: alloc.map(|a| a.total_cost),
            open: alloc.map(|a| a.open.clone()).unwrap_or_default(),
            primary: alloc.map(|a| a.primary.clone()).unwrap_or_default(),
            secondary: alloc.map(|a| a.secondary.clone()).unwrap_or_default(),
            bound: self.bound.is_finite().then_some(self.bound),
            nodes_explored: self.nodes_explored,
            wall_time: with_time.then_some(self.wall_time.as_secs_f64()),
        }
    }
}

/// JSON form of a [`SolveResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub total_cost: Option<f64>,
    pub open: Vec<usize>,
    pub primary: Vec<usize>,
    pub secondary: Vec<usize>,
    pub bound: Option<f64>,
    pub nodes_explored: u64,
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Nodes expanded concurrently. 1 gives a fully deterministic search.
    pub threads: usize,
    /// Subgradient iterations at the root and at every other node.
    pub root_iterations: usize,
    pub node_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let t = Tuning::default();
        SolveOptions {
            time_limit: None,
            threads: 1,
            root_iterations: t.root_iterations,
            node_iterations: t.node_iterations,
        }
    }
}

impl SolveOptions {
    pub fn with_time_limit(limit: Duration) -> Self {
        SolveOptions {
            time_limit: Some(limit),
            ..Default::default()
        }
    }

    fn tuning(&self) -> Tuning {
        Tuning {
            root_iterations: self.root_iterations,
            node_iterations: self.node_iterations,
            ..Tuning::default()
        }
    }
}

/// Minimum-cost placement of `instance.k()` metro nodes over all sites.
pub fn solve_exact(instance: &Instance, options: &SolveOptions) -> Result<SolveResult> {
    let started = Instant::now();
    let costs = instance.cost_matrix();
    let warm = warm_start(instance);
    solve_costs_from(&costs, instance.k(), None, warm.as_deref(), options, started)
}

/// Same objective, but site `i` may only be parented by positions in
/// `candidates.pos(i)`.
pub fn solve_restricted(
    instance: &Instance,
    candidates: &CandidateMap,
    options: &SolveOptions,
) -> Result<SolveResult> {
    let started = Instant::now();
    let costs = instance.cost_matrix();
    let warm = warm_start(instance);
    solve_costs_from(&costs, instance.k(), Some(candidates), warm.as_deref(), options, started)
}

/// Solver entry point for an arbitrary rows-by-columns cost matrix.
pub fn solve_costs(
    costs: &CostMatrix,
    k: usize,
    candidates: Option<&CandidateMap>,
    options: &SolveOptions,
) -> Result<SolveResult> {
    solve_costs_from(costs, k, candidates, None, options, Instant::now())
}

/// Medoids of one overlapping-clustering run.
fn warm_start(instance: &Instance) -> Option<Vec<usize>> {
    let k = instance.k();
    if k < 2 {
        return None;
    }
    let mut rng = run_rng(WARM_START_SEED, 0);
    let state = compute_overlapping_clusters(instance, k, &mut rng).ok()?;
    Some(
        cluster_medoids(instance, &state, MedoidFallback::AvoidChosen)
            .into_iter()
            .flatten()
            .collect(),
    )
}

fn solve_costs_from(
    costs: &CostMatrix,
    k: usize,
    candidates: Option<&CandidateMap>,
    warm: Option<&[usize]>,
    options: &SolveOptions,
    started: Instant,
) -> Result<SolveResult> {
    let n = costs.cols();
    if k > n {
        return Err(Error::param(format!("k = {k} exceeds the {n} available positions")));
    }
    if let Some(cm) = candidates {
        if cm.len() != costs.rows() || cm.n_positions() != n {
            return Err(Error::param(format!(
                "candidate map is {}x{}, cost matrix is {}x{}",
                cm.len(),
                cm.n_positions(),
                costs.rows(),
                n
            )));
        }
    }
    if k < 2 {
        return Ok(SolveResult::infeasible(started));
    }
    let deadline = options.time_limit.map(|t| started + t);

    let model = Model::new(costs, k, candidates);
    let search = Search::new(&model, options.tuning(), deadline);
    let mut root = vec![Col::Free; n];

    if let Some(cm) = candidates {
        match check_feasible_until(n, k, cm, deadline) {
            Feasibility::Infeasible { .. } => return Ok(SolveResult::infeasible(started)),
            Feasibility::Unknown => {
                return Ok(SolveResult {
                    status: SolveStatus::TimedOut,
                    allocation: None,
                    bound: f64::NEG_INFINITY,
                    nodes_explored: 0,
                    wall_time: started.elapsed(),
                })
            }
            Feasibility::Feasible { witness } => search.offer_open_set(&witness),
        }
        // With at least k usable positions some optimum avoids the unused
        // ones: swapping an unused open position for a usable one never
        // raises any row's cost.
        let unused = model.unused_columns();
        if n - unused.len() >= k {
            for j in unused {
                root[j] = Col::Closed;
            }
        }
    }

    let start = warm.unwrap_or(&[]);
    search.offer_open_set(&model.greedy_complete(start));

    let end = search.run(root, options.threads);
    let incumbent = search.incumbent.into_inner();
    let wall_time = started.elapsed();
    Ok(match (end.complete, incumbent) {
        (true, Some(a)) => SolveResult {
            status: SolveStatus::Optimal,
            bound: a.total_cost,
            allocation: Some(a),
            nodes_explored: end.nodes,
            wall_time,
        },
        (true, None) => SolveResult {
            status: SolveStatus::Infeasible,
            allocation: None,
            bound: f64::INFINITY,
            nodes_explored: end.nodes,
            wall_time,
        },
        (false, a) => SolveResult {
            status: SolveStatus::TimedOut,
            bound: match &a {
                Some(a) => end.open_bound.min(a.total_cost),
                None => end.open_bound,
            },
            allocation: a,
            nodes_explored: end.nodes,
            wall_time,
        },
    })
}

/// Lower bound used by the search for the subtree where `open` is forced
/// open and `closed` forced closed (`None` when the subtree is empty).
pub fn subtree_lower_bound(
    costs: &CostMatrix,
    k: usize,
    candidates: Option<&CandidateMap>,
    open: &[usize],
    closed: &[usize],
    iterations: usize,
) -> Option<f64> {
    let model = Model::new(costs, k, candidates);
    let mut state = vec![Col::Free; costs.cols()];
    for &j in open {
        state[j] = Col::Open;
    }
    for &j in closed {
        state[j] = Col::Closed;
    }
    Search::new(&model, Tuning::default(), None).node_bound(&state, iterations)
}

/// The two-cheapest part of the node bound on its own.
pub fn two_cheapest_bound(costs: &CostMatrix, closed: &[usize], candidates: Option<&CandidateMap>) -> Option<f64> {
    let model = Model::new(costs, 2, candidates);
    let mut state = vec![Col::Free; costs.cols()];
    for &j in closed {
        state[j] = Col::Closed;
    }
    model.two_cheapest_bound(&state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::kcn_candidates;
    use crate::instance::ExchangeSite;

    fn line(xs: &[f64], k: usize) -> Instance {
        let sites = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ExchangeSite::new(i, x, 0.0, 1.0, 1.0))
            .collect();
        Instance::new(sites, k, 1.0).unwrap()
    }

    #[test]
    fn collinear_four_sites() {
        let inst = line(&[0.0, 1.0, 2.0, 3.0], 2);
        let res = solve_exact(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        let a = res.allocation.unwrap();
        assert_eq!(a.open, vec![1, 2]);
        assert!((a.total_cost - 8.0).abs() < 1e-12);
        assert_eq!(res.bound, 8.0);
    }

    #[test]
    fn k_equals_n_opens_everything() {
        let inst = line(&[0.0, 1.0, 3.0, 7.0, 8.0], 5);
        let res = solve_exact(&inst, &SolveOptions::default()).unwrap();
        let a = res.allocation.unwrap();
        assert_eq!(a.open, vec![0, 1, 2, 3, 4]);
        let c = inst.cost_matrix();
        let expected: f64 = (0..5)
            .map(|i| {
                (0..5)
                    .filter(|&j| j != i)
                    .map(|j| c.get(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        assert!((a.total_cost - expected).abs() < 1e-12);
        for i in 0..5 {
            assert_eq!(a.primary[i], i);
        }
    }

    #[test]
    fn k_below_two_is_infeasible() {
        let inst = line(&[0.0, 1.0, 2.0], 1);
        let res = solve_exact(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
        assert!(res.allocation.is_none());
    }

    #[test]
    fn k_above_n_is_a_parameter_error() {
        let costs = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(solve_costs(&costs, 3, None, &SolveOptions::default()).is_err());
    }

    #[test]
    fn full_candidates_match_exact() {
        let inst = line(&[0.0, 2.0, 3.0, 7.0, 11.0, 12.0], 3);
        let exact = solve_exact(&inst, &SolveOptions::default()).unwrap();
        let full = solve_restricted(&inst, &CandidateMap::full(6), &SolveOptions::default()).unwrap();
        assert_eq!(exact.status, full.status);
        assert_eq!(exact.total_cost(), full.total_cost());
    }

    #[test]
    fn singleton_candidates_are_infeasible() {
        let inst = line(&[0.0, 2.0, 3.0, 7.0], 3);
        let cm = kcn_candidates(&inst, 1).unwrap();
        let res = solve_restricted(&inst, &cm, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
        assert!(res.allocation.is_none());
    }

    #[test]
    fn report_omits_time_unless_asked() {
        let inst = line(&[0.0, 1.0, 2.0, 3.0], 2);
        let res = solve_exact(&inst, &SolveOptions::default()).unwrap();
        let r = res.report(false);
        assert_eq!(r.wall_time, None);
        assert_eq!(r.open, vec![1, 2]);
        assert_eq!(r.total_cost, Some(8.0));
        assert!(res.report(true).wall_time.is_some());
    }
}
