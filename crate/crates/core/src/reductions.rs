//! Hitting set → single coverage → double coverage.
//!
//! The constructions are shipped as instance generators so the solver can
//! be cross-checked against independent enumerations: a hitting set of size
//! `m` exists iff the single-coverage instance reaches cost 0, and a
//! single-coverage instance reaches `phi` iff the double-coverage transform
//! (one extra column `s` that is cheaper than everything else for every
//! row) reaches `phi + |A| * beta` with one more open column.

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::CostMatrix;
use crate::solver::{solve_costs, SolveOptions, SolveStatus};

/// Largest column count [`solve_scp`] will enumerate.
pub const SCP_ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HittingSetInstance {
    pub universe_size: usize,
    pub sets: Vec<Vec<usize>>,
    pub m: usize,
}

impl HittingSetInstance {
    pub fn new(universe_size: usize, sets: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        if m > universe_size {
            return Err(Error::param(format!("budget {m} exceeds universe size {universe_size}")));
        }
        if sets.iter().flatten().any(|&e| e >= universe_size) {
            return Err(Error::param("set element outside the universe"));
        }
        Ok(HittingSetInstance {
            universe_size,
            sets,
            m,
        })
    }
}

/// Single-coverage decision instance over a rows-by-columns cost table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScpInstance {
    pub costs: Vec<Vec<f64>>,
    pub k: usize,
    pub phi: f64,
}

impl ScpInstance {
    pub fn new(costs: Vec<Vec<f64>>, k: usize, phi: f64) -> Result<Self> {
        let cols = costs.first().map_or(0, Vec::len);
        if costs.is_empty() || cols == 0 || costs.iter().any(|r| r.len() != cols) {
            return Err(Error::param("cost table must be a non-empty rectangle"));
        }
        if costs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::param("costs must be finite"));
        }
        if k == 0 || k > cols {
            return Err(Error::param(format!("k = {k} must lie in 1..={cols}")));
        }
        Ok(ScpInstance { costs, k, phi })
    }

    pub fn n_rows(&self) -> usize {
        self.costs.len()
    }

    pub fn n_cols(&self) -> usize {
        self.costs[0].len()
    }

    pub fn min_cost(&self) -> f64 {
        self.costs.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// The double-coverage decision instance built from an [`ScpInstance`].
/// The extra column is the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct DcpDecision {
    pub costs: Vec<Vec<f64>>,
    pub k: usize,
    pub phi: f64,
    pub beta: f64,
}

impl DcpDecision {
    pub fn cost_matrix(&self) -> CostMatrix {
        CostMatrix::from_rows(&self.costs).expect("validated when built")
    }

    pub fn extra_column(&self) -> usize {
        self.costs[0].len() - 1
    }
}

pub fn hitting_set_to_scp(hs: &HittingSetInstance) -> Result<ScpInstance> {
    let costs = hs
        .sets
        .iter()
        .map(|set| {
            (0..hs.universe_size)
                .map(|j| if set.contains(&j) { 0.0 } else { 1.0 })
                .collect()
        })
        .collect();
    ScpInstance::new(costs, hs.m, 0.0)
}

/// A cost strictly below every entry: `min - max(1, |min| * 1e-3)`.
pub fn beta_for(scp: &ScpInstance) -> f64 {
    let min = scp.min_cost();
    min - (min.abs() * 1e-3).max(1.0)
}

pub fn scp_to_dcp(scp: &ScpInstance) -> DcpDecision {
    let beta = beta_for(scp);
    let costs = scp
        .costs
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.push(beta);
            r
        })
        .collect();
    DcpDecision {
        costs,
        k: scp.k + 1,
        phi: scp.phi + scp.n_rows() as f64 * beta,
        beta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub yes: bool,
    /// Optimal total cost.
    pub value: f64,
    /// An optimal column set, ascending.
    pub open: Vec<usize>,
}

/// Exact single-coverage decision by enumerating all `k`-subsets of
/// columns (at most [`SCP_ENUMERATION_LIMIT`] columns).
pub fn solve_scp(scp: &ScpInstance) -> Result<Decision> {
    let cols = scp.n_cols();
    if cols > SCP_ENUMERATION_LIMIT {
        return Err(Error::param(format!(
            "{cols} columns exceed the enumeration limit of {SCP_ENUMERATION_LIMIT}"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_subset(cols, scp.k, |subset| {
        let value: f64 = scp
            .costs
            .iter()
            .map(|row| subset.iter().map(|&j| row[j]).fold(f64::INFINITY, f64::min))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, subset.to_vec()));
        }
    });
    let (value, open) = best.expect("k <= cols guarantees at least one subset");
    Ok(Decision {
        yes: value <= scp.phi,
        value,
        open,
    })
}

/// Double-coverage decision on the transform, solved by the exact search.
pub fn solve_dcp(dcp: &DcpDecision) -> Result<Decision> {
    let res = solve_costs(&dcp.cost_matrix(), dcp.k, None, &SolveOptions::default())?;
    match (res.status, res.allocation) {
        (SolveStatus::Optimal, Some(a)) => Ok(Decision {
            yes: a.total_cost <= dcp.phi,
            value: a.total_cost,
            open: a.open,
        }),
        (status, _) => Err(Error::param(format!("double-coverage solve ended {status:?}"))),
    }
}

/// Calls `f` with every ascending `k`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            return;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Random hitting-set instance: `n_sets` non-empty subsets of `0..universe`.
pub fn random_hitting_set<R: Rng + ?Sized>(rng: &mut R, universe: usize, n_sets: usize, m: usize) -> HittingSetInstance {
    let sets = (0..n_sets)
        .map(|_| {
            let mut set: Vec<usize> = (0..universe).filter(|_| rng.random_bool(0.3)).collect();
            if set.is_empty() {
                set.push(rng.random_range(0..universe));
            }
            set
        })
        .collect();
    HittingSetInstance::new(universe, sets, m).expect("generated within bounds")
}

/// Random single-coverage instance with integer costs in `0..=max_cost`;
/// `phi` is drawn from the range of attainable values.
pub fn random_scp<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, k: usize, max_cost: u32) -> ScpInstance {
    let costs: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(0..=max_cost) as f64).collect())
        .collect();
    let phi = rng.random_range(0..=(max_cost as usize * rows / 2)) as f64;
    ScpInstance::new(costs, k, phi).expect("generated within bounds")
}
