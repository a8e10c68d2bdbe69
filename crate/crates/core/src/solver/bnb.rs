//! Best-first branch-and-bound over the open/closed status of every
//! candidate column.
//!
//! Once the open set is fixed the allocation is forced (two cheapest open
//! columns per row), so the search only branches on columns. Each node is
//! bounded by the larger of
//!
//! * the two-cheapest bound: every row pays at least its two cheapest
//!   columns among those not yet closed, and
//! * a Lagrangian bound obtained by relaxing the "exactly two parents"
//!   rows with multipliers `u`: for fixed `u` the relaxation splits into one
//!   reduced cost `rho_j = sum_i min(0, c_ij - u_i)` per column and picking
//!   the cheapest feasible column set, giving `2 sum_i u_i + sum rho_j`.
//!
//! Multipliers are improved by subgradient steps and inherited by children.
//! Every relaxed solution is also evaluated as a primal candidate, and the
//! reduced costs drive variable fixing against the incumbent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::clustering::CandidateMap;
use crate::instance::{Allocation, CostMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Col {
    Free,
    Open,
    Closed,
}

/// Pruning threshold: a subtree whose bound reaches it cannot improve the
/// incumbent by more than the relative tolerance.
#[inline]
pub(crate) fn cutoff(ub: f64) -> f64 {
    if ub.is_finite() {
        ub - 1e-10 * ub.abs().max(1.0)
    } else {
        f64::INFINITY
    }
}

/// Search tuning knobs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tuning {
    pub root_iterations: usize,
    pub node_iterations: usize,
    pub fixing_rounds: usize,
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning {
            root_iterations: 400,
            node_iterations: 60,
            fixing_rounds: 4,
        }
    }
}

/// Sparse view of the costs a search may use.
pub(crate) struct Model<'a> {
    costs: &'a CostMatrix,
    candidates: Option<&'a CandidateMap>,
    k: usize,
    /// Per row: allowed `(column, cost)` pairs sorted by cost then column.
    rows: Vec<Vec<(u32, f64)>>,
    /// Per column: `(row, cost)` pairs of the rows allowed to use it.
    cols: Vec<Vec<(u32, f64)>>,
}

impl<'a> Model<'a> {
    pub fn new(costs: &'a CostMatrix, k: usize, candidates: Option<&'a CandidateMap>) -> Self {
        let nr = costs.rows();
        let nc = costs.cols();
        let mut rows = Vec::with_capacity(nr);
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nc];
        for i in 0..nr {
            let mut row: Vec<(u32, f64)> = match candidates {
                Some(cm) => cm.pos(i).iter().map(|&j| (j as u32, costs.get(i, j))).collect(),
                None => (0..nc).map(|j| (j as u32, costs.get(i, j))).collect(),
            };
            for &(j, c) in &row {
                cols[j as usize].push((i as u32, c));
            }
            row.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            rows.push(row);
        }
        Model {
            costs,
            candidates,
            k,
            rows,
            cols,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Columns no row may use.
    pub fn unused_columns(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| self.cols[j].is_empty()).collect()
    }

    pub fn evaluate(&self, open: &[usize]) -> Option<Allocation> {
        if open.len() < 2 {
            return None;
        }
        self.costs.allocate_with(open, self.candidates)
    }

    /// Sum over rows of the two cheapest columns that are not closed, or
    /// `None` if some row has fewer than two left.
    pub fn two_cheapest_bound(&self, state: &[Col]) -> Option<f64> {
        let mut total = 0.0;
        for row in &self.rows {
            let mut found = 0;
            for &(j, c) in row {
                if state[j as usize] != Col::Closed {
                    total += c;
                    found += 1;
                    if found == 2 {
                        break;
                    }
                }
            }
            if found < 2 {
                return None;
            }
        }
        Some(total)
    }

    /// Starting multipliers: the third-cheapest allowed cost of each row.
    pub fn initial_multipliers(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                let idx = 2.min(row.len().saturating_sub(1));
                row.get(idx).map_or(0.0, |&(_, c)| c)
            })
            .collect()
    }

    /// Greedily extends `start` (deduplicated, truncated to `k`) to `k`
    /// columns, each time adding the column that lowers the allocation cost
    /// most. Rows lacking two parents are charged a large penalty.
    pub fn greedy_complete(&self, start: &[usize]) -> Vec<usize> {
        let nc = self.n_cols();
        let mut chosen: Vec<usize> = Vec::new();
        let mut is_open = vec![false; nc];
        for &j in start {
            if j < nc && !is_open[j] && chosen.len() < self.k {
                is_open[j] = true;
                chosen.push(j);
            }
        }
        let max_cost = self
            .rows
            .iter()
            .filter_map(|r| r.last())
            .map(|&(_, c)| c.abs())
            .fold(1.0, f64::max);
        let penalty = max_cost * 1e3;
        // per row: (best, second) costs among open columns, penalty if absent
        let mut best: Vec<(f64, f64)> = vec![(penalty, penalty); self.n_rows()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, c) in row {
                if is_open[j as usize] {
                    let b = &mut best[i];
                    if c < b.0 {
                        *b = (c, b.0);
                    } else if c < b.1 {
                        b.1 = c;
                    }
                }
            }
        }
        while chosen.len() < self.k {
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..nc {
                if is_open[j] {
                    continue;
                }
                let gain: f64 = self.cols[j]
                    .iter()
                    .map(|&(i, c)| (best[i as usize].1 - c).max(0.0))
                    .sum();
                if pick.is_none_or(|(_, g)| gain > g) {
                    pick = Some((j, gain));
                }
            }
            let Some((j, _)) = pick else { break };
            is_open[j] = true;
            chosen.push(j);
            for &(i, c) in &self.cols[j] {
                let b = &mut best[i as usize];
                if c < b.0 {
                    *b = (c, b.0);
                } else if c < b.1 {
                    b.1 = c;
                }
            }
        }
        chosen.sort_unstable();
        chosen
    }
}

/// Best known solution, shared by all workers.
pub(crate) struct Incumbent {
    value_bits: AtomicU64,
    best: Mutex<Option<Allocation>>,
}

impl Incumbent {
    pub fn new() -> Self {
        Incumbent {
            value_bits: AtomicU64::new(f64::INFINITY.to_bits()),
            best: Mutex::new(None),
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        f64::from_bits(self.value_bits.load(AtomicOrdering::Acquire))
    }

    /// Installs `alloc` if it is strictly cheaper, or equally cheap with a
    /// lexicographically smaller open set.
    pub fn offer(&self, alloc: Allocation) -> bool {
        let mut guard = self.best.lock().expect("incumbent lock poisoned");
        let better = match guard.as_ref() {
            None => true,
            Some(cur) => {
                alloc.total_cost < cur.total_cost
                    || (alloc.total_cost == cur.total_cost && alloc.open < cur.open)
            }
        };
        if better {
            self.value_bits
                .store(alloc.total_cost.to_bits(), AtomicOrdering::Release);
            *guard = Some(alloc);
        }
        better
    }

    pub fn into_inner(self) -> Option<Allocation> {
        self.best.into_inner().expect("incumbent lock poisoned")
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    state: Vec<Col>,
    bound: f64,
    depth: usize,
    seq: u64,
    mult: Arc<Vec<f64>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is the one with the
    // lowest bound, then the deepest, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

enum Processed {
    Pruned,
    Branched(Node, Node),
    Interrupted(Node),
}

struct LagOut {
    bound: f64,
    mult: Vec<f64>,
    /// Free columns sorted by reduced cost at `mult`, with their reduced costs.
    free_sorted: Vec<(u32, f64)>,
}

pub(crate) struct Search<'m, 'a> {
    model: &'m Model<'a>,
    tuning: Tuning,
    deadline: Option<Instant>,
    pub incumbent: Incumbent,
}

/// Outcome of [`Search::run`].
pub(crate) struct SearchEnd {
    pub complete: bool,
    /// Smallest bound among unexplored nodes (infinity when none are left).
    pub open_bound: f64,
    pub nodes: u64,
}

impl<'m, 'a> Search<'m, 'a> {
    pub fn new(model: &'m Model<'a>, tuning: Tuning, deadline: Option<Instant>) -> Self {
        Search {
            model,
            tuning,
            deadline,
            incumbent: Incumbent::new(),
        }
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn offer_open_set(&self, open: &[usize]) {
        if open.len() == self.model.k() {
            if let Some(a) = self.model.evaluate(open) {
                self.incumbent.offer(a);
            }
        }
    }

    /// Runs the search from `root_state` with up to `threads` nodes expanded
    /// concurrently.
    pub fn run(&self, root_state: Vec<Col>, threads: usize) -> SearchEnd {
        let root = Node {
            state: root_state,
            bound: f64::NEG_INFINITY,
            depth: 0,
            seq: 0,
            mult: Arc::new(self.model.initial_multipliers()),
        };
        let mut heap = BinaryHeap::new();
        heap.push(root);
        let mut seq = 1u64;
        let mut nodes = 0u64;
        let threads = threads.max(1);

        loop {
            if self.expired() {
                break;
            }
            let ub = self.incumbent.value();
            let mut batch = Vec::with_capacity(threads);
            while batch.len() < threads {
                match heap.pop() {
                    Some(node) if node.bound < cutoff(ub) => batch.push(node),
                    Some(_) => {
                        // remaining nodes are all at least as bad
                        heap.clear();
                        break;
                    }
                    None => break,
                }
            }
            if batch.is_empty() {
                break;
            }
            nodes += batch.len() as u64;
            let results: Vec<Processed> = if batch.len() == 1 {
                batch.into_iter().map(|n| self.process(n)).collect()
            } else {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = batch
                        .into_iter()
                        .map(|n| scope.spawn(move || self.process(n)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("search worker panicked"))
                        .collect()
                })
            };
            for r in results {
                match r {
                    Processed::Pruned => {}
                    Processed::Branched(mut a, mut b) => {
                        a.seq = seq;
                        b.seq = seq + 1;
                        seq += 2;
                        heap.push(a);
                        heap.push(b);
                    }
                    Processed::Interrupted(node) => heap.push(node),
                }
            }
        }

        let ub = self.incumbent.value();
        let open_bound = heap
            .iter()
            .filter(|n| n.bound < cutoff(ub))
            .map(|n| n.bound)
            .fold(f64::INFINITY, f64::min);
        SearchEnd {
            complete: open_bound == f64::INFINITY,
            open_bound,
            nodes,
        }
    }

    fn process(&self, mut node: Node) -> Processed {
        let model = self.model;
        let k = model.k();
        for round in 0..=self.tuning.fixing_rounds {
            let n_open = node.state.iter().filter(|&&s| s == Col::Open).count();
            let n_free = node.state.iter().filter(|&&s| s == Col::Free).count();
            if n_open > k || n_open + n_free < k {
                return Processed::Pruned;
            }
            if n_open == k || n_open + n_free == k {
                let open: Vec<usize> = (0..node.state.len())
                    .filter(|&j| node.state[j] != Col::Closed)
                    .collect();
                self.offer_open_set(&open);
                return Processed::Pruned;
            }

            let Some(simple) = model.two_cheapest_bound(&node.state) else {
                return Processed::Pruned;
            };
            node.bound = node.bound.max(simple);
            if node.bound >= cutoff(self.incumbent.value()) {
                return Processed::Pruned;
            }

            let iterations = if node.depth == 0 && round == 0 {
                self.tuning.root_iterations
            } else if round == 0 {
                self.tuning.node_iterations
            } else {
                self.tuning.node_iterations / 2
            };
            let lag = self.lagrangian(&node.state, n_open, &node.mult, iterations);
            node.bound = node.bound.max(lag.bound);
            node.mult = Arc::new(lag.mult);
            let ub = self.incumbent.value();
            if node.bound >= cutoff(ub) {
                return Processed::Pruned;
            }
            if self.expired() {
                return Processed::Interrupted(node);
            }

            let r = k - n_open;
            let fs = &lag.free_sorted;
            let mut changed = false;
            if ub.is_finite() && fs.len() > r {
                let limit = cutoff(ub);
                let rho_last = fs[r - 1].1;
                let rho_next = fs[r].1;
                for (pos, &(j, rho)) in fs.iter().enumerate() {
                    if pos < r {
                        if lag.bound - rho + rho_next >= limit {
                            node.state[j as usize] = Col::Open;
                            changed = true;
                        }
                    } else if lag.bound - rho_last + rho >= limit {
                        node.state[j as usize] = Col::Closed;
                        changed = true;
                    }
                }
            }
            if changed {
                continue;
            }
            // branch on the most attractive column of the relaxed solution
            let branch = fs[0].0 as usize;
            let mut with = node.clone();
            with.state[branch] = Col::Open;
            with.depth += 1;
            let mut without = node;
            without.state[branch] = Col::Closed;
            without.depth += 1;
            return Processed::Branched(with, without);
        }
        // fixing kept changing the node; hand it back to the queue as is
        Processed::Interrupted(node)
    }

    fn lagrangian(&self, state: &[Col], n_open: usize, start: &[f64], max_iter: usize) -> LagOut {
        let model = self.model;
        let r = model.k() - n_open;
        let open: Vec<u32> = (0..state.len())
            .filter(|&j| state[j] == Col::Open)
            .map(|j| j as u32)
            .collect();
        let mut free: Vec<(u32, f64)> = (0..state.len())
            .filter(|&j| state[j] == Col::Free)
            .map(|j| (j as u32, 0.0))
            .collect();

        let reduced = |u: &[f64], j: u32| -> f64 {
            model.cols[j as usize]
                .iter()
                .map(|&(i, c)| (c - u[i as usize]).min(0.0))
                .sum()
        };
        let sort_free = |free: &mut Vec<(u32, f64)>| {
            free.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        };

        let mut u = start.to_vec();
        let mut best_bound = f64::NEG_INFINITY;
        let mut best_u = u.clone();
        let mut theta = 2.0;
        let mut stall = 0;
        let mut counts = vec![0u32; model.n_rows()];
        let mut last_eval: Vec<usize> = Vec::new();

        for _ in 0..max_iter {
            let mut value = 2.0 * u.iter().sum::<f64>();
            for &j in &open {
                value += reduced(&u, j);
            }
            for f in free.iter_mut() {
                f.1 = reduced(&u, f.0);
            }
            sort_free(&mut free);
            value += free[..r].iter().map(|f| f.1).sum::<f64>();

            if value > best_bound {
                if value > best_bound + 1e-12 * best_bound.abs().max(1.0) {
                    stall = 0;
                } else {
                    stall += 1;
                }
                best_bound = value;
                best_u.copy_from_slice(&u);
            } else {
                stall += 1;
            }
            if stall >= 20 {
                theta *= 0.5;
                stall = 0;
            }

            let mut chosen: Vec<usize> = open
                .iter()
                .chain(free[..r].iter().map(|f| &f.0))
                .map(|&j| j as usize)
                .collect();
            chosen.sort_unstable();
            if chosen != last_eval {
                if let Some(a) = model.evaluate(&chosen) {
                    self.incumbent.offer(a);
                }
                last_eval = chosen;
            }

            let ub = self.incumbent.value();
            if best_bound >= cutoff(ub) || theta < 1e-6 || self.expired() {
                break;
            }

            counts.fill(0);
            for &j in &last_eval {
                for &(i, c) in &model.cols[j] {
                    if c < u[i as usize] {
                        counts[i as usize] += 1;
                    }
                }
            }
            let norm: f64 = counts.iter().map(|&c| (2.0 - c as f64).powi(2)).sum();
            if norm == 0.0 {
                // the relaxed solution is feasible, hence optimal for this node
                break;
            }
            let target = if ub.is_finite() {
                ub
            } else {
                value + 0.05 * value.abs() + 1.0
            };
            let step = theta * (target - value).max(1e-9 * value.abs().max(1.0)) / norm;
            for (ui, &c) in u.iter_mut().zip(&counts) {
                *ui += step * (2.0 - c as f64);
            }
        }

        for f in free.iter_mut() {
            f.1 = reduced(&best_u, f.0);
        }
        sort_free(&mut free);
        LagOut {
            bound: best_bound,
            mult: best_u,
            free_sorted: free,
        }
    }

    /// Lower bound of the subtree with the given column states, with no
    /// incumbent available for pruning. Exposed for bound checks.
    pub fn node_bound(&self, state: &[Col], iterations: usize) -> Option<f64> {
        let k = self.model.k();
        let n_open = state.iter().filter(|&&s| s == Col::Open).count();
        let n_free = state.iter().filter(|&&s| s == Col::Free).count();
        if n_open > k || n_open + n_free < k {
            return None;
        }
        let simple = self.model.two_cheapest_bound(state)?;
        if n_open == k || n_free == 0 {
            return Some(simple);
        }
        let lag = self.lagrangian(state, n_open, &self.model.initial_multipliers(), iterations);
        Some(simple.max(lag.bound))
    }
}
