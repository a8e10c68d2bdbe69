//! Decision version of the restricted problem: is there an open set of `k`
//! positions giving every site at least two open candidates?
//!
//! Exact depth-first search over the most constrained site. Subtrees are
//! pruned with two lower bounds on the number of positions still required:
//! a disjoint packing of needy sites and a Lagrangian bound of the
//! set-multicover relaxation.

use std::time::Instant;

use crate::clustering::CandidateMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    /// A valid open set of exactly `k` positions, ascending.
    Feasible { witness: Vec<usize> },
    /// Sites that cannot all be doubly covered by `k` positions.
    Infeasible { certificate: Vec<usize> },
    /// The deadline passed before the search finished.
    Unknown,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Feasibility::Infeasible { .. })
    }
}

/// Exact feasibility check over `n` positions.
pub fn check_feasible(n: usize, k: usize, candidates: &CandidateMap) -> Feasibility {
    check_feasible_until(n, k, candidates, None)
}

pub fn check_feasible_until(
    n: usize,
    k: usize,
    candidates: &CandidateMap,
    deadline: Option<Instant>,
) -> Feasibility {
    let rows = candidates.len();
    if rows == 0 {
        return Feasibility::Feasible {
            witness: (0..k.min(n)).collect(),
        };
    }
    if let Some(i) = (0..rows).find(|&i| candidates.pos(i).len() < 2) {
        return Feasibility::Infeasible { certificate: vec![i] };
    }
    if k < 2 || k > n {
        return Feasibility::Infeasible { certificate: vec![0] };
    }

    let mut search = Dfs::new(n, k, candidates, deadline);
    let root_packing = search.packing();
    if root_packing.0 > k {
        return Feasibility::Infeasible {
            certificate: root_packing.1,
        };
    }
    if search.multicover_bound(k, ROOT_ITERATIONS) > k as f64 + BOUND_EPS {
        let certificate = (0..rows).filter(|&i| search.u[i] > 0.0).collect();
        return Feasibility::Infeasible { certificate };
    }
    if search.run() {
        let mut witness: Vec<usize> = (0..n).filter(|&j| search.in_m[j]).collect();
        for j in 0..n {
            if witness.len() >= k {
                break;
            }
            if !search.in_m[j] {
                witness.push(j);
            }
        }
        witness.sort_unstable();
        Feasibility::Feasible { witness }
    } else if search.timed_out {
        Feasibility::Unknown
    } else {
        Feasibility::Infeasible {
            certificate: (0..rows).collect(),
        }
    }
}

const ROOT_ITERATIONS: usize = 60;
const NODE_ITERATIONS: usize = 25;
const BOUND_EPS: f64 = 1e-7;

struct Dfs<'a> {
    k: usize,
    candidates: &'a CandidateMap,
    /// Rows that list each position.
    col_rows: Vec<Vec<usize>>,
    in_m: Vec<bool>,
    excluded: Vec<bool>,
    need: Vec<u8>,
    /// Multipliers of the multicover relaxation, kept across nodes.
    u: Vec<f64>,
    col_sum: Vec<f64>,
    m_size: usize,
    deadline: Option<Instant>,
    timed_out: bool,
    steps: u64,
}

impl<'a> Dfs<'a> {
    fn new(n: usize, k: usize, candidates: &'a CandidateMap, deadline: Option<Instant>) -> Self {
        let mut col_rows = vec![Vec::new(); n];
        for (i, j) in candidates.pairs() {
            col_rows[j].push(i);
        }
        Dfs {
            k,
            candidates,
            col_rows,
            in_m: vec![false; n],
            excluded: vec![false; n],
            need: vec![2; candidates.len()],
            u: (0..candidates.len())
                .map(|i| 1.0 / candidates.pos(i).len() as f64)
                .collect(),
            col_sum: vec![0.0; n],
            m_size: 0,
            deadline,
            timed_out: false,
            steps: 0,
        }
    }

    fn available(&self, i: usize) -> usize {
        self.candidates
            .pos(i)
            .iter()
            .filter(|&&j| !self.in_m[j] && !self.excluded[j])
            .count()
    }

    /// Greedy packing of needy rows with pairwise disjoint available sets:
    /// each needs its own positions, so the sum of their needs is a lower
    /// bound on the positions still to open.
    fn packing(&self) -> (usize, Vec<usize>) {
        let mut needy: Vec<(usize, usize)> = (0..self.need.len())
            .filter(|&i| self.need[i] > 0)
            .map(|i| (self.available(i), i))
            .collect();
        needy.sort_unstable();
        let mut taken = vec![false; self.in_m.len()];
        let mut total = 0;
        let mut rows = Vec::new();
        for (_, i) in needy {
            let avail = self
                .candidates
                .pos(i)
                .iter()
                .filter(|&&j| !self.in_m[j] && !self.excluded[j]);
            if avail.clone().any(|&j| taken[j]) {
                continue;
            }
            for &j in avail {
                taken[j] = true;
            }
            total += self.need[i] as usize;
            rows.push(i);
        }
        rows.sort_unstable();
        (total, rows)
    }

    /// Best value of `sum_i need_i u_i - sum_j max(0, sum_{i ~ j} u_i - 1)`
    /// over a few subgradient steps. For any `u >= 0` this is a lower bound
    /// on the positions needed: it is the dual of the relaxation
    /// `min sum_j y_j` with `sum_{j in Pos(i)} y_j >= need_i`, `0 <= y <= 1`.
    /// Stops early once the bound exceeds `remaining`.
    fn multicover_bound(&mut self, remaining: usize, iterations: usize) -> f64 {
        let n = self.in_m.len();
        let target = remaining as f64 + 1.0;
        let mut best = f64::NEG_INFINITY;
        let mut theta = 1.0;
        let mut stall = 0;
        let mut g = vec![0.0; self.need.len()];
        for _ in 0..iterations {
            let mut value = 0.0;
            for (i, &need) in self.need.iter().enumerate() {
                value += need as f64 * self.u[i];
            }
            for j in 0..n {
                if self.in_m[j] || self.excluded[j] {
                    continue;
                }
                let s: f64 = self.col_rows[j]
                    .iter()
                    .filter(|&&r| self.need[r] > 0)
                    .map(|&r| self.u[r])
                    .sum();
                self.col_sum[j] = s;
                value -= (s - 1.0).max(0.0);
            }
            if value > best + 1e-12 {
                best = value;
                stall = 0;
            } else {
                stall += 1;
                if stall >= 5 {
                    theta /= 2.0;
                    stall = 0;
                }
            }
            if best > remaining as f64 + BOUND_EPS {
                break;
            }
            let mut norm = 0.0;
            for i in 0..self.need.len() {
                if self.need[i] == 0 {
                    g[i] = 0.0;
                    continue;
                }
                let over = self
                    .candidates
                    .pos(i)
                    .iter()
                    .filter(|&&j| !self.in_m[j] && !self.excluded[j] && self.col_sum[j] > 1.0)
                    .count();
                let gi = self.need[i] as f64 - over as f64;
                g[i] = if self.u[i] <= 0.0 && gi < 0.0 { 0.0 } else { gi };
                norm += g[i] * g[i];
            }
            if norm == 0.0 || theta < 1e-4 {
                break;
            }
            let step = theta * (target - value).max(0.05) / norm;
            for i in 0..self.need.len() {
                self.u[i] = (self.u[i] + step * g[i]).max(0.0);
            }
        }
        best
    }

    fn run(&mut self) -> bool {
        self.steps += 1;
        if self.steps.is_multiple_of(256) && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
        }
        if self.timed_out {
            return false;
        }
        let remaining = self.k - self.m_size;

        // most constrained needy row: least slack, then largest need
        let mut pick: Option<(usize, u8, usize)> = None;
        for i in 0..self.need.len() {
            let need = self.need[i];
            if need == 0 {
                continue;
            }
            let avail = self.available(i);
            if avail < need as usize || need as usize > remaining {
                return false;
            }
            let slack = avail - need as usize;
            let better = match pick {
                None => true,
                Some((s, nd, _)) => slack < s || (slack == s && need > nd),
            };
            if better {
                pick = Some((slack, need, i));
            }
        }
        let Some((_, _, row)) = pick else {
            return true;
        };
        if self.packing().0 > remaining {
            return false;
        }
        if self.multicover_bound(remaining, NODE_ITERATIONS) > remaining as f64 + BOUND_EPS {
            return false;
        }

        let mut options: Vec<(usize, usize)> = self
            .candidates
            .pos(row)
            .iter()
            .filter(|&&j| !self.in_m[j] && !self.excluded[j])
            .map(|&j| {
                let cover = self.col_rows[j].iter().filter(|&&r| self.need[r] > 0).count();
                (usize::MAX - cover, j)
            })
            .collect();
        options.sort_unstable();

        let mut tried = Vec::new();
        let mut found = false;
        for (_, j) in options {
            self.in_m[j] = true;
            self.m_size += 1;
            let touched: Vec<usize> = self.col_rows[j]
                .iter()
                .copied()
                .filter(|&r| self.need[r] > 0)
                .collect();
            for &r in &touched {
                self.need[r] -= 1;
            }
            if self.run() {
                found = true;
                break;
            }
            for &r in &touched {
                self.need[r] += 1;
            }
            self.in_m[j] = false;
            self.m_size -= 1;
            self.excluded[j] = true;
            tried.push(j);
            if self.timed_out {
                break;
            }
        }
        for j in tried {
            self.excluded[j] = false;
        }
        found
    }
}
