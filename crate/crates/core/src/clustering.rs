//! Candidate-position generation.
//!
//! [`compute_overlapping_clusters`] is a weighted k-means variant in which
//! every site belongs to two clusters: the one whose mean is closest (`P`)
//! and the one whose mean is second closest (`S`). [`sampling_points`]
//! repeats it and collects one medoid per cluster as a candidate metro
//! position for every member of that cluster (cluster-based sampling, CBS).
//! [`kcn_candidates`] is the plain k-cheapest-neighbours restriction.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{euclidean, CostMatrix, Instance};

/// Hard stop for the assignment/update loop. The loop terminates on its own
/// (accepted costs strictly decrease over a finite set of assignments); this
/// only guards against a pathological float cycle.
pub const MAX_CLUSTER_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSource {
    Cbs,
    Kcn,
    Full,
    /// Read back from a file; origin unknown.
    Imported,
}

/// Per-site set of allowed metro-node positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateMap {
    pos: Vec<Vec<usize>>,
    n_positions: usize,
    source: CandidateSource,
}

impl CandidateMap {
    /// Builds a map over `n_positions` columns. Each set is sorted and
    /// deduplicated.
    pub fn new(mut pos: Vec<Vec<usize>>, n_positions: usize, source: CandidateSource) -> Result<Self> {
        for (i, p) in pos.iter_mut().enumerate() {
            p.sort_unstable();
            p.dedup();
            if let Some(&bad) = p.iter().find(|&&j| j >= n_positions) {
                return Err(Error::param(format!(
                    "candidate {bad} of site {i} is not a valid position (n = {n_positions})"
                )));
            }
        }
        Ok(CandidateMap {
            pos,
            n_positions,
            source,
        })
    }

    /// Every site may use every position.
    pub fn full(n: usize) -> Self {
        CandidateMap {
            pos: vec![(0..n).collect(); n],
            n_positions: n,
            source: CandidateSource::Full,
        }
    }

    pub fn pos(&self, i: usize) -> &[usize] {
        &self.pos[i]
    }

    /// Number of sites covered.
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn n_positions(&self) -> usize {
        self.n_positions
    }

    pub fn source(&self) -> CandidateSource {
        self.source
    }

    pub fn is_full(&self) -> bool {
        self.pos.iter().all(|p| p.len() == self.n_positions)
    }

    pub fn total_candidates(&self) -> usize {
        self.pos.iter().map(Vec::len).sum()
    }

    /// Positions used by at least one site, ascending.
    pub fn used_positions(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_positions];
        for p in &self.pos {
            for &j in p {
                used[j] = true;
            }
        }
        (0..self.n_positions).filter(|&j| used[j]).collect()
    }

    /// True when every set of `self` is a subset of the matching set in `other`.
    pub fn is_subset_of(&self, other: &CandidateMap) -> bool {
        self.len() == other.len()
            && self
                .pos
                .iter()
                .zip(&other.pos)
                .all(|(a, b)| a.iter().all(|j| b.binary_search(j).is_ok()))
    }

    /// `(site, candidate)` pairs in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pos
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.iter().map(move |&j| (i, j)))
    }
}

/// Overlapping clustering: `p[c]` holds the sites whose closest mean is `c`,
/// `s[c]` those for which `c` is the second-closest mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    /// Means that produced the returned assignment.
    pub means: Vec<(f64, f64)>,
    pub p: Vec<Vec<usize>>,
    pub s: Vec<Vec<usize>>,
    pub cost: f64,
    /// Cost of every accepted iteration, in order.
    pub accepted_costs: Vec<f64>,
    /// Loop iterations executed, including the final rejected one.
    pub iterations: usize,
}

impl ClusterState {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    /// Members of cluster `c` (`p[c] ∪ s[c]`), ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        merge_sorted(&self.p[c], &self.s[c])
    }
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Indices of the closest and second-closest means; ties go to the lower
/// index, so the two always differ.
fn two_closest(x: f64, y: f64, means: &[(f64, f64)]) -> (usize, usize) {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for (c, &(mx, my)) in means.iter().enumerate() {
        let d = euclidean(x, y, mx, my);
        if best.0 == usize::MAX || d < best.1 {
            second = best;
            best = (c, d);
        } else if second.0 == usize::MAX || d < second.1 {
            second = (c, d);
        }
    }
    (best.0, second.0)
}

/// One run of the overlapping weighted k-means.
///
/// Means start at `k` distinct random sites. Each iteration assigns every
/// site to its closest and second-closest mean and computes the weighted
/// distance cost; while the cost strictly decreases the assignment is kept
/// and every mean moves to the weighted centroid of its `P ∪ S` members
/// (an empty cluster keeps its mean). The last accepted assignment is
/// returned.
pub fn compute_overlapping_clusters<R: Rng + ?Sized>(
    instance: &Instance,
    k: usize,
    rng: &mut R,
) -> Result<ClusterState> {
    let n = instance.n();
    if k < 2 {
        return Err(Error::param(format!(
            "overlapping clustering needs k >= 2 (second-closest mean), got {k}"
        )));
    }
    if k > n {
        return Err(Error::param(format!("k = {k} exceeds the number of sites {n}")));
    }
    let sites = instance.sites();
    let weights: Vec<f64> = sites.iter().map(|s| s.weight()).collect();

    let mut means: Vec<(f64, f64)> = index::sample(rng, n, k)
        .into_iter()
        .map(|i| (sites[i].x, sites[i].y))
        .collect();

    let mut cost = f64::INFINITY;
    let mut best: Option<(Vec<(f64, f64)>, Vec<Vec<usize>>, Vec<Vec<usize>>)> = None;
    let mut accepted_costs = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_CLUSTER_ITERATIONS {
        iterations += 1;
        let mut p = vec![Vec::new(); k];
        let mut s = vec![Vec::new(); k];
        for site in sites {
            let (first, second) = two_closest(site.x, site.y, &means);
            p[first].push(site.id);
            s[second].push(site.id);
        }

        let mut new_cost = 0.0;
        let mut members = Vec::with_capacity(k);
        for c in 0..k {
            let m = merge_sorted(&p[c], &s[c]);
            let (mx, my) = means[c];
            new_cost += m
                .iter()
                .map(|&j| weights[j] * euclidean(sites[j].x, sites[j].y, mx, my))
                .sum::<f64>();
            members.push(m);
        }

        if cost > new_cost {
            cost = new_cost;
            accepted_costs.push(new_cost);
            let used = means.clone();
            for (c, m) in members.iter().enumerate() {
                let total: f64 = m.iter().map(|&j| weights[j]).sum();
                if m.is_empty() || total <= 0.0 {
                    continue;
                }
                let sx: f64 = m.iter().map(|&j| weights[j] * sites[j].x).sum();
                let sy: f64 = m.iter().map(|&j| weights[j] * sites[j].y).sum();
                means[c] = (sx / total, sy / total);
            }
            best = Some((used, p, s));
        } else {
            break;
        }
    }

    let (means, p, s) = best.expect("the first iteration is always accepted");
    Ok(ClusterState {
        means,
        p,
        s,
        cost,
        accepted_costs,
        iterations,
    })
}

/// How a cluster with an empty `P` set picks its medoid from `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MedoidFallback {
    /// Medoid of `S` by weighted distance over `S`, exactly as written.
    Verbatim,
    /// Same criterion, but skipping sites already chosen as the medoid of a
    /// non-empty `P` cluster in the same run whenever `S` has another member.
    /// Without this, coincident means (always the case for k = 2) hand every
    /// site a single candidate.
    #[default]
    AvoidChosen,
}

/// The candidate that minimises the weighted distance to `over`; ties go to
/// the lower id.
fn weighted_medoid(
    instance: &Instance,
    from: impl Iterator<Item = usize>,
    over: &[usize],
) -> Option<usize> {
    let sites = instance.sites();
    let mut best: Option<(usize, f64)> = None;
    for cand in from {
        let c = &sites[cand];
        let total: f64 = over
            .iter()
            .map(|&j| sites[j].weight() * c.distance(&sites[j]))
            .sum();
        if best.is_none_or(|(_, b)| total < b) {
            best = Some((cand, total));
        }
    }
    best.map(|(id, _)| id)
}

/// One medoid per cluster (`None` for a cluster with no members).
pub fn cluster_medoids(
    instance: &Instance,
    state: &ClusterState,
    fallback: MedoidFallback,
) -> Vec<Option<usize>> {
    let k = state.k();
    let mut medoids = vec![None; k];
    for c in 0..k {
        if !state.p[c].is_empty() {
            let members = state.members(c);
            medoids[c] = weighted_medoid(instance, state.p[c].iter().copied(), &members);
        }
    }
    let chosen: Vec<usize> = medoids.iter().flatten().copied().collect();
    for c in 0..k {
        if !state.p[c].is_empty() || state.s[c].is_empty() {
            continue;
        }
        let s = &state.s[c];
        let pick = match fallback {
            MedoidFallback::Verbatim => None,
            MedoidFallback::AvoidChosen => {
                let mut free = s.iter().copied().filter(|j| !chosen.contains(j)).peekable();
                if free.peek().is_some() {
                    weighted_medoid(instance, free, s)
                } else {
                    None
                }
            }
        };
        medoids[c] = pick.or_else(|| weighted_medoid(instance, s.iter().copied(), s));
    }
    medoids
}

/// Parameters of cluster-based sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub nbruns: usize,
    pub k: usize,
    pub seed: u64,
    pub fallback: MedoidFallback,
    /// Worker threads for independent runs; the result does not depend on it.
    pub threads: usize,
}

impl SamplingConfig {
    pub fn new(nbruns: usize, k: usize, seed: u64) -> Self {
        SamplingConfig {
            nbruns,
            k,
            seed,
            fallback: MedoidFallback::default(),
            threads: 1,
        }
    }
}

/// Random stream for run `run` of a sampling with base seed `seed`.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Cluster-based sampling with the default medoid fallback, single-threaded.
pub fn sampling_points(instance: &Instance, nbruns: usize, k: usize, seed: u64) -> Result<CandidateMap> {
    sample_candidates(instance, &SamplingConfig::new(nbruns, k, seed))
}

pub fn sample_candidates(instance: &Instance, config: &SamplingConfig) -> Result<CandidateMap> {
    let n = instance.n();
    if config.nbruns == 0 {
        return Err(Error::param("nbruns must be at least 1"));
    }
    if config.k < 2 || config.k > n {
        return Err(Error::param(format!(
            "sampling needs 2 <= k <= n, got k = {} with n = {n}",
            config.k
        )));
    }

    let one_run = |run: usize| -> Result<Vec<(Vec<usize>, usize)>> {
        let mut rng = run_rng(config.seed, run);
        let state = compute_overlapping_clusters(instance, config.k, &mut rng)?;
        let medoids = cluster_medoids(instance, &state, config.fallback);
        Ok((0..config.k)
            .filter_map(|c| medoids[c].map(|m| (state.members(c), m)))
            .collect())
    };

    let threads = config.threads.max(1).min(config.nbruns);
    let mut per_run: Vec<Vec<(Vec<usize>, usize)>> = Vec::with_capacity(config.nbruns);
    if threads == 1 {
        for run in 0..config.nbruns {
            per_run.push(one_run(run)?);
        }
    } else {
        let chunks: Vec<Result<Vec<_>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let one_run = &one_run;
                    scope.spawn(move || {
                        (t..config.nbruns)
                            .step_by(threads)
                            .map(|run| one_run(run).map(|r| (run, r)))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect()
        });
        let mut indexed = Vec::new();
        for chunk in chunks {
            indexed.extend(chunk?);
        }
        indexed.sort_by_key(|(run, _)| *run);
        per_run = indexed.into_iter().map(|(_, r)| r).collect();
    }

    let mut pos = vec![Vec::new(); n];
    for run in per_run {
        for (members, medoid) in run {
            for j in members {
                pos[j].push(medoid);
            }
        }
    }
    CandidateMap::new(pos, n, CandidateSource::Cbs)
}

/// The `neighbors` cheapest positions of every site, ties by lower id.
pub fn kcn_candidates(instance: &Instance, neighbors: usize) -> Result<CandidateMap> {
    kcn_from_costs(&instance.cost_matrix(), neighbors)
}

pub fn kcn_from_costs(costs: &CostMatrix, neighbors: usize) -> Result<CandidateMap> {
    let cols = costs.cols();
    if neighbors == 0 || neighbors > cols {
        return Err(Error::param(format!(
            "neighbors must lie in 1..={cols}, got {neighbors}"
        )));
    }
    let pos = (0..costs.rows())
        .map(|i| {
            let mut order: Vec<usize> = (0..cols).collect();
            order.sort_by(|&a, &b| costs.get(i, a).total_cmp(&costs.get(i, b)).then(a.cmp(&b)));
            order.truncate(neighbors);
            order
        })
        .collect();
    let source = if neighbors == cols {
        CandidateSource::Full
    } else {
        CandidateSource::Kcn
    };
    CandidateMap::new(pos, cols, source)
}
