//! Problem data: exchange sites, the fibre cost model and evaluation of a
//! metro-node placement.
//!
//! A site `i` parented by a metro node at site `j` costs
//! `routing_factor * dist(i, j) * alpha_i * load_i`. Every site is served
//! by its cheapest and second-cheapest open metro node; the placement cost
//! is the sum of both connections over all sites.

use serde::{Deserialize, Serialize};

use crate::clustering::CandidateMap;
use crate::error::{Error, Result};

/// Routing factor applied to straight-line distances to estimate fibre length.
pub const DEFAULT_ROUTING_FACTOR: f64 = 1.6;

/// Above this many sites the cost matrix is evaluated on demand.
pub const DENSE_COST_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeSite {
    pub id: usize,
    /// Planar coordinates in km.
    pub x: f64,
    pub y: f64,
    /// Number of customers behind the exchange.
    pub load: f64,
    /// Fibre-sharing coefficient; decreases with load.
    pub alpha: f64,
}

impl ExchangeSite {
    pub fn new(id: usize, x: f64, y: f64, load: f64, alpha: f64) -> Self {
        ExchangeSite { id, x, y, load, alpha }
    }

    /// Clustering weight `alpha * load`.
    #[inline]
    pub fn weight(&self) -> f64 {
        self.alpha * self.load
    }

    #[inline]
    pub fn distance(&self, other: &ExchangeSite) -> f64 {
        euclidean(self.x, self.y, other.x, other.y)
    }
}

/// Decreasing alpha used when a site's coefficient is not supplied by the
/// generator: `1 / (1 + log10(load))`.
pub fn default_alpha(load: f64) -> f64 {
    1.0 / (1.0 + load.max(1.0).log10())
}

#[inline]
pub(crate) fn euclidean(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let dx = ax - bx;
    let dy = ay - by;
    (dx * dx + dy * dy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    sites: Vec<ExchangeSite>,
    k: usize,
    routing_factor: f64,
}

impl Instance {
    /// Validates and builds an instance. Site ids must be exactly `0..n` in
    /// order.
    pub fn new(sites: Vec<ExchangeSite>, k: usize, routing_factor: f64) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidInstance("no sites".into()));
        }
        if !(routing_factor > 0.0 && routing_factor.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "routing factor must be positive, got {routing_factor}"
            )));
        }
        if k == 0 || k > sites.len() {
            return Err(Error::InvalidInstance(format!(
                "metro-node budget k = {k} must lie in 1..={}",
                sites.len()
            )));
        }
        for (pos, s) in sites.iter().enumerate() {
            if s.id != pos {
                return Err(Error::InvalidInstance(format!(
                    "site ids must be contiguous from 0; position {pos} holds id {}",
                    s.id
                )));
            }
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::InvalidInstance(format!("site {pos}: non-finite coordinate")));
            }
            if !(s.load > 0.0 && s.load.is_finite()) {
                return Err(Error::InvalidInstance(format!("site {pos}: load must be positive")));
            }
            if !(s.alpha > 0.0 && s.alpha.is_finite()) {
                return Err(Error::InvalidInstance(format!("site {pos}: alpha must be positive")));
            }
        }
        Ok(Instance {
            sites,
            k,
            routing_factor,
        })
    }

    pub fn sites(&self) -> &[ExchangeSite] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &ExchangeSite {
        &self.sites[i]
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn routing_factor(&self) -> f64 {
        self.routing_factor
    }

    /// Same sites with a different metro-node budget.
    pub fn with_k(&self, k: usize) -> Result<Instance> {
        Instance::new(self.sites.clone(), k, self.routing_factor)
    }

    pub fn total_load(&self) -> f64 {
        self.sites.iter().map(|s| s.load).sum()
    }

    /// Cost of parenting site `i` on a metro node placed at site `j`.
    pub fn cost(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        for index in [i, j] {
            if index >= n {
                return Err(Error::Index { index, n });
            }
        }
        Ok(self.cost_unchecked(i, j))
    }

    #[inline]
    fn cost_unchecked(&self, i: usize, j: usize) -> f64 {
        let a = &self.sites[i];
        let b = &self.sites[j];
        self.routing_factor * a.distance(b) * a.alpha * a.load
    }

    pub fn cost_matrix(&self) -> CostMatrix {
        CostMatrix::from_instance(self)
    }

    /// Evaluates the placement `open`, which must hold exactly `k` distinct
    /// sites.
    pub fn evaluate(&self, open: &[usize]) -> Result<Allocation> {
        if open.len() != self.k {
            if open.len() < 2 {
                return Err(Error::InfeasibleEvaluation(open.len()));
            }
            return Err(Error::param(format!(
                "open set has {} sites but k = {}",
                open.len(),
                self.k
            )));
        }
        self.cost_matrix().allocate(open)
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Dense(Vec<f64>),
    Geometric {
        sites: Vec<ExchangeSite>,
        routing_factor: f64,
    },
}

/// Row-major allocation costs between demand rows and candidate columns.
///
/// Geometric instances have square matrices; the reduction generators build
/// rectangular ones with arbitrary (possibly negative) entries.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    repr: Repr,
}

impl CostMatrix {
    pub fn from_instance(instance: &Instance) -> Self {
        let n = instance.n();
        if n > DENSE_COST_LIMIT {
            return CostMatrix::lazy(instance);
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(instance.cost_unchecked(i, j));
            }
        }
        CostMatrix {
            rows: n,
            cols: n,
            repr: Repr::Dense(data),
        }
    }

    fn lazy(instance: &Instance) -> Self {
        CostMatrix {
            rows: instance.n(),
            cols: instance.n(),
            repr: Repr::Geometric {
                sites: instance.sites().to_vec(),
                routing_factor: instance.routing_factor(),
            },
        }
    }

    /// General matrix from explicit rows. All rows must have equal length and
    /// finite entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::param("cost matrix must be non-empty"));
        }
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::param(format!("row {i} has {} entries, expected {c}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::param(format!("row {i} holds non-finite cost {v}")));
            }
            data.extend_from_slice(row);
        }
        Ok(CostMatrix {
            rows: r,
            cols: c,
            repr: Repr::Dense(data),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.repr, Repr::Dense(_))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.repr {
            Repr::Dense(data) => data[i * self.cols + j],
            Repr::Geometric {
                sites,
                routing_factor,
            } => {
                let a = &sites[i];
                routing_factor * a.distance(&sites[j]) * a.alpha * a.load
            }
        }
    }

    /// Unrestricted allocation of every row to its two cheapest open columns.
    pub fn allocate(&self, open: &[usize]) -> Result<Allocation> {
        self.check_open(open)?;
        Ok(self
            .allocate_with(open, None)
            .expect("unrestricted allocation with >= 2 open columns always succeeds"))
    }

    /// Allocation where row `i` may only use columns in `candidates.pos(i)`.
    /// Returns `Ok(None)` when some row sees fewer than two allowed open
    /// columns.
    pub fn allocate_restricted(
        &self,
        open: &[usize],
        candidates: &CandidateMap,
    ) -> Result<Option<Allocation>> {
        self.check_open(open)?;
        if candidates.len() != self.rows {
            return Err(Error::param(format!(
                "candidate map covers {} sites, expected {}",
                candidates.len(),
                self.rows
            )));
        }
        Ok(self.allocate_with(open, Some(candidates)))
    }

    fn check_open(&self, open: &[usize]) -> Result<()> {
        if open.len() < 2 {
            return Err(Error::InfeasibleEvaluation(open.len()));
        }
        let mut seen = vec![false; self.cols];
        for &j in open {
            if j >= self.cols {
                return Err(Error::Index {
                    index: j,
                    n: self.cols,
                });
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::param(format!("site {j} appears twice in the open set")));
            }
        }
        Ok(())
    }

    pub(crate) fn allocate_with(
        &self,
        open: &[usize],
        candidates: Option<&CandidateMap>,
    ) -> Option<Allocation> {
        let mut sorted = open.to_vec();
        sorted.sort_unstable();
        let mut is_open = vec![false; self.cols];
        for &j in &sorted {
            is_open[j] = true;
        }
        let mut primary = Vec::with_capacity(self.rows);
        let mut secondary = Vec::with_capacity(self.rows);
        let mut total = 0.0;
        for i in 0..self.rows {
            let (first, second) = match candidates {
                None => two_cheapest(sorted.iter().map(|&j| (j, self.get(i, j))))?,
                Some(cm) => two_cheapest(
                    cm.pos(i)
                        .iter()
                        .filter(|&&j| is_open[j])
                        .map(|&j| (j, self.get(i, j))),
                )?,
            };
            total += first.1 + second.1;
            primary.push(first.0);
            secondary.push(second.0);
        }
        Some(Allocation {
            open: sorted,
            primary,
            secondary,
            total_cost: total,
        })
    }
}

/// Cheapest and second-cheapest `(id, cost)` pairs. The input must be in
/// ascending id order so that ties resolve to the lower id.
fn two_cheapest(items: impl Iterator<Item = (usize, f64)>) -> Option<((usize, f64), (usize, f64))> {
    let mut first: Option<(usize, f64)> = None;
    let mut second: Option<(usize, f64)> = None;
    for (j, c) in items {
        match first {
            Some((_, c1)) if c >= c1 => match second {
                Some((_, c2)) if c >= c2 => {}
                _ => second = Some((j, c)),
            },
            _ => {
                second = first;
                first = Some((j, c));
            }
        }
    }
    Some((first?, second?))
}

/// A placement with each site's primary and secondary metro node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Open metro-node sites, ascending.
    pub open: Vec<usize>,
    pub primary: Vec<usize>,
    pub secondary: Vec<usize>,
    pub total_cost: f64,
}

impl Allocation {
    /// Cost carried by site `i` (primary plus secondary connection).
    pub fn site_cost(&self, costs: &CostMatrix, i: usize) -> f64 {
        costs.get(i, self.primary[i]) + costs.get(i, self.secondary[i])
    }
}
