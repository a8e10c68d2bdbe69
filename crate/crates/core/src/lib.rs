//! Placement of dual-parented metro nodes.
//!
//! Every exchange site must be connected to two distinct open metro nodes;
//! the task is to open exactly `k` of the `n` sites so that the sum of each
//! site's two cheapest connections is minimal. The crate provides
//!
//! * [`instance`]: sites, the load-weighted cost model and allocation,
//! * [`clustering`]: overlapping k-means, cluster-based candidate sampling
//!   and the k-closest-neighbour baseline,
//! * [`solver`]: an exact branch-and-bound (optionally restricted to a
//!   candidate map) and an exact feasibility check,
//! * [`milp`]: LP-format export of the integer program,
//! * [`reductions`]: hitting set / single coverage constructions used as
//!   cross-checking oracles,
//! * [`pipeline`]: synthetic instances, downsampling and the benchmark
//!   harness.

pub mod clustering;
pub mod error;
pub mod instance;
pub mod io;
pub mod milp;
pub mod pipeline;
pub mod reductions;
pub mod solver;

pub use clustering::{CandidateMap, CandidateSource, ClusterState, SamplingConfig};
pub use error::{Error, Result};
pub use instance::{Allocation, CostMatrix, ExchangeSite, Instance};
pub use solver::{solve_exact, solve_restricted, SolveOptions, SolveResult, SolveStatus};
