use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::instance::{default_alpha, ExchangeSite, Instance, DEFAULT_ROUTING_FACTOR};

/// Extent of the generated region in km.
pub const BOX_WIDTH: f64 = 300.0;
pub const BOX_HEIGHT: f64 = 450.0;

/// Median site load and log-scale spread.
const LOAD_MEDIAN: f64 = 40.0;
const LOAD_SIGMA: f64 = 1.1;
/// Sites per town on average, and the spread of a town in km.
const SITES_PER_TOWN: usize = 25;
const TOWN_SIGMA: (f64, f64) = (3.0, 15.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialProfile {
    Uniform,
    ClusteredTowns,
}

impl std::str::FromStr for SpatialProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SpatialProfile::Uniform),
            "towns" | "clustered" | "clustered-towns" => Ok(SpatialProfile::ClusteredTowns),
            _ => Err(Error::param(format!("unknown spatial profile {s:?}"))),
        }
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Synthetic master instance with `n` sites: integer loads from a
/// heavy-tailed distribution, alpha from [`default_alpha`], `k = 2`.
pub fn generate_master<R: Rng + ?Sized>(n: usize, profile: SpatialProfile, rng: &mut R) -> Result<Instance> {
    if n < 2 {
        return Err(Error::param(format!("a master instance needs n >= 2, got {n}")));
    }
    let loads = LogNormal::new(LOAD_MEDIAN.ln(), LOAD_SIGMA).expect("valid parameters");
    let coords: Vec<(f64, f64)> = match profile {
        SpatialProfile::Uniform => (0..n)
            .map(|_| (rng.random_range(0.0..BOX_WIDTH), rng.random_range(0.0..BOX_HEIGHT)))
            .collect(),
        SpatialProfile::ClusteredTowns => {
            let n_towns = n.div_ceil(SITES_PER_TOWN).max(1);
            let size = LogNormal::new(0.0, 1.0).expect("valid parameters");
            let towns: Vec<(f64, f64, f64, f64)> = (0..n_towns)
                .map(|_| {
                    (
                        rng.random_range(0.0..BOX_WIDTH),
                        rng.random_range(0.0..BOX_HEIGHT),
                        rng.random_range(TOWN_SIGMA.0..TOWN_SIGMA.1),
                        size.sample(rng),
                    )
                })
                .collect();
            let total: f64 = towns.iter().map(|t| t.3).sum();
            (0..n)
                .map(|_| {
                    let mut pick = rng.random_range(0.0..total);
                    let town = towns
                        .iter()
                        .find(|t| {
                            pick -= t.3;
                            pick < 0.0
                        })
                        .unwrap_or(&towns[n_towns - 1]);
                    let spread = Normal::new(0.0, town.2).expect("valid parameters");
                    (
                        (town.0 + spread.sample(rng)).clamp(0.0, BOX_WIDTH),
                        (town.1 + spread.sample(rng)).clamp(0.0, BOX_HEIGHT),
                    )
                })
                .collect()
        }
    };
    let sites = coords
        .into_iter()
        .enumerate()
        .map(|(id, (x, y))| {
            let load = loads.sample(rng).round().max(1.0);
            ExchangeSite::new(id, round3(x), round3(y), load, default_alpha(load))
        })
        .collect();
    Instance::new(sites, 2, DEFAULT_ROUTING_FACTOR)
}
