use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{ExchangeSite, Instance};

pub const MAX_LLOYD_ITERATIONS: usize = 10_000;

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Aggregates `instance` into `m` sites by weighted k-means (weights
/// `alpha * load`). Each cluster becomes a site at its weighted centroid
/// carrying the summed load and the load-weighted mean alpha; clusters are
/// numbered by their smallest member id. `k` is clamped to `m`.
pub fn downsample<R: Rng + ?Sized>(instance: &Instance, m: usize, rng: &mut R) -> Result<Instance> {
    let n = instance.n();
    if m == 0 || m > n {
        return Err(Error::param(format!("downsample target must lie in 1..={n}, got {m}")));
    }
    let sites = instance.sites();
    let pts: Vec<(f64, f64)> = sites.iter().map(|s| (s.x, s.y)).collect();
    let w: Vec<f64> = sites.iter().map(ExchangeSite::weight).collect();

    let mut means: Vec<(f64, f64)> = rand::seq::index::sample(rng, n, m)
        .into_iter()
        .map(|i| pts[i])
        .collect();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut next: Vec<usize> = pts
            .iter()
            .map(|&p| {
                let mut best = 0;
                for c in 1..m {
                    if sq_dist(p, means[c]) < sq_dist(p, means[best]) {
                        best = c;
                    }
                }
                best
            })
            .collect();
        fill_empty(&mut next, &pts, &means, m);
        if next == assign {
            break;
        }
        assign = next;
        let mut acc = vec![(0.0, 0.0, 0.0); m];
        for i in 0..n {
            let a = &mut acc[assign[i]];
            a.0 += w[i] * pts[i].0;
            a.1 += w[i] * pts[i].1;
            a.2 += w[i];
        }
        for c in 0..m {
            means[c] = (acc[c].0 / acc[c].2, acc[c].1 / acc[c].2);
        }
    }

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..n {
        clusters[assign[i]].push(i);
    }
    clusters.sort_by_key(|members| members[0]);
    let out = clusters
        .iter()
        .enumerate()
        .map(|(id, members)| {
            if let [only] = members[..] {
                let s = &sites[only];
                return ExchangeSite::new(id, s.x, s.y, s.load, s.alpha);
            }
            let wsum: f64 = members.iter().map(|&i| w[i]).sum();
            let x = members.iter().map(|&i| w[i] * pts[i].0).sum::<f64>() / wsum;
            let y = members.iter().map(|&i| w[i] * pts[i].1).sum::<f64>() / wsum;
            let load: f64 = members.iter().map(|&i| sites[i].load).sum();
            let alpha = members.iter().map(|&i| sites[i].load * sites[i].alpha).sum::<f64>() / load;
            ExchangeSite::new(id, x, y, load, alpha)
        })
        .collect();
    Instance::new(out, instance.k().min(m), instance.routing_factor())
}

/// Gives every empty cluster the site farthest from its own mean, taken
/// from clusters that keep at least one member.
fn fill_empty(assign: &mut [usize], pts: &[(f64, f64)], means: &[(f64, f64)], m: usize) {
    let mut sizes = vec![0usize; m];
    for &c in assign.iter() {
        sizes[c] += 1;
    }
    for c in 0..m {
        if sizes[c] > 0 {
            continue;
        }
        let mut pick: Option<(f64, usize)> = None;
        for (i, &a) in assign.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = sq_dist(pts[i], means[a]);
            if pick.is_none_or(|(bd, _)| d > bd) {
                pick = Some((d, i));
            }
        }
        let (_, i) = pick.expect("m <= n leaves a cluster with two members");
        sizes[assign[i]] -= 1;
        assign[i] = c;
        sizes[c] = 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::seeded_rng;

    fn line(n: usize) -> Instance {
        let sites = (0..n)
            .map(|i| ExchangeSite::new(i, i as f64 * 2.0, (i % 3) as f64, 1.0 + i as f64, 1.0 / (1.0 + i as f64)))
            .collect();
        Instance::new(sites, 2, 1.6).unwrap()
    }

    #[test]
    fn m_equals_n_is_identity() {
        let inst = line(9);
        let out = downsample(&inst, 9, &mut seeded_rng(3)).unwrap();
        assert_eq!(out, inst);
    }

    #[test]
    fn single_cluster_is_weighted_centroid() {
        let inst = line(5);
        let out = downsample(&inst, 1, &mut seeded_rng(1)).unwrap();
        assert_eq!(out.n(), 1);
        let s = out.site(0);
        // every site has weight alpha * load = 1
        assert!((s.x - 4.0).abs() < 1e-12);
        assert!((s.y - 0.8).abs() < 1e-12);
        assert_eq!(s.load, 15.0);
        assert!((s.alpha - 5.0 / 15.0).abs() < 1e-12);
        assert_eq!(out.k(), 1);
    }

    #[test]
    fn coincident_sites_still_fill_all_clusters() {
        let sites = (0..4).map(|i| ExchangeSite::new(i, 0.0, 0.0, 1.0, 1.0)).collect();
        let inst = Instance::new(sites, 2, 1.6).unwrap();
        let out = downsample(&inst, 4, &mut seeded_rng(0)).unwrap();
        assert_eq!(out.n(), 4);
        assert_eq!(out.total_load(), 4.0);
    }

    #[test]
    fn bad_target() {
        assert!(downsample(&line(3), 4, &mut seeded_rng(0)).is_err());
        assert!(downsample(&line(3), 0, &mut seeded_rng(0)).is_err());
    }
}
