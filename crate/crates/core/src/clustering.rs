//! Spatial grouping of observation sites into regions.
//!
//! Sites are clustered by k-means on (latitude, longitude) with k-means++
//! seeding, after which clusters whose average weekly sample size is too
//! small are merged into their nearest neighbor until every cluster clears
//! the threshold or a single cluster is left.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// Euclidean distance on raw degrees.
    #[default]
    Euclidean,
    /// Great-circle distance in kilometers.
    Haversine,
}

impl Distance {
    pub fn between(self, a: (f64, f64), b: (f64, f64)) -> f64 {
        match self {
            Distance::Euclidean => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
            Distance::Haversine => {
                const EARTH_RADIUS_KM: f64 = 6371.0088;
                let (lat1, lat2) = (a.0.to_radians(), b.0.to_radians());
                let dlat = lat2 - lat1;
                let dlon = (b.1 - a.1).to_radians();
                let h = (dlat / 2.0).sin().powi(2)
                    + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
                2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
            }
        }
    }
}

/// A sampling location with its total observation count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub count: usize,
}

impl Site {
    fn coords(&self) -> (f64, f64) {
        (self.latitude, self.longitude)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClusterOptions {
    pub k_init: usize,
    /// Minimum average number of observations per week.
    pub min_weekly: f64,
    /// Number of weeks in the sample window.
    pub weeks: usize,
    pub seed: u64,
    pub distance: Distance,
    pub max_iter: usize,
}

/// Final regions, numbered north to south (index 0 is northernmost).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAssignment {
    pub region_of_site: BTreeMap<String, usize>,
    /// `(latitude, longitude)` per region.
    pub centroids: Vec<(f64, f64)>,
    pub counts: Vec<usize>,
}

impl RegionAssignment {
    pub fn num_regions(&self) -> usize {
        self.centroids.len()
    }

    pub fn region(&self, site: &str) -> Option<usize> {
        self.region_of_site.get(site).copied()
    }
}

fn squared_euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn kmeans_plus_plus(points: &[(f64, f64)], k: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_euclid(*p, centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if *d > 0.0 && target < *d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = points[pick];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_euclid(*p, c));
        }
    }
    centers
}

/// Lloyd iterations from k-means++ seeds; returns one label per point.
/// Clusters that end up empty are dropped and labels compacted.
pub fn kmeans(points: &[(f64, f64)], k: usize, seed: u64, max_iter: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(points, k.min(points.len()), &mut rng);
    let mut labels = vec![0usize; points.len()];
    for iter in 0..max_iter.max(1) {
        let mut changed = false;
        for (label, p) in labels.iter_mut().zip(points) {
            let best = (0..centers.len())
                .min_by(|&a, &b| {
                    squared_euclid(*p, centers[a]).total_cmp(&squared_euclid(*p, centers[b]))
                })
                .expect("at least one center");
            changed |= best != *label;
            *label = best;
        }
        let mut sums = vec![(0.0, 0.0, 0usize); centers.len()];
        for (l, p) in labels.iter().zip(points) {
            sums[*l].0 += p.0;
            sums[*l].1 += p.1;
            sums[*l].2 += 1;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s.2 > 0 {
                *c = (s.0 / s.2 as f64, s.1 / s.2 as f64);
            }
        }
        if !changed && iter > 0 {
            break;
        }
    }
    let mut remap = BTreeMap::new();
    for l in &labels {
        let next = remap.len();
        remap.entry(*l).or_insert(next);
    }
    labels.iter().map(|l| remap[l]).collect()
}

struct Cluster {
    members: Vec<usize>,
    centroid: (f64, f64),
    count: usize,
}

/// Clusters sites into regions and merges under-sampled clusters.
pub fn cluster_regions(sites: &[Site], opts: &ClusterOptions) -> Result<RegionAssignment> {
    if sites.is_empty() {
        return Err(Error::EmptySample);
    }
    if opts.k_init == 0 || opts.weeks == 0 {
        return Err(Error::InvalidParameter(
            "k_init and the number of weeks must be positive".into(),
        ));
    }
    let points: Vec<(f64, f64)> = sites.iter().map(Site::coords).collect();
    let labels = kmeans(&points, opts.k_init, opts.seed, opts.max_iter);
    let k = labels.iter().max().map_or(0, |m| m + 1);

    let mut clusters: Vec<Cluster> = (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..sites.len()).filter(|&i| labels[i] == c).collect();
            let n = members.len() as f64;
            let centroid = members.iter().fold((0.0, 0.0), |acc, &i| {
                (acc.0 + points[i].0 / n, acc.1 + points[i].1 / n)
            });
            let count = members.iter().map(|&i| sites[i].count).sum();
            Cluster {
                members,
                centroid,
                count,
            }
        })
        .collect();

    let weeks = opts.weeks as f64;
    while clusters.len() > 1 {
        let smallest = (0..clusters.len())
            .min_by(|&a, &b| clusters[a].count.cmp(&clusters[b].count).then(a.cmp(&b)))
            .expect("nonempty");
        if clusters[smallest].count as f64 / weeks >= opts.min_weekly {
            break;
        }
        let from = clusters.swap_remove(smallest);
        let into = (0..clusters.len())
            .min_by(|&a, &b| {
                let da = opts.distance.between(from.centroid, clusters[a].centroid);
                let db = opts.distance.between(from.centroid, clusters[b].centroid);
                da.total_cmp(&db)
            })
            .expect("another cluster remains");
        let target = &mut clusters[into];
        let total = (target.count + from.count) as f64;
        if total > 0.0 {
            let (wa, wb) = (target.count as f64 / total, from.count as f64 / total);
            target.centroid = (
                wa * target.centroid.0 + wb * from.centroid.0,
                wa * target.centroid.1 + wb * from.centroid.1,
            );
        } else {
            target.centroid = (
                0.5 * (target.centroid.0 + from.centroid.0),
                0.5 * (target.centroid.1 + from.centroid.1),
            );
        }
        target.count += from.count;
        target.members.extend(from.members);
    }

    clusters.sort_by(|a, b| {
        b.centroid
            .0
            .total_cmp(&a.centroid.0)
            .then(a.centroid.1.total_cmp(&b.centroid.1))
    });
    let mut region_of_site = BTreeMap::new();
    for (r, c) in clusters.iter().enumerate() {
        for &i in &c.members {
            region_of_site.insert(sites[i].id.clone(), r);
        }
    }
    Ok(RegionAssignment {
        region_of_site,
        centroids: clusters.iter().map(|c| c.centroid).collect(),
        counts: clusters.iter().map(|c| c.count).collect(),
    })
}
