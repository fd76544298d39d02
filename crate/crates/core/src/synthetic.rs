//! Point observations drawn from B-spline mixture densities whose logit
//! coordinates follow the simulation DGP. Used for end-to-end checks of the
//! pipeline against a known edge set.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pipeline::Observation;
use crate::simplex::{logit_delta, softmax_delta, TransformConfig};
use crate::simulation::{generate, DgpParams, GroundTruth};
use crate::spline::SplineBasis;

#[derive(Debug, Clone)]
pub struct SyntheticDesign {
    /// Its `j` is the coordinate dimension of the spline basis.
    pub dgp: DgpParams,
    pub support: (f64, f64),
    pub degree: usize,
    pub delta: f64,
    /// Multiplier applied to the simulated coordinates.
    pub coord_scale: f64,
    /// Mixture weights at the origin of the coordinates.
    pub centre: Vec<f64>,
    pub obs_per_cell: usize,
    pub start_date: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub observations: Vec<Observation>,
    pub truth: GroundTruth,
    /// `weights[t][c]`.
    pub weights: Vec<Vec<Vec<f64>>>,
}

/// Draws one value from the normalized component `j` by rejection against a
/// flat envelope over its support.
struct ComponentSampler {
    lo: f64,
    hi: f64,
    envelope: f64,
}

impl ComponentSampler {
    fn new(basis: &SplineBasis, j: usize) -> Result<Self> {
        let knots = basis.knots();
        let (lo, hi) = (knots[j], knots[j + basis.degree() + 1]);
        let grid = 400;
        let mut peak: f64 = 0.0;
        for i in 0..=grid {
            let x = lo + (hi - lo) * i as f64 / grid as f64;
            peak = peak.max(basis.components(x)?[j]);
        }
        Ok(ComponentSampler {
            lo,
            hi,
            envelope: 1.05 * peak,
        })
    }

    fn draw(&self, basis: &SplineBasis, j: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
        loop {
            let x = rng.random_range(self.lo..=self.hi);
            if rng.random::<f64>() * self.envelope <= basis.components(x)?[j] {
                return Ok(x);
            }
        }
    }
}

/// Smooth single-bump weight vector used as the centre of the coordinates.
pub fn bump_weights(n: usize) -> Vec<f64> {
    let mid = (n as f64 - 1.0) / 2.0;
    let width = (n as f64 / 3.0).max(1.0);
    let raw: Vec<f64> = (0..n)
        .map(|i| 0.15 + (-((i as f64 - mid) / width).powi(2)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// One site per region at a distinct coordinate, with latitude decreasing in
/// the region index so that north-to-south numbering keeps the DGP order.
pub fn synthetic_observations(design: &SyntheticDesign) -> Result<SyntheticData> {
    let (panel, truth) = generate(&design.dgp)?;
    let (c, j) = (design.dgp.c, design.dgp.j);
    let basis = SplineBasis::new(design.support.0, design.support.1, design.degree, j)?;
    let tcfg = TransformConfig::new(design.delta, j)?;
    let centre = logit_delta(&design.centre, &tcfg)?;
    let samplers = (0..=j)
        .map(|k| ComponentSampler::new(&basis, k))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(design.dgp.seed ^ 0x5eed_0b5e_77a7_1011);
    let mut observations = Vec::with_capacity(design.dgp.t * c * design.obs_per_cell);
    let mut weights = Vec::with_capacity(design.dgp.t);
    for t in 0..design.dgp.t {
        let y = panel.period(t);
        let mut week = Vec::with_capacity(c);
        for unit in 0..c {
            let b: Vec<f64> = (0..j)
                .map(|i| centre[i] + design.coord_scale * y[unit * j + i])
                .collect();
            let w = softmax_delta(&b, &tcfg)?;
            if w.iter().any(|v| *v < 0.0) {
                return Err(Error::OutsideDomain(format!(
                    "cell ({}, {}) has negative mixture weights; reduce coord_scale or delta",
                    t + 1,
                    unit + 1
                )));
            }
            let mut cdf = Vec::with_capacity(j + 1);
            let mut acc = 0.0;
            for v in &w {
                acc += v;
                cdf.push(acc);
            }
            for i in 0..design.obs_per_cell {
                let u = rng.random::<f64>() * acc;
                let k = cdf.iter().position(|&p| u < p).unwrap_or(j);
                let value = samplers[k].draw(&basis, k, &mut rng)?;
                observations.push(Observation {
                    date: design.start_date + Duration::days(7 * t as i64 + (i % 7) as i64),
                    value,
                    latitude: -3.0 - 2.5 * unit as f64,
                    longitude: -45.0 + 0.5 * unit as f64,
                    site_id: Some(format!("site_{}", unit + 1)),
                });
            }
            week.push(w);
        }
        weights.push(week);
    }
    Ok(SyntheticData {
        observations,
        truth,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_sampler_matches_mean() {
        let basis = SplineBasis::new(10.0, 40.0, 3, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in [0, 4, 8] {
            let s = ComponentSampler::new(&basis, k).unwrap();
            let n = 20000;
            let mean: f64 = (0..n)
                .map(|_| s.draw(&basis, k, &mut rng).unwrap())
                .sum::<f64>()
                / n as f64;
            // quadrature mean of the normalized component
            let m = 4000;
            let h = (s.hi - s.lo) / m as f64;
            let exact: f64 = (0..m)
                .map(|i| {
                    let x = s.lo + (i as f64 + 0.5) * h;
                    x * basis.components(x).unwrap()[k] * h
                })
                .sum();
            assert!(
                (mean - exact).abs() < 0.05,
                "component {k}: {mean} vs {exact}"
            );
        }
    }

    #[test]
    fn observations_follow_the_layout() {
        let design = SyntheticDesign {
            dgp: DgpParams {
                t: 6,
                c: 3,
                j: 4,
                r_true: 1,
                a: vec![0.5],
                u_sd: vec![1.0],
                m_diag: vec![1.0],
                source_rows: vec![0, 1],
                n_edges: 2,
                seed: 5,
                ..DgpParams::default()
            },
            support: (10.0, 40.0),
            degree: 2,
            delta: 0.0,
            coord_scale: 1.0,
            centre: bump_weights(5),
            obs_per_cell: 10,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
        };
        let data = synthetic_observations(&design).unwrap();
        assert_eq!(data.observations.len(), 6 * 3 * 10);
        assert!(data
            .observations
            .iter()
            .all(|o| (10.0..=40.0).contains(&o.value)));
        for week in &data.weights {
            for w in week {
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let again = synthetic_observations(&design).unwrap();
        assert_eq!(again.observations, data.observations);
    }
}
