//! EM estimation of B-spline mixture weights, with an optional Dirichlet prior
//! whose posterior mean replaces the M-step.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::SplineBasis;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Mixture weights attached to a [`SplineBasis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Self {
        WeightVector(weights)
    }

    /// Equal weights `1 / (J + 1)`.
    pub fn uniform(len: usize) -> Self {
        WeightVector(vec![1.0 / len as f64; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// True when all entries are nonnegative and sum to one within `tol`.
    pub fn in_simplex(&self, tol: f64) -> bool {
        self.0.iter().all(|w| *w >= 0.0) && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        WeightVector(v)
    }
}

/// Dirichlet prior `Dir(alpha0)` scaled by the strength `gamma`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletPrior {
    alpha0: Vec<f64>,
    gamma: f64,
}

impl DirichletPrior {
    pub fn new(alpha0: Vec<f64>, gamma: f64) -> Result<Self> {
        for (index, &value) in alpha0.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidPrior { index, value });
            }
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior strength gamma must be nonnegative, got {gamma}"
            )));
        }
        Ok(DirichletPrior { alpha0, gamma })
    }

    pub fn alpha0(&self) -> &[f64] {
        &self.alpha0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Prior mean `alpha0 / sum(alpha0)`.
    pub fn mean(&self) -> WeightVector {
        let s: f64 = self.alpha0.iter().sum();
        WeightVector(self.alpha0.iter().map(|a| a / s).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmReport {
    pub final_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each M-step: the log-likelihood for MLE fits, the
    /// log-likelihood plus `gamma * sum alpha0_j log w_j` for prior fits.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Sparse design: for every sample, the first component index and the
/// normalized component values that can be nonzero there.
struct Design {
    rows: Vec<(usize, Vec<f64>)>,
}

impl Design {
    fn new(samples: &[f64], basis: &SplineBasis) -> Result<Self> {
        let rows = samples
            .iter()
            .map(|&x| basis.nonzero_components(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Design { rows })
    }

    fn mixture(&self, i: usize, w: &[f64]) -> f64 {
        let (first, vals) = &self.rows[i];
        vals.iter().enumerate().map(|(j, v)| w[first + j] * v).sum()
    }

    fn loglik(&self, w: &[f64], samples: &[f64]) -> Result<f64> {
        let mut ll = 0.0;
        for i in 0..self.rows.len() {
            let f = self.mixture(i, w);
            if f <= 0.0 {
                return Err(Error::ZeroDensity {
                    index: i,
                    x: samples[i],
                });
            }
            ll += f.ln();
        }
        Ok(ll)
    }

    /// Sum of responsibilities per component (the E-step).
    fn responsibilities(&self, w: &[f64], samples: &[f64]) -> Result<Vec<f64>> {
        let mut tau = vec![0.0; w.len()];
        for (i, (first, vals)) in self.rows.iter().enumerate() {
            let f = self.mixture(i, w);
            if f <= 0.0 {
                return Err(Error::ZeroDensity {
                    index: i,
                    x: samples[i],
                });
            }
            for (j, v) in vals.iter().enumerate() {
                tau[first + j] += w[first + j] * v / f;
            }
        }
        Ok(tau)
    }
}

/// `sum_i log f(x_i; w)`; errors when a sample has zero density.
pub fn log_likelihood(samples: &[f64], weights: &[f64], basis: &SplineBasis) -> Result<f64> {
    check_len(weights, basis)?;
    let design = Design::new(samples, basis)?;
    design.loglik(weights, samples)
}

fn check_len(weights: &[f64], basis: &SplineBasis) -> Result<()> {
    if weights.len() != basis.num_weights() {
        return Err(Error::DimensionMismatch {
            expected: basis.num_weights(),
            got: weights.len(),
        });
    }
    Ok(())
}

fn check_init(init: &[f64]) -> Result<()> {
    for (index, &value) in init.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::BoundaryInit { index, value });
        }
    }
    Ok(())
}

fn log_prior(w: &[f64], prior: &DirichletPrior) -> f64 {
    if prior.gamma == 0.0 {
        return 0.0;
    }
    prior
        .alpha0
        .iter()
        .zip(w)
        .map(|(a, wj)| prior.gamma * a * wj.ln())
        .sum()
}

fn max_abs_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Maximum-likelihood mixture weights by EM.
pub fn fit_mle(
    samples: &[f64],
    basis: &SplineBasis,
    init: &WeightVector,
    opts: EmOptions,
) -> Result<(WeightVector, EmReport)> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    check_len(init, basis)?;
    check_init(init)?;
    let design = Design::new(samples, basis)?;
    let n = samples.len() as f64;

    let mut w = init.to_vec();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let tau = design.responsibilities(&w, samples)?;
        let next: Vec<f64> = tau.iter().map(|t| t / n).collect();
        iterations += 1;
        let change = max_abs_change(&next, &w);
        w = next;
        trace.push(design.loglik(&w, samples)?);
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let final_loglik = *trace.last().expect("at least one iteration");
    Ok((
        WeightVector(w),
        EmReport {
            final_loglik,
            iterations,
            converged,
            objective_trace: trace,
        },
    ))
}

/// Posterior-mean EM under a Dirichlet prior. With no samples the result is
/// the prior mean.
pub fn fit_map(
    samples: &[f64],
    basis: &SplineBasis,
    prior: &DirichletPrior,
    init: &WeightVector,
    opts: EmOptions,
) -> Result<(WeightVector, EmReport)> {
    check_len(init, basis)?;
    check_len(prior.alpha0(), basis)?;
    check_init(init)?;
    if samples.is_empty() {
        let w = prior.mean();
        let obj = log_prior(&w, prior);
        return Ok((
            w,
            EmReport {
                final_loglik: 0.0,
                iterations: 1,
                converged: true,
                objective_trace: vec![obj],
            },
        ));
    }
    let design = Design::new(samples, basis)?;
    let prior_mass: Vec<f64> = prior.alpha0.iter().map(|a| prior.gamma * a).collect();

    let mut w = init.to_vec();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut loglik = f64::NEG_INFINITY;
    while iterations < opts.max_iter {
        let tau = design.responsibilities(&w, samples)?;
        let post: Vec<f64> = tau.iter().zip(&prior_mass).map(|(t, a)| t + a).collect();
        let total: f64 = post.iter().sum();
        let next: Vec<f64> = post.iter().map(|a| a / total).collect();
        iterations += 1;
        let change = max_abs_change(&next, &w);
        w = next;
        loglik = design.loglik(&w, samples)?;
        trace.push(loglik + log_prior(&w, prior));
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok((
        WeightVector(w),
        EmReport {
            final_loglik: loglik,
            iterations,
            converged,
            objective_trace: trace,
        },
    ))
}
