//! Monte Carlo study of edge recovery in a factor-augmented VAR with
//! Kronecker coefficient structure.
//!
//! Each replication draws loadings and a sparse cross-unit VAR, simulates
//! `Y_t = (V ⊗ I_J) Y_{t-1} + L f_t + e_t` with AR(1) factors, and scores the
//! selected edge set against the planted one for every factor count in the
//! sweep. The same draw is reused across factor counts.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_var::{fit, FactorVarConfig};
use crate::inference::{covariance, select_edges, EdgeSelection};
use crate::panel::TransformedPanel;
use crate::simplex::MetricPack;

/// Which index of `V` is restricted to the designated unit set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateAxis {
    #[default]
    Rows,
    Columns,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpParams {
    pub t: usize,
    pub c: usize,
    pub j: usize,
    pub r_true: usize,
    /// Diagonal of the factor AR matrix.
    pub a: Vec<f64>,
    pub u_sd: Vec<f64>,
    /// Scale on the eigen-weights of `M = Q diag(m) Q'`.
    pub m_diag: Vec<f64>,
    pub alpha_v: f64,
    pub sigma_eps: f64,
    /// Zero-based units whose rows (or columns) may carry edges.
    pub source_rows: Vec<usize>,
    pub candidate_axis: CandidateAxis,
    pub n_edges: usize,
    pub spectral_cap: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for DgpParams {
    fn default() -> Self {
        DgpParams {
            t: 114,
            c: 20,
            j: 15,
            r_true: 5,
            a: vec![0.0, 0.0, 0.9, 0.9, 0.9],
            u_sd: vec![1.0, 1.0, 0.3, 0.3, 0.3],
            m_diag: vec![1.0, 0.9, 0.8, 0.7, 0.6],
            alpha_v: 1.0,
            sigma_eps: 0.1,
            source_rows: vec![0, 1, 4],
            candidate_axis: CandidateAxis::Rows,
            n_edges: 30,
            spectral_cap: 0.95,
            burn_in: 50,
            seed: 0,
        }
    }
}

impl DgpParams {
    pub fn validate(&self) -> Result<()> {
        let r = self.r_true;
        if self.t < 2 || self.c == 0 || self.j == 0 {
            return Err(Error::InvalidDimension(format!(
                "need T >= 2, C >= 1, J >= 1; got T = {}, C = {}, J = {}",
                self.t, self.c, self.j
            )));
        }
        if r > self.c.min(self.j) {
            return Err(Error::InvalidDimension(format!(
                "r_true = {r} exceeds min(C, J) = {}",
                self.c.min(self.j)
            )));
        }
        for (name, v) in [
            ("A", &self.a),
            ("u_sd", &self.u_sd),
            ("m_diag", &self.m_diag),
        ] {
            if v.len() != r {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {} entries, expected r_true = {r}",
                    v.len()
                )));
            }
        }
        if self.a.iter().any(|a| !(a.abs() < 1.0)) {
            return Err(Error::InvalidParameter(
                "factor AR coefficients must lie in (-1, 1)".into(),
            ));
        }
        if self.u_sd.iter().any(|s| !(*s >= 0.0)) || !(self.sigma_eps >= 0.0) {
            return Err(Error::InvalidParameter(
                "standard deviations must be nonnegative".into(),
            ));
        }
        if !(self.alpha_v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha_V = {} must be >= 0",
                self.alpha_v
            )));
        }
        if !(self.spectral_cap > 0.0 && self.spectral_cap < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral cap {} must lie in (0, 1)",
                self.spectral_cap
            )));
        }
        if let Some(&u) = self.source_rows.iter().find(|&&u| u >= self.c) {
            return Err(Error::IndexOutOfRange(format!(
                "source unit {u} with C = {}",
                self.c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub v_true: DMatrix<f64>,
    /// `CJ x r_true`, row index `c J + j`.
    pub loadings: DMatrix<f64>,
    /// Orthonormal `C x r_true` factor.
    pub q: DMatrix<f64>,
    /// `(row, col)` positions with `V_true > 0`; row is the target unit.
    pub true_edges: BTreeSet<(usize, usize)>,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill keeps the draw order fixed
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Draws `Q` (orthonormal, from QR of a Gaussian matrix), unit-norm Gaussian
/// `U`, and assembles `l_1 = (1/sqrt C) 1 ⊗ u_1`, `l_k = q_k ⊗ u_k`.
pub fn build_loadings(
    c: usize,
    j: usize,
    r_true: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if r_true > c.min(j) {
        return Err(Error::InvalidDimension(format!(
            "r_true = {r_true} exceeds min(C, J) = {}",
            c.min(j)
        )));
    }
    let q = loop {
        let g = gaussian_matrix(rng, c, r_true);
        let qr = g.qr();
        let rdiag = qr.r().diagonal();
        if rdiag.iter().all(|v| v.abs() > 1e-10) {
            let mut q = qr.q();
            for k in 0..r_true {
                if rdiag[k] < 0.0 {
                    q.column_mut(k).neg_mut();
                }
            }
            break q;
        }
        log::debug!("degenerate Gaussian draw for Q; redrawing");
    };
    let mut u = loop {
        let u = gaussian_matrix(rng, j, r_true);
        if u.column_iter().all(|col| col.norm() > 1e-12) {
            break u;
        }
    };
    for mut col in u.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    let mut l = DMatrix::zeros(c * j, r_true);
    let global = 1.0 / (c as f64).sqrt();
    for k in 0..r_true {
        for unit in 0..c {
            let w = if k == 0 { global } else { q[(unit, k)] };
            for jj in 0..j {
                l[(unit * j + jj, k)] = w * u[(jj, k)];
            }
        }
    }
    Ok((l, q))
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius needs a square matrix");
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Sparse cross-unit VAR matrix with `n_edges` entries `alpha_V |M_ij|`
/// on the largest off-diagonal candidates of `M = Q diag(m) Q'`.
pub fn build_v_true(q: &DMatrix<f64>, params: &DgpParams) -> Result<DMatrix<f64>> {
    let c = q.nrows();
    let m = q * DMatrix::from_diagonal(&DVector::from_column_slice(&params.m_diag)) * q.transpose();
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    let restricted: BTreeSet<usize> = params.source_rows.iter().copied().collect();
    for i in 0..c {
        for jj in 0..c {
            let anchor = match params.candidate_axis {
                CandidateAxis::Rows => i,
                CandidateAxis::Columns => jj,
            };
            if i != jj && restricted.contains(&anchor) {
                candidates.push((i, jj));
            }
        }
    }
    if candidates.len() < params.n_edges {
        return Err(Error::InvalidParameter(format!(
            "only {} candidate entries for {} edges",
            candidates.len(),
            params.n_edges
        )));
    }
    // stable sort keeps lexicographic order among ties
    candidates.sort_by(|a, b| m[*b].abs().total_cmp(&m[*a].abs()));
    let mut v = DMatrix::zeros(c, c);
    if params.alpha_v == 0.0 {
        return Ok(v);
    }
    for &(i, jj) in &candidates[..params.n_edges] {
        v[(i, jj)] = params.alpha_v * m[(i, jj)].abs();
    }
    let rho = spectral_radius(&v);
    if rho > params.spectral_cap {
        v *= params.spectral_cap / rho;
    }
    Ok(v)
}

/// Simulates one panel (identity metric) and its ground truth. Deterministic
/// in `params.seed`; the loadings and `V` draw precede the shocks, so designs
/// that differ only in `alpha_V` share `Q`, `U` and all innovations.
pub fn generate(params: &DgpParams) -> Result<(TransformedPanel, GroundTruth)> {
    params.validate()?;
    let (c, j, r) = (params.c, params.j, params.r_true);
    let n = c * j;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (loadings, q) = build_loadings(c, j, r, &mut rng)?;
    let v_true = build_v_true(&q, params)?;
    let rho = spectral_radius(&v_true);
    if rho >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "unstable V_true with spectral radius {rho}"
        )));
    }

    let total = params.burn_in + params.t;
    let mut y = DMatrix::zeros(n, params.t);
    let mut f = DVector::zeros(r);
    let mut prev = DVector::zeros(n);
    for s in 0..total {
        for k in 0..r {
            let shock: f64 = rng.sample(StandardNormal);
            f[k] = params.a[k] * f[k] + params.u_sd[k] * shock;
        }
        let mut cur = &loadings * &f;
        for unit in 0..c {
            for d in 0..c {
                let coef = v_true[(unit, d)];
                if coef != 0.0 {
                    let src = prev.rows(d * j, j).clone_owned();
                    let mut dst = cur.rows_mut(unit * j, j);
                    dst += src * coef;
                }
            }
        }
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            cur[i] += params.sigma_eps * e;
        }
        if s >= params.burn_in {
            y.set_column(s - params.burn_in, &cur);
        }
        prev = cur;
    }
    let true_edges = (0..c)
        .flat_map(|i| (0..c).map(move |d| (i, d)))
        .filter(|&(i, d)| v_true[(i, d)] > 0.0)
        .collect();
    let panel = TransformedPanel::new(y, c, MetricPack::identity(j))?;
    Ok((
        panel,
        GroundTruth {
            v_true,
            loadings,
            q,
            true_edges,
        },
    ))
}

/// Edge-recovery scores of one detected set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub detected: usize,
    pub hits: usize,
    pub n_true: usize,
    pub recall: f64,
    /// Zero when nothing is detected.
    pub fdp: f64,
    /// One when nothing is detected (see `empty`).
    pub precision: f64,
    pub empty: bool,
}

/// Scores detected `(target, source)` positions against the planted set.
pub fn score_edges(
    detected: &BTreeSet<(usize, usize)>,
    truth: &BTreeSet<(usize, usize)>,
) -> EdgeScore {
    let hits = detected.intersection(truth).count();
    let d = detected.len();
    let recall = if truth.is_empty() {
        0.0
    } else {
        hits as f64 / truth.len() as f64
    };
    let (fdp, precision) = if d == 0 {
        (0.0, 1.0)
    } else {
        ((d - hits) as f64 / d as f64, hits as f64 / d as f64)
    };
    EdgeScore {
        detected: d,
        hits,
        n_true: truth.len(),
        recall,
        fdp,
        precision,
        empty: d == 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub alpha_v: f64,
    pub r: usize,
    pub mean_edges: f64,
    pub mean_recall: f64,
    pub mean_fdp: f64,
    pub mean_precision: f64,
    pub n_reps: usize,
    pub n_failures: usize,
    /// Replications whose detected set was empty (precision recorded as 1).
    #[serde(skip)]
    pub n_empty: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub factor_counts: Vec<usize>,
    pub n_reps: usize,
    pub fdr: f64,
    pub base_seed: u64,
    pub lags: usize,
    /// Template for every design; `alpha_v` and `seed` are overwritten.
    pub dgp: DgpParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            alphas: vec![0.0, 0.5, 1.0],
            factor_counts: (0..=8).collect(),
            n_reps: 100,
            fdr: 0.10,
            base_seed: 2024,
            lags: 1,
            dgp: DgpParams::default(),
        }
    }
}

impl SweepConfig {
    /// Parses a TOML sweep description; omitted keys keep their defaults and
    /// the design parameters live under a `[dgp]` table.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Scores of one replication across the factor sweep (`None` on fit failure).
pub fn run_replication(
    params: &DgpParams,
    factor_counts: &[usize],
    lags: usize,
    fdr: f64,
) -> Result<Vec<Option<EdgeScore>>> {
    let (panel, truth) = generate(params)?;
    let selection = EdgeSelection::at_level(fdr);
    Ok(factor_counts
        .iter()
        .map(|&r| {
            let outcome = fit(&panel, &FactorVarConfig::new(lags, r)).and_then(|f| {
                let cov = covariance(&f, &panel)?;
                select_edges(&f, &cov, &selection)
            });
            match outcome {
                Ok(net) => {
                    let detected = net.selected().map(|e| (e.target, e.source)).collect();
                    Some(score_edges(&detected, &truth.true_edges))
                }
                Err(e) => {
                    log::warn!("seed {} r = {r}: fit failed: {e}", params.seed);
                    None
                }
            }
        })
        .collect())
}

/// Runs every `(alpha_V, replication)` pair in parallel and averages the
/// scores per `(alpha_V, r)` cell. Replication `i` uses seed
/// `base_seed + i` for every `alpha_V`.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<MetricsRow>> {
    if config.n_reps == 0 {
        return Err(Error::InvalidParameter("n_reps must be at least 1".into()));
    }
    if !(config.fdr > 0.0 && config.fdr < 1.0) {
        return Err(Error::InvalidFdrLevel(config.fdr));
    }
    config.dgp.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.alphas.len())
        .flat_map(|a| (0..config.n_reps).map(move |rep| (a, rep)))
        .collect();
    let results: Vec<Vec<Option<EdgeScore>>> = jobs
        .par_iter()
        .map(|&(a, rep)| {
            let params = DgpParams {
                alpha_v: config.alphas[a],
                seed: config.base_seed.wrapping_add(rep as u64),
                ..config.dgp.clone()
            };
            run_replication(&params, &config.factor_counts, config.lags, config.fdr)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (a, &alpha_v) in config.alphas.iter().enumerate() {
        for (ri, &r) in config.factor_counts.iter().enumerate() {
            // jobs are ordered by (alpha, rep), so this sums in replication order
            let scores: Vec<Option<EdgeScore>> = jobs
                .iter()
                .zip(&results)
                .filter(|((ja, _), _)| *ja == a)
                .map(|(_, res)| res[ri])
                .collect();
            rows.push(aggregate(alpha_v, r, &scores));
        }
    }
    Ok(rows)
}

fn aggregate(alpha_v: f64, r: usize, scores: &[Option<EdgeScore>]) -> MetricsRow {
    let ok: Vec<&EdgeScore> = scores.iter().flatten().collect();
    let n = ok.len();
    let mean = |f: &dyn Fn(&EdgeScore) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            ok.iter().map(|s| f(s)).sum::<f64>() / n as f64
        }
    };
    MetricsRow {
        alpha_v,
        r,
        mean_edges: mean(&|s| s.detected as f64),
        mean_recall: mean(&|s| s.recall),
        mean_fdp: mean(&|s| s.fdp),
        mean_precision: mean(&|s| s.precision),
        n_reps: n,
        n_failures: scores.len() - n,
        n_empty: ok.iter().filter(|s| s.empty).count(),
    }
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
