//! Feasible sandwich covariance for the VAR coefficients, one-sided t-tests,
//! Benjamini–Yekutieli step-up control, and directed-edge selection.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::factor_var::{whitened_design, FactorVarFit};
use crate::panel::{coef_index, condition_number, inverse_spd, LaggedDesign, TransformedPanel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub d_hat: DMatrix<f64>,
    pub omega_hat: DMatrix<f64>,
    /// `(N T0)^{-1} D^{-1} Omega D^{-1}`.
    pub var_beta: DMatrix<f64>,
    /// `N = CJ`.
    pub n: usize,
    /// `T0 = T - p`.
    pub t0: usize,
}

impl CovarianceEstimate {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.var_beta
            .diagonal()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect()
    }
}

/// `a_ts = f_t' (T0^{-1} F'F)^{-1} f_s` for all retained periods.
pub fn factor_weights(factors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t0 = factors.nrows();
    if factors.ncols() == 0 {
        return Ok(DMatrix::zeros(t0, t0));
    }
    let ff = factors.tr_mul(factors) / t0 as f64;
    let inv = ff
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()));
    let inv = inv.ok_or_else(|| Error::Singular {
        context: "factor second-moment matrix F'F".into(),
        condition: condition_number(&ff),
    })?;
    Ok(factors * inv * factors.transpose())
}

/// Regressor blocks of `W_t - T0^{-1} sum_s a_ts W_s`.
fn adjusted_design(design: &LaggedDesign, weights: &DMatrix<f64>) -> LaggedDesign {
    let t0 = design.len() as f64;
    let blocks = design.blocks();
    let adjusted = (0..blocks.len())
        .map(|t| {
            let mut z = blocks[t].clone();
            for (s, zs) in blocks.iter().enumerate() {
                let a = weights[(t, s)];
                if a != 0.0 {
                    z -= zs * (a / t0);
                }
            }
            z
        })
        .collect();
    design.with_blocks(adjusted)
}

/// Dense projected scores `Z_t = M W_t - T0^{-1} sum_s a_ts M W_s`, each
/// `CJ x pC^2`. Intended for small problems and checks; the covariance never
/// forms them.
pub fn projected_scores(fit: &FactorVarFit, panel: &TransformedPanel) -> Result<Vec<DMatrix<f64>>> {
    let design = whitened_design(panel, fit.lags, &fit.mean)?;
    let weights = factor_weights(&fit.factors)?;
    let adjusted = adjusted_design(&design, &weights);
    let n = design.stacked_dim();
    let lam = &fit.lambda_tilde;
    let m = DMatrix::identity(n, n) - lam * lam.transpose() / n as f64;
    let k = design.num_coefs();
    Ok((0..adjusted.len())
        .map(|i| {
            let mut w = DMatrix::zeros(n, k);
            for col in 0..k {
                let mut e = vec![0.0; k];
                e[col] = 1.0;
                w.set_column(col, &adjusted.apply(i, &e));
            }
            &m * w
        })
        .collect())
}

/// Feasible covariance of `beta` with block-diagonal `Sigma_eps,t` built
/// from per-unit outer products of the whitened residuals.
pub fn covariance(fit: &FactorVarFit, panel: &TransformedPanel) -> Result<CovarianceEstimate> {
    let design = whitened_design(panel, fit.lags, &fit.mean)?;
    covariance_on_design(fit, &design)
}

pub(crate) fn covariance_on_design(
    fit: &FactorVarFit,
    design: &LaggedDesign,
) -> Result<CovarianceEstimate> {
    let weights = factor_weights(&fit.factors)?;
    let adjusted = adjusted_design(design, &weights);
    let (c, j) = (design.units(), design.dim());
    let n = c * j;
    let t0 = design.len();
    let k = design.num_coefs();
    let lam = &fit.lambda_tilde;
    let r = lam.ncols();
    let scale = 1.0 / (n as f64 * t0 as f64);

    let (normal, _) = adjusted.normal_equations_for(lam, design.response());
    let d_hat = normal * scale;

    // Omega = (N T0)^{-1} sum_{t,c} g_tc g_tc', g_tc = Z_t' (e_tc in block c)
    let mut scores = DMatrix::zeros(k, t0 * c);
    for i in 0..t0 {
        let q = if r > 0 {
            Some(adjusted.loading_products(i, lam))
        } else {
            None
        };
        let resid = fit.residuals_whitened.column(i);
        for unit in 0..c {
            let e = resid.rows(unit * j, j);
            let mut v = vec![0.0; n];
            v[unit * j..(unit + 1) * j].copy_from_slice(e.clone_owned().as_slice());
            let mut g = adjusted.apply_transpose(i, &v);
            if let Some(q) = &q {
                let proj = lam.rows(unit * j, j).tr_mul(&e);
                g -= q * proj / n as f64;
            }
            scores.set_column(i * c + unit, &g);
        }
    }
    let mut omega_hat = DMatrix::zeros(k, k);
    omega_hat.gemm(scale, &scores, &scores.transpose(), 0.0);

    let d_inv = inverse_spd(&d_hat, "covariance matrix D")?;
    let mut var_beta = &d_inv * &omega_hat * &d_inv * scale;
    crate::simplex::symmetrize(&mut var_beta);
    Ok(CovarianceEstimate {
        d_hat,
        omega_hat,
        var_beta,
        n,
        t0,
    })
}

/// Upper-tail standard normal probability `1 - Phi(t)`.
pub fn upper_tail(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// Which coefficients form the multiple-testing family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisFamily {
    /// Positive off-diagonal coefficients only.
    #[default]
    PositiveOnly,
    /// Every off-diagonal coefficient.
    AllOffDiagonal,
}

/// How `V_{k,cd}` maps to a directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionConvention {
    /// `V_{k,cd}` is the edge `d -> c` (row is the target).
    #[default]
    RowIsTarget,
    /// `V_{k,cd}` is the edge `c -> d`.
    RowIsSource,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EdgeSelection {
    pub fdr: f64,
    pub family: HypothesisFamily,
    pub direction: DirectionConvention,
}

impl EdgeSelection {
    pub fn at_level(fdr: f64) -> Self {
        EdgeSelection {
            fdr,
            family: HypothesisFamily::default(),
            direction: DirectionConvention::default(),
        }
    }
}

/// One off-diagonal coefficient with its test outcome. Unit indices are
/// zero-based; lags start at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub lag: usize,
    pub coef: f64,
    pub t_stat: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub in_family: bool,
    pub selected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeNetwork {
    pub units: usize,
    pub edges: Vec<Edge>,
    pub fdr_level: f64,
    pub n_hypotheses: usize,
}

/// t-statistic and upper-tail p-value of one coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefTest {
    pub lag: usize,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
    pub t_stat: f64,
    pub p_raw: f64,
}

/// One-sided tests `H1: V_{k,cd} > 0` for every off-diagonal coefficient.
pub fn one_sided_pvalues(fit: &FactorVarFit, cov: &CovarianceEstimate) -> Result<Vec<CoefTest>> {
    let u = fit.units;
    let se = cov.standard_errors();
    let mut out = Vec::with_capacity(fit.lags * u * (u.saturating_sub(1)));
    for k in 0..fit.lags {
        for c in 0..u {
            for d in 0..u {
                if c == d {
                    continue;
                }
                let idx = coef_index(u, k, c, d);
                if !(se[idx] > 0.0) {
                    return Err(Error::ZeroStandardError(idx));
                }
                let coef = fit.beta[idx];
                let t_stat = coef / se[idx];
                out.push(CoefTest {
                    lag: k + 1,
                    row: c,
                    col: d,
                    coef,
                    t_stat,
                    p_raw: upper_tail(t_stat),
                });
            }
        }
    }
    Ok(out)
}

/// Benjamini–Yekutieli step-up at level `q`: rejections and adjusted
/// p-values `min(1, min_{j >= i} m H_m p_(j) / j)`, ties ordered by index.
pub fn by_fdr(p_values: &[f64], q: f64) -> Result<(Vec<bool>, Vec<f64>)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidFdrLevel(q));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!(
            "p-value {p} outside [0, 1]"
        )));
    }
    let m = p_values.len();
    if m == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let harmonic: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));

    let mut cutoff = 0;
    for (rank, &i) in order.iter().enumerate() {
        let threshold = (rank + 1) as f64 * q / (m as f64 * harmonic);
        if p_values[i] <= threshold {
            cutoff = rank + 1;
        }
    }
    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let candidate = m as f64 * harmonic * p_values[i] / (rank + 1) as f64;
        running = running.min(candidate).min(1.0);
        adjusted[i] = running;
    }
    Ok((reject, adjusted))
}

/// Tests every off-diagonal coefficient and selects edges by BY control over
/// the configured hypothesis family.
pub fn select_edges(
    fit: &FactorVarFit,
    cov: &CovarianceEstimate,
    selection: &EdgeSelection,
) -> Result<EdgeNetwork> {
    if !(selection.fdr > 0.0 && selection.fdr < 1.0) {
        return Err(Error::InvalidFdrLevel(selection.fdr));
    }
    let tests = one_sided_pvalues(fit, cov)?;
    let family: Vec<usize> = tests
        .iter()
        .enumerate()
        .filter(|(_, t)| match selection.family {
            HypothesisFamily::PositiveOnly => t.coef > 0.0,
            HypothesisFamily::AllOffDiagonal => true,
        })
        .map(|(i, _)| i)
        .collect();
    let pv: Vec<f64> = family.iter().map(|&i| tests[i].p_raw).collect();
    let (reject, adjusted) = by_fdr(&pv, selection.fdr)?;

    let mut edges: Vec<Edge> = tests
        .iter()
        .map(|t| {
            let (source, target) = match selection.direction {
                DirectionConvention::RowIsTarget => (t.col, t.row),
                DirectionConvention::RowIsSource => (t.row, t.col),
            };
            Edge {
                source,
                target,
                lag: t.lag,
                coef: t.coef,
                t_stat: t.t_stat,
                p_raw: t.p_raw,
                p_adjusted: 1.0,
                in_family: false,
                selected: false,
            }
        })
        .collect();
    for (pos, &i) in family.iter().enumerate() {
        edges[i].in_family = true;
        edges[i].p_adjusted = adjusted[pos];
        edges[i].selected = reject[pos] && edges[i].coef > 0.0;
    }
    Ok(EdgeNetwork {
        units: fit.units,
        edges,
        fdr_level: selection.fdr,
        n_hypotheses: family.len(),
    })
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: usize,
    label: String,
}

/// Serialized edge row; unit ids are one-based.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EdgeRecord {
    pub source: usize,
    pub target: usize,
    pub lag: usize,
    pub coef: f64,
    pub t: f64,
    pub p: f64,
    pub p_adj: f64,
    pub selected: bool,
}

#[derive(Serialize, Deserialize)]
struct NetworkDocument {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

impl EdgeNetwork {
    pub fn selected(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.selected)
    }

    pub fn num_selected(&self) -> usize {
        self.selected().count()
    }

    fn records(&self) -> Vec<EdgeRecord> {
        self.edges
            .iter()
            .map(|e| EdgeRecord {
                source: e.source + 1,
                target: e.target + 1,
                lag: e.lag,
                coef: e.coef,
                t: e.t_stat,
                p: e.p_raw,
                p_adj: e.p_adjusted,
                selected: e.selected,
            })
            .collect()
    }

    /// JSON document with `nodes` and `edges`; ids are one-based. Missing
    /// labels default to `"unit <id>"`.
    pub fn to_json(&self, labels: Option<&[String]>) -> Result<String> {
        let nodes = (0..self.units)
            .map(|i| NodeRecord {
                id: i + 1,
                label: labels
                    .and_then(|l| l.get(i).cloned())
                    .unwrap_or_else(|| format!("unit {}", i + 1)),
            })
            .collect();
        let doc = NetworkDocument {
            nodes,
            edges: self.records(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// CSV mirror of the JSON edge list.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for rec in self.records() {
            w.serialize(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads the edge list back from a network JSON document.
pub fn read_network_json(text: &str) -> Result<Vec<EdgeRecord>> {
    let doc: NetworkDocument = serde_json::from_str(text)?;
    Ok(doc.edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_var::{fit, FactorVarConfig};
    use crate::simplex::MetricPack;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Step-up rule written straight from its definition.
    fn by_oracle(p: &[f64], q: f64) -> Vec<bool> {
        let m = p.len();
        let hm: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
        let mut k = 0;
        for i in 1..=m {
            if p[idx[i - 1]] <= i as f64 * q / (m as f64 * hm) {
                k = i;
            }
        }
        let mut out = vec![false; m];
        for &i in &idx[..k] {
            out[i] = true;
        }
        out
    }

    #[test]
    fn by_worked_cases() {
        let (rej, adj) = by_fdr(&[0.001], 0.05).unwrap();
        assert_eq!(rej, vec![true]);
        assert_abs_diff_eq!(adj[0], 0.001);
        let (rej, _) = by_fdr(&[0.01, 0.02, 0.5], 0.1).unwrap();
        assert_eq!(rej, vec![true, true, false]);
        let h3 = 1.0 + 0.5 + 1.0 / 3.0;
        for (i, expect) in [0.01818, 0.03636, 0.05455].iter().enumerate() {
            assert_abs_diff_eq!((i + 1) as f64 * 0.1 / (3.0 * h3), expect, epsilon = 1e-5);
        }
        let (rej, _) = by_fdr(&[1.0; 7], 0.2).unwrap();
        assert!(rej.iter().all(|r| !r));
        assert!(by_fdr(&[0.1], 0.0).is_err());
        assert!(by_fdr(&[0.1], 1.0).is_err());
        assert!(by_fdr(&[1.1], 0.1).is_err());
    }

    #[test]
    fn by_agrees_with_oracle_and_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let m = rng.random_range(1..=50);
            let p: Vec<f64> = (0..m)
                .map(|_| {
                    let u: f64 = rng.random();
                    u.powi(3)
                })
                .collect();
            let (rej, adj) = by_fdr(&p, 0.1).unwrap();
            assert_eq!(rej, by_oracle(&p, 0.1));
            let (rej_small, _) = by_fdr(&p, 0.05).unwrap();
            assert!(rej_small.iter().zip(&rej).all(|(a, b)| !a || *b));
            for i in 0..m {
                assert!(adj[i] >= p[i]);
                assert_eq!(adj[i] <= 0.1, rej[i]);
                for l in 0..m {
                    if p[i] < p[l] {
                        assert!(adj[i] <= adj[l]);
                    }
                }
            }
        }
    }

    #[test]
    fn normal_tail_values() {
        assert_abs_diff_eq!(upper_tail(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(upper_tail(1.6449), 0.05, epsilon = 1e-4);
        assert!(upper_tail(-40.0) > 1.0 - 1e-15);
        assert!(upper_tail(20.0) > 0.0);
    }

    fn toy_fit(
        c: usize,
        j: usize,
        t: usize,
        r: usize,
        seed: u64,
    ) -> (TransformedPanel, FactorVarFit) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = c * j;
        let mut y = DMatrix::zeros(n, t);
        let lam = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        for s in 1..t {
            let f = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let common = &lam * f;
            for i in 0..n {
                let unit = i / j;
                let src = ((unit + 1) % c) * j + i % j;
                y[(i, s)] =
                    0.4 * y[(src, s - 1)] + common[i] + 0.5 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let panel = TransformedPanel::new(y, c, MetricPack::identity(j)).unwrap();
        let f = fit(&panel, &FactorVarConfig::new(1, r)).unwrap();
        (panel, f)
    }

    #[test]
    fn scalar_sandwich_matches_textbook_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 80;
        let mut y = vec![0.0f64];
        for s in 1..t {
            let prev = y[s - 1];
            y.push(0.5 * prev + rng.sample::<f64, _>(StandardNormal) * (1.0 + prev.abs()));
        }
        let panel = TransformedPanel::new(
            DMatrix::from_row_slice(1, t, &y),
            1,
            MetricPack::identity(1),
        )
        .unwrap();
        let cfg = FactorVarConfig {
            demean: false,
            ..FactorVarConfig::new(1, 0)
        };
        let f = fit(&panel, &cfg).unwrap();
        let cov = covariance(&f, &panel).unwrap();
        let x: Vec<f64> = y[..t - 1].to_vec();
        let e: Vec<f64> = (1..t).map(|s| y[s] - f.beta[0] * y[s - 1]).collect();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let meat: f64 = x.iter().zip(&e).map(|(a, b)| a * a * b * b).sum();
        assert_abs_diff_eq!(cov.var_beta[(0, 0)], meat / (sxx * sxx), epsilon = 1e-10);
    }

    #[test]
    fn structured_covariance_matches_dense_scores() {
        for r in [0, 2] {
            let (panel, f) = toy_fit(3, 2, 40, r, 11 + r as u64);
            let cov = covariance(&f, &panel).unwrap();
            let z = projected_scores(&f, &panel).unwrap();
            let (n, t0) = (6.0, f.effective_len() as f64);
            let k = 9;
            let mut d = DMatrix::zeros(k, k);
            let mut o = DMatrix::zeros(k, k);
            for (i, zt) in z.iter().enumerate() {
                d += zt.transpose() * zt;
                let e = f.residuals_whitened.column(i);
                let mut sigma = DMatrix::zeros(6, 6);
                for unit in 0..3 {
                    let blk = e.rows(unit * 2, 2);
                    sigma
                        .view_mut((unit * 2, unit * 2), (2, 2))
                        .copy_from(&(blk * blk.transpose()));
                }
                o += zt.transpose() * sigma * zt;
            }
            d /= n * t0;
            o /= n * t0;
            assert!((&d - &cov.d_hat).abs().max() < 1e-10);
            assert!((&o - &cov.omega_hat).abs().max() < 1e-10);
            assert!(cov.d_hat.clone().symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn scores_without_factors_are_the_regressors() {
        let (panel, f) = toy_fit(2, 2, 20, 0, 3);
        let z = projected_scores(&f, &panel).unwrap();
        let white = panel.centered(&f.mean).whitened();
        let x = white.build_regressor(1, 1).unwrap();
        assert!((&z[0] - x).abs().max() < 1e-14);
    }

    #[test]
    fn constant_factor_demeans_the_regressors() {
        let (panel, mut f) = toy_fit(2, 2, 20, 0, 3);
        let t0 = f.effective_len();
        f.factors = DMatrix::from_element(t0, 1, 1.0);
        f.lambda_tilde = DMatrix::zeros(4, 1);
        f.lambda_tilde[(0, 0)] = 2.0;
        let z = projected_scores(&f, &panel).unwrap();
        let white = panel.centered(&f.mean).whitened();
        let xs: Vec<DMatrix<f64>> = (1..=t0)
            .map(|t| white.build_regressor(t, 1).unwrap())
            .collect();
        let mean = xs.iter().fold(DMatrix::zeros(4, 4), |acc, x| acc + x) / t0 as f64;
        let m = DMatrix::identity(4, 4) - &f.lambda_tilde * f.lambda_tilde.transpose() / 4.0;
        for (zt, xt) in z.iter().zip(&xs) {
            assert!((zt - &m * (xt - &mean)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn factor_weight_trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for r in 1..5 {
            let f = DMatrix::from_fn(30, r, |_, _| rng.sample::<f64, _>(StandardNormal));
            let a = factor_weights(&f).unwrap();
            assert_abs_diff_eq!(a.trace() / 30.0, r as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn residual_scaling_is_quadratic() {
        let (panel, mut f) = toy_fit(3, 2, 40, 1, 21);
        let base = covariance(&f, &panel).unwrap();
        f.residuals_whitened *= 2.0;
        let scaled = covariance(&f, &panel).unwrap();
        assert!((&scaled.d_hat - &base.d_hat).abs().max() < 1e-14);
        assert!((&scaled.omega_hat - &base.omega_hat * 4.0).abs().max() < 1e-10);
        assert!((&scaled.var_beta - &base.var_beta * 4.0).abs().max() < 1e-10);
    }

    #[test]
    fn nonpositive_coefficients_give_empty_network() {
        let (panel, mut f) = toy_fit(3, 2, 40, 0, 2);
        let cov = covariance(&f, &panel).unwrap();
        for b in f.beta.iter_mut() {
            *b = -b.abs();
        }
        let net = select_edges(&f, &cov, &EdgeSelection::at_level(0.1)).unwrap();
        assert_eq!(net.num_selected(), 0);
        assert_eq!(net.n_hypotheses, 0);
        assert_eq!(net.edges.len(), 6);
    }

    #[test]
    fn selected_edges_respect_invariants_and_serialize() {
        let (panel, f) = toy_fit(4, 3, 120, 2, 9);
        let cov = covariance(&f, &panel).unwrap();
        let net = select_edges(&f, &cov, &EdgeSelection::at_level(0.1)).unwrap();
        assert!(net.num_selected() > 0);
        for e in &net.edges {
            assert!(e.p_adjusted >= e.p_raw);
            if e.selected {
                assert!(e.coef > 0.0 && e.source != e.target);
                // planted dependence is on unit (c + 1) mod C
                assert_eq!(e.source, (e.target + 1) % 4);
            }
        }
        let json = net.to_json(None).unwrap();
        let back = read_network_json(&json).unwrap();
        assert_eq!(back.len(), net.edges.len());
        assert_eq!(
            back.iter().filter(|e| e.selected).count(),
            net.num_selected()
        );
        let mut buf = Vec::new();
        net.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("source,target,lag,coef,t,p,p_adj,selected"));
        assert_eq!(text.lines().count(), net.edges.len() + 1);

        let all = select_edges(
            &f,
            &cov,
            &EdgeSelection {
                family: HypothesisFamily::AllOffDiagonal,
                ..EdgeSelection::at_level(0.1)
            },
        )
        .unwrap();
        assert_eq!(all.n_hypotheses, 12);
        let flipped = select_edges(
            &f,
            &cov,
            &EdgeSelection {
                direction: DirectionConvention::RowIsSource,
                ..EdgeSelection::at_level(0.1)
            },
        )
        .unwrap();
        for (a, b) in net.edges.iter().zip(&flipped.edges) {
            assert_eq!((a.source, a.target), (b.target, b.source));
        }
    }

    #[test]
    fn selection_is_invariant_to_enumeration_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p: Vec<f64> = (0..30).map(|_| rng.random::<f64>().powi(4)).collect();
        let (rej, adj) = by_fdr(&p, 0.1).unwrap();
        let mut perm: Vec<usize> = (0..30).collect();
        perm.reverse();
        perm.swap(3, 17);
        let shuffled: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let (rej2, adj2) = by_fdr(&shuffled, 0.1).unwrap();
        for (pos, &i) in perm.iter().enumerate() {
            assert_eq!(rej[i], rej2[pos]);
            assert_abs_diff_eq!(adj[i], adj2[pos], epsilon = 1e-15);
        }
    }
}
