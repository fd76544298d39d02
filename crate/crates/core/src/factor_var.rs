//! Cross-unit VAR with latent factors, estimated by alternating time-direction
//! PCA of the residuals and projected least squares for the VAR block.
//!
//! All computation happens in whitened coordinates `K' Y_t`, where the metric
//! is Euclidean. Loadings are returned both whitened (`lambda_tilde`,
//! normalized so that `N^{-1} L'L = I_r`) and in the original coordinates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{beta_to_matrices, solve_spd, LaggedDesign, TransformedPanel};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FactorVarConfig {
    /// Lag order `p >= 1`.
    pub lags: usize,
    /// Number of latent factors; `0` fits a plain VAR.
    pub factors: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Subtract the time average before fitting.
    pub demean: bool,
}

impl FactorVarConfig {
    pub fn new(lags: usize, factors: usize) -> Self {
        FactorVarConfig {
            lags,
            factors,
            ..Default::default()
        }
    }
}

impl Default for FactorVarConfig {
    fn default() -> Self {
        FactorVarConfig {
            lags: 1,
            factors: 0,
            tol: 1e-7,
            max_iter: 200,
            demean: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorVarFit {
    pub units: usize,
    pub dim: usize,
    pub lags: usize,
    /// `V_1, ..., V_p`, each `C x C`; entry `(c, d)` loads unit `d` onto unit `c`.
    pub v: Vec<DMatrix<f64>>,
    /// Stacked `(Vec(V_1')', ..., Vec(V_p')')'`.
    pub beta: Vec<f64>,
    /// Whitened loadings, `N x r`.
    pub lambda_tilde: DMatrix<f64>,
    /// Loadings in the original coordinates, `(I_C (x) K')^{-1} lambda_tilde`.
    pub lambda: DMatrix<f64>,
    /// Factors, `T0 x r`, row `i` is period `p + i`.
    pub factors: DMatrix<f64>,
    /// Whitened idiosyncratic residuals, `N x T0`, column `i` is period `p + i`.
    pub residuals_whitened: DMatrix<f64>,
    /// Top `r` eigenvalues of the residual covariance, descending.
    pub eigvals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Mean removed before fitting (zeros when not demeaning).
    pub mean: Vec<f64>,
    /// Concentrated least-squares objective after each VAR update.
    pub objective_trace: Vec<f64>,
}

impl FactorVarFit {
    pub fn num_factors(&self) -> usize {
        self.lambda_tilde.ncols()
    }

    /// Effective sample length `T0 = T - p`.
    pub fn effective_len(&self) -> usize {
        self.residuals_whitened.ncols()
    }
}

/// Whitened, optionally centered design that a fit was computed on.
pub fn whitened_design(
    panel: &TransformedPanel,
    lags: usize,
    mean: &[f64],
) -> Result<LaggedDesign> {
    let centered = panel.centered(mean);
    LaggedDesign::new(&centered.whitened(), lags)
}

/// Top-`r` eigenpairs of `S = T0^{-1} sum_t R_t R_t'` for residuals `R`
/// (`N x T0`), with loadings scaled so that `N^{-1} L'L = I_r`.
///
/// Eigenvalues are descending and each column's largest-magnitude entry is
/// positive. When `T0 < N` the decomposition runs on the `T0 x T0` Gram matrix.
pub fn pca_step(residuals: &DMatrix<f64>, r: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    pca_with_rank(residuals, r).map(|(l, v, _)| (l, v))
}

fn pca_with_rank(residuals: &DMatrix<f64>, r: usize) -> Result<(DMatrix<f64>, Vec<f64>, usize)> {
    let (n, t0) = residuals.shape();
    if r > n {
        return Err(Error::InvalidDimension(format!(
            "cannot extract {r} factors from dimension {n}"
        )));
    }
    if r == 0 {
        return Ok((DMatrix::zeros(n, 0), Vec::new(), 0));
    }
    let scale = 1.0 / t0 as f64;
    let (vals, vecs) = if n <= t0 {
        let s = residuals * residuals.transpose() * scale;
        let eig = SymmetricEigen::new(s);
        let order = descending(&eig.eigenvalues);
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vecs = DMatrix::zeros(n, r);
        for (col, &i) in order.iter().take(r).enumerate() {
            vecs.set_column(col, &eig.eigenvectors.column(i));
        }
        (vals, vecs)
    } else {
        let g = residuals.tr_mul(residuals) * scale;
        let eig = SymmetricEigen::new(g);
        let order = descending(&eig.eigenvalues);
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let rank = numerical_rank(&vals, n.max(t0));
        if r > rank {
            return Err(Error::RankDeficient { requested: r, rank });
        }
        let mut vecs = DMatrix::zeros(n, r);
        for (col, &i) in order.iter().take(r).enumerate() {
            let u = residuals * eig.eigenvectors.column(i);
            let norm = u.norm();
            vecs.set_column(col, &(u / norm));
        }
        // one Gram-Schmidt sweep against rounding drift
        for col in 0..r {
            for prev in 0..col {
                let proj = vecs.column(prev).dot(&vecs.column(col));
                let p = vecs.column(prev).clone_owned();
                let mut c = vecs.column_mut(col);
                c.axpy(-proj, &p, 1.0);
            }
            let norm = vecs.column(col).norm();
            vecs.column_mut(col).scale_mut(1.0 / norm);
        }
        (vals, vecs)
    };
    let rank = numerical_rank(&vals, n.max(t0));
    if r > rank {
        return Err(Error::RankDeficient { requested: r, rank });
    }
    let mut lambda = vecs * (n as f64).sqrt();
    for mut col in lambda.column_iter_mut() {
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    Ok((lambda, vals.into_iter().take(r).collect(), rank))
}

fn descending(vals: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    order
}

/// Number of eigenvalues above the rounding floor of the largest one.
fn numerical_rank(sorted_desc: &[f64], dim: usize) -> usize {
    let top = sorted_desc.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    let floor = top * dim as f64 * f64::EPSILON * 10.0;
    sorted_desc.iter().filter(|v| **v > floor).count()
}

/// Projected least squares for the VAR coefficients given whitened loadings:
/// `(sum W'MW)^{-1} sum W'My` with `M = I - N^{-1} L L'`.
pub fn fwl_step(design: &LaggedDesign, lambda_tilde: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (a, b) = design.normal_equations(lambda_tilde);
    let beta = solve_spd(&a, &b, "VAR normal equations")?;
    Ok(beta.as_slice().to_vec())
}

/// `sum_t (y_t - W_t beta)' M (y_t - W_t beta)`.
pub fn concentrated_objective(
    design: &LaggedDesign,
    beta: &[f64],
    lambda_tilde: &DMatrix<f64>,
) -> f64 {
    let r = design.residuals(beta);
    let total = r.norm_squared();
    if lambda_tilde.ncols() == 0 {
        return total;
    }
    let n = design.stacked_dim() as f64;
    total - (lambda_tilde.tr_mul(&r)).norm_squared() / n
}

fn relative_change(new: &[DMatrix<f64>], old: &[DMatrix<f64>]) -> f64 {
    new.iter()
        .zip(old)
        .map(|(a, b)| (a - b).norm() / (1.0 + b.norm()))
        .fold(0.0, f64::max)
}

/// Fits the factor-augmented VAR.
pub fn fit(panel: &TransformedPanel, config: &FactorVarConfig) -> Result<FactorVarFit> {
    let (c, j) = (panel.units(), panel.dim());
    let n = c * j;
    let p = config.lags;
    let r = config.factors;
    if p == 0 {
        return Err(Error::InvalidParameter(
            "lag order p must be at least 1".into(),
        ));
    }
    if panel.periods() <= p {
        return Err(Error::InvalidDimension(format!(
            "need T > p; got T = {}, p = {p}",
            panel.periods()
        )));
    }
    let t0 = panel.periods() - p;
    if r >= n.min(t0) {
        return Err(Error::InvalidParameter(format!(
            "number of factors {r} must be below min(CJ, T - p) = {}",
            n.min(t0)
        )));
    }
    let mean = if config.demean {
        panel.mean()
    } else {
        vec![0.0; n]
    };
    let design = whitened_design(panel, p, &mean)?;

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let no_factors = DMatrix::zeros(n, 0);
    let mut beta;
    if r == 0 {
        beta = fwl_step(&design, &no_factors)?;
        trace.push(concentrated_objective(&design, &beta, &no_factors));
        iterations = 1;
        converged = true;
    } else {
        beta = vec![0.0; design.num_coefs()];
        let mut v_old = beta_to_matrices(&beta, c, p);
        while iterations < config.max_iter {
            let resid = design.residuals(&beta);
            let (lambda, _, rank) = pca_with_rank(&resid, r)?;
            if r >= rank {
                return Err(Error::RankDeficient { requested: r, rank });
            }
            beta = fwl_step(&design, &lambda)?;
            iterations += 1;
            trace.push(concentrated_objective(&design, &beta, &lambda));
            let v_new = beta_to_matrices(&beta, c, p);
            let change = relative_change(&v_new, &v_old);
            v_old = v_new;
            if change < config.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!(
                "factor VAR alternation stopped after {iterations} iterations without converging"
            );
        }
    }

    let resid = design.residuals(&beta);
    let (lambda_tilde, eigvals) = if r > 0 {
        pca_step(&resid, r)?
    } else {
        (no_factors, Vec::new())
    };
    let factors = (lambda_tilde.tr_mul(&resid) / n as f64).transpose();
    let residuals_whitened = &resid - &lambda_tilde * factors.transpose();
    let metric = panel.metric();
    let mut lambda = DMatrix::zeros(n, r);
    for col in 0..r {
        let orig = metric.unwhiten_stacked(lambda_tilde.column(col).as_slice());
        lambda.set_column(col, &DVector::from_vec(orig));
    }

    Ok(FactorVarFit {
        units: c,
        dim: j,
        lags: p,
        v: beta_to_matrices(&beta, c, p),
        beta,
        lambda_tilde,
        lambda,
        factors,
        residuals_whitened,
        eigvals,
        iterations,
        converged,
        mean,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::matrices_to_beta;
    use crate::simplex::MetricPack;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    fn var_panel(
        c: usize,
        j: usize,
        t: usize,
        v: &DMatrix<f64>,
        noise: f64,
        seed: u64,
    ) -> TransformedPanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = c * j;
        let mut y = DMatrix::zeros(n, t);
        for i in 0..n {
            y[(i, 0)] = gaussian(&mut rng);
        }
        for s in 1..t {
            for cc in 0..c {
                for jj in 0..j {
                    let mut acc = noise * gaussian(&mut rng);
                    for d in 0..c {
                        acc += v[(cc, d)] * y[(d * j + jj, s - 1)];
                    }
                    y[(cc * j + jj, s)] = acc;
                }
            }
        }
        TransformedPanel::new(y, c, MetricPack::identity(j)).unwrap()
    }

    #[test]
    fn noiseless_var_is_recovered_exactly() {
        let v = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, -0.1, 0.4, 0.1, 0.0, 0.3, 0.2]);
        let panel = var_panel(3, 4, 30, &v, 0.0, 1);
        let cfg = FactorVarConfig {
            demean: false,
            ..FactorVarConfig::new(1, 0)
        };
        let f = fit(&panel, &cfg).unwrap();
        assert!((&f.v[0] - &v).abs().max() < 1e-8);
    }

    #[test]
    fn pca_on_rank_one_residuals() {
        let lam = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
        let f = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7, -0.4, 1.1]);
        let resid = &lam * f.transpose();
        let (l, vals) = pca_step(&resid, 1).unwrap();
        let dir = l.column(0) / l.column(0).norm();
        let target = &lam / lam.norm();
        assert!((dir.dot(&target).abs() - 1.0).abs() < 1e-12);
        // largest-magnitude coordinate (index 1) is made positive
        assert!(l[(1, 0)] > 0.0);
        assert!(vals[0] > 0.0);
        assert!(matches!(
            pca_step(&resid, 2),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn eigenvalues_sum_to_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let resid = DMatrix::from_fn(5, 12, |_, _| gaussian(&mut rng));
        let s = &resid * resid.transpose() / 12.0;
        let (_, vals) = pca_step(&resid, 5).unwrap();
        assert!((vals.iter().sum::<f64>() - s.trace()).abs() < 1e-12);
    }

    #[test]
    fn pca_eigen_equation_in_both_regimes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (n, t0) in [(6, 40), (40, 9)] {
            let resid = DMatrix::from_fn(n, t0, |_, _| gaussian(&mut rng));
            let s = &resid * resid.transpose() / t0 as f64;
            let (l, vals) = pca_step(&resid, 3).unwrap();
            let lhs = &s * &l;
            let rhs = &l * DMatrix::from_diagonal(&DVector::from_vec(vals.clone()));
            assert!((lhs - rhs).abs().max() <= 1e-8 * s.norm());
            let gram = l.tr_mul(&l) / n as f64;
            assert!((gram - DMatrix::identity(3, 3)).abs().max() < 1e-10);
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn factor_fit_normalization_and_orthogonality() {
        let (c, j, t) = (3, 4, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = DMatrix::from_row_slice(3, 3, &[0.4, 0.2, 0.0, 0.0, 0.3, 0.0, 0.1, 0.0, 0.5]);
        let lam = DMatrix::from_fn(c * j, 2, |_, _| gaussian(&mut rng));
        let mut y = DMatrix::zeros(c * j, t);
        for s in 1..t {
            let f = DVector::from_fn(2, |_, _| gaussian(&mut rng));
            let common = &lam * f;
            for cc in 0..c {
                for jj in 0..j {
                    let mut acc = common[cc * j + jj] + 0.3 * gaussian(&mut rng);
                    for d in 0..c {
                        acc += v[(cc, d)] * y[(d * j + jj, s - 1)];
                    }
                    y[(cc * j + jj, s)] = acc;
                }
            }
        }
        let panel = TransformedPanel::new(y, c, MetricPack::identity(j)).unwrap();
        let f = fit(&panel, &FactorVarConfig::new(1, 2)).unwrap();
        assert!(f.converged);
        let n = (c * j) as f64;
        let gram = f.lambda_tilde.tr_mul(&f.lambda_tilde) / n;
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-10);
        let proj = f.lambda_tilde.tr_mul(&f.residuals_whitened);
        assert!(proj.abs().max() < 1e-8 * f.residuals_whitened.abs().max().max(1.0));
        for w in f.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8 * w[0].abs().max(1.0));
        }
        let fcov = f.factors.tr_mul(&f.factors) / f.effective_len() as f64;
        assert!(fcov[(0, 1)].abs() < 1e-6 * fcov[(0, 0)].max(fcov[(1, 1)]));
    }

    #[test]
    fn whitening_consistency() {
        let (c, j, t) = (2, 3, 40);
        let v = DMatrix::from_row_slice(2, 2, &[0.3, 0.2, -0.1, 0.4]);
        let base = var_panel(c, j, t, &v, 0.5, 4);
        let h = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.7]);
        let metric = MetricPack::from_metric(h).unwrap();
        let panel = TransformedPanel::new(base.data().clone(), c, metric).unwrap();
        let white = panel.whitened();
        for r in [0, 1] {
            let cfg = FactorVarConfig::new(1, r);
            let a = fit(&panel, &cfg).unwrap();
            let b = fit(&white, &cfg).unwrap();
            assert!((&a.v[0] - &b.v[0]).abs().max() < 1e-10);
        }
    }

    #[test]
    fn rejects_too_many_factors() {
        let v = DMatrix::from_element(2, 2, 0.1);
        let panel = var_panel(2, 2, 10, &v, 1.0, 2);
        assert!(fit(&panel, &FactorVarConfig::new(1, 4)).is_err());
        assert!(fit(&panel, &FactorVarConfig::new(0, 0)).is_err());
    }

    #[test]
    fn beta_layout_round_trips() {
        let v = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]),
        ];
        let beta = matrices_to_beta(&v);
        assert_eq!(beta, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(beta_to_matrices(&beta, 2, 2), v);
    }
}
