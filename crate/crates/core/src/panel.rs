//! Stacked logit-coordinate panels and the lagged regressor structure shared by
//! the estimator and its covariance.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::MetricPack;

/// `T` observations of `Y_t = (Y_{t,1}', ..., Y_{t,C}')'`, each block in `R^J`,
/// together with the per-unit metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformedPanel {
    units: usize,
    dim: usize,
    /// `CJ x T`, one column per period.
    y: DMatrix<f64>,
    metric: MetricPack,
}

impl TransformedPanel {
    /// `y` holds one stacked `CJ`-vector per period.
    pub fn new(y: DMatrix<f64>, units: usize, metric: MetricPack) -> Result<Self> {
        let dim = metric.dim();
        if units == 0 || dim == 0 {
            return Err(Error::InvalidDimension(
                "panel needs C >= 1 and J >= 1".into(),
            ));
        }
        if y.nrows() != units * dim {
            return Err(Error::DimensionMismatch {
                expected: units * dim,
                got: y.nrows(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("panel contains non-finite entries".into()));
        }
        Ok(TransformedPanel {
            units,
            dim,
            y,
            metric,
        })
    }

    /// Builds a panel from rows `rows[t]` of stacked coordinates.
    pub fn from_rows(rows: &[Vec<f64>], units: usize, metric: MetricPack) -> Result<Self> {
        let n = units * metric.dim();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let y = DMatrix::from_fn(n, rows.len(), |i, t| rows[t][i]);
        Self::new(y, units, metric)
    }

    pub fn periods(&self) -> usize {
        self.y.ncols()
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stacked dimension `N = CJ`.
    pub fn stacked_dim(&self) -> usize {
        self.units * self.dim
    }

    pub fn metric(&self) -> &MetricPack {
        &self.metric
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Stacked observation at period `t` (zero-based).
    pub fn period(&self, t: usize) -> &[f64] {
        let n = self.stacked_dim();
        &self.y.as_slice()[t * n..(t + 1) * n]
    }

    /// Time average `(1/T) sum_s Y_s`.
    pub fn mean(&self) -> Vec<f64> {
        let t = self.periods() as f64;
        self.y.column_sum().iter().map(|v| v / t).collect()
    }

    /// Panel with `mean` subtracted from every period.
    pub fn centered(&self, mean: &[f64]) -> Self {
        let mut y = self.y.clone();
        for mut col in y.column_iter_mut() {
            for (v, m) in col.iter_mut().zip(mean) {
                *v -= m;
            }
        }
        TransformedPanel {
            units: self.units,
            dim: self.dim,
            y,
            metric: self.metric.clone(),
        }
    }

    /// `Y_t - (1/T) sum_s Y_s`.
    pub fn demeaned(&self) -> Self {
        self.centered(&self.mean())
    }

    /// `(I_C (x) K^T) Y_t` for every period, with the identity metric attached.
    pub fn whitened(&self) -> Self {
        let n = self.stacked_dim();
        let mut y = DMatrix::zeros(n, self.periods());
        for t in 0..self.periods() {
            let w = self.metric.whiten_stacked(self.period(t));
            y.column_mut(t).copy_from_slice(&w);
        }
        TransformedPanel {
            units: self.units,
            dim: self.dim,
            y,
            metric: MetricPack::identity(self.dim),
        }
    }

    /// `J x C` matrix `(Y_{t,1}, ..., Y_{t,C})`.
    pub fn unit_matrix(&self, t: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim, self.units, self.period(t))
    }

    /// Dense `X_{t-k} = I_C (x) (Y_{t-k,1}, ..., Y_{t-k,C})` of size `CJ x C^2`,
    /// with `t` zero-based and lag `k >= 1`.
    pub fn build_regressor(&self, t: usize, k: usize) -> Result<DMatrix<f64>> {
        if k == 0 || k > t || t >= self.periods() {
            return Err(Error::IndexOutOfRange(format!(
                "regressor X_(t-k) needs 1 <= k <= t < T; got t = {t}, k = {k}, T = {}",
                self.periods()
            )));
        }
        let (c, j) = (self.units, self.dim);
        let block = self.unit_matrix(t - k);
        let mut x = DMatrix::zeros(c * j, c * c);
        for u in 0..c {
            x.view_mut((u * j, u * c), (j, c)).copy_from(&block);
        }
        Ok(x)
    }
}

/// Index of `V_{k,cd}` inside `beta = (Vec(V_1')', ..., Vec(V_p')')'`, with
/// zero-based lag `k` (i.e. lag `k + 1`).
pub fn coef_index(units: usize, lag: usize, target: usize, source: usize) -> usize {
    lag * units * units + target * units + source
}

/// Splits `beta` into the `p` coefficient matrices `V_k`.
pub fn beta_to_matrices(beta: &[f64], units: usize, lags: usize) -> Vec<DMatrix<f64>> {
    (0..lags)
        .map(|k| DMatrix::from_fn(units, units, |c, d| beta[coef_index(units, k, c, d)]))
        .collect()
}

/// Stacks coefficient matrices back into `beta`.
pub fn matrices_to_beta(v: &[DMatrix<f64>]) -> Vec<f64> {
    let units = v.first().map_or(0, |m| m.nrows());
    let mut beta = vec![0.0; v.len() * units * units];
    for (k, m) in v.iter().enumerate() {
        for c in 0..units {
            for d in 0..units {
                beta[coef_index(units, k, c, d)] = m[(c, d)];
            }
        }
    }
    beta
}

/// The stacked regression `y_t = W_t beta + ...` for `t = p..T`, where
/// `W_t = (X_{t-1}, ..., X_{t-p})` is represented through the `J x pC`
/// blocks `Z_t` with column `k C + d` equal to `y_{t-k-1, d}`; every
/// `W_t` is `I_C (x) Z_t` up to a column permutation.
#[derive(Debug, Clone)]
pub struct LaggedDesign {
    units: usize,
    dim: usize,
    lags: usize,
    blocks: Vec<DMatrix<f64>>,
    /// `N x T0` responses.
    response: DMatrix<f64>,
}

impl LaggedDesign {
    /// Builds the design from an already whitened (and centered) panel.
    pub fn new(panel: &TransformedPanel, lags: usize) -> Result<Self> {
        if lags == 0 {
            return Err(Error::InvalidParameter(
                "lag order p must be at least 1".into(),
            ));
        }
        let t_total = panel.periods();
        if t_total <= lags {
            return Err(Error::InvalidDimension(format!(
                "need T > p; got T = {t_total}, p = {lags}"
            )));
        }
        let (c, j) = (panel.units(), panel.dim());
        let blocks = (lags..t_total)
            .map(|t| {
                let mut z = DMatrix::zeros(j, lags * c);
                for k in 0..lags {
                    z.view_mut((0, k * c), (j, c))
                        .copy_from(&panel.unit_matrix(t - k - 1));
                }
                z
            })
            .collect();
        let response = panel.data().columns(lags, t_total - lags).into_owned();
        Ok(LaggedDesign {
            units: c,
            dim: j,
            lags,
            blocks,
            response,
        })
    }

    /// Same responses with replacement regressor blocks.
    pub fn with_blocks(&self, blocks: Vec<DMatrix<f64>>) -> Self {
        assert_eq!(blocks.len(), self.blocks.len());
        LaggedDesign {
            blocks,
            ..self.clone()
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    /// Effective sample length `T0 = T - p`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn stacked_dim(&self) -> usize {
        self.units * self.dim
    }

    /// Number of coefficients `p C^2`.
    pub fn num_coefs(&self) -> usize {
        self.lags * self.units * self.units
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn response(&self) -> &DMatrix<f64> {
        &self.response
    }

    fn unit_coefs(&self, beta: &[f64], c: usize) -> DVector<f64> {
        let u = self.units;
        DVector::from_fn(self.lags * u, |i, _| {
            let (k, d) = (i / u, i % u);
            beta[coef_index(u, k, c, d)]
        })
    }

    /// `W_t beta` for the `i`-th retained period.
    pub fn apply(&self, i: usize, beta: &[f64]) -> DVector<f64> {
        let (c, j) = (self.units, self.dim);
        let mut out = DVector::zeros(c * j);
        for u in 0..c {
            let y = &self.blocks[i] * self.unit_coefs(beta, u);
            out.rows_mut(u * j, j).copy_from(&y);
        }
        out
    }

    /// `W_t' v` for the `i`-th retained period.
    pub fn apply_transpose(&self, i: usize, v: &[f64]) -> DVector<f64> {
        let (c, j) = (self.units, self.dim);
        let mut out = DVector::zeros(self.num_coefs());
        for u in 0..c {
            let vc = DVector::from_column_slice(&v[u * j..(u + 1) * j]);
            let z = self.blocks[i].tr_mul(&vc);
            self.scatter_unit(&mut out, u, z.as_slice());
        }
        out
    }

    fn scatter_unit(&self, out: &mut DVector<f64>, c: usize, vals: &[f64]) {
        let u = self.units;
        for (i, v) in vals.iter().enumerate() {
            out[coef_index(u, i / u, c, i % u)] += v;
        }
    }

    /// `W_t' Lambda` (`pC^2 x r`) for the `i`-th retained period.
    pub(crate) fn loading_products(&self, i: usize, lambda: &DMatrix<f64>) -> DMatrix<f64> {
        let (c, j, u) = (self.units, self.dim, self.units);
        let r = lambda.ncols();
        let mut q = DMatrix::zeros(self.num_coefs(), r);
        for unit in 0..c {
            let m = self.blocks[i].tr_mul(&lambda.rows(unit * j, j));
            for row in 0..m.nrows() {
                let idx = coef_index(u, row / u, unit, row % u);
                for col in 0..r {
                    q[(idx, col)] = m[(row, col)];
                }
            }
        }
        q
    }

    /// Residuals `y_t - W_t beta`, one column per retained period.
    pub fn residuals(&self, beta: &[f64]) -> DMatrix<f64> {
        let mut r = self.response.clone();
        for i in 0..self.len() {
            let fitted = self.apply(i, beta);
            let mut col = r.column_mut(i);
            col -= fitted;
        }
        r
    }

    /// `sum_t W_t' M W_t` and `sum_t W_t' M y_t` with
    /// `M = I - N^{-1} Lambda Lambda'` (`M = I` when `lambda` has no columns).
    pub fn normal_equations(&self, lambda: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        self.normal_equations_for(lambda, &self.response)
    }

    /// As [`Self::normal_equations`] with an arbitrary `N x T0` response.
    pub fn normal_equations_for(
        &self,
        lambda: &DMatrix<f64>,
        response: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DVector<f64>) {
        let u = self.units;
        let pc = self.lags * u;
        let n = self.stacked_dim() as f64;
        let r = lambda.ncols();

        let mut gram = DMatrix::zeros(pc, pc);
        for z in &self.blocks {
            gram += z.tr_mul(z);
        }
        let mut a = DMatrix::zeros(self.num_coefs(), self.num_coefs());
        for c in 0..u {
            for row in 0..pc {
                let ia = coef_index(u, row / u, c, row % u);
                for col in 0..pc {
                    let ib = coef_index(u, col / u, c, col % u);
                    a[(ia, ib)] = gram[(row, col)];
                }
            }
        }
        let mut b = DVector::zeros(self.num_coefs());
        for i in 0..self.len() {
            b += self.apply_transpose(i, response.column(i).as_slice());
        }
        if r > 0 {
            let t0 = self.len();
            let mut q_all = DMatrix::zeros(self.num_coefs(), t0 * r);
            for i in 0..t0 {
                let q = self.loading_products(i, lambda);
                q_all.columns_mut(i * r, r).copy_from(&q);
                let proj = lambda.tr_mul(&response.column(i));
                b -= (q * proj) / n;
            }
            // a -= (1/N) Q Q'
            a.gemm(-1.0 / n, &q_all, &q_all.transpose(), 1.0);
        }
        crate::simplex::symmetrize(&mut a);
        (a, b)
    }
}

/// Solves a symmetric positive (semi)definite system, reporting singularity
/// with an eigenvalue-based condition estimate.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    Ok(checked_cholesky(a, context)?.solve(b))
}

/// Inverse of a well-conditioned symmetric positive definite matrix.
pub fn inverse_spd(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    Ok(checked_cholesky(a, context)?.inverse())
}

fn checked_cholesky(a: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    let scale = a.diagonal().iter().cloned().fold(0.0, f64::max);
    if scale > 0.0 {
        if let Some(chol) = a.clone().cholesky() {
            let ld = chol.l_dirty().diagonal();
            let min = ld.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = ld.iter().cloned().fold(0.0, f64::max);
            // squared ratio of Cholesky pivots approximates the condition number
            if min > 0.0 && (max / min).powi(2) < 1e14 {
                return Ok(chol);
            }
        }
    }
    Err(Error::Singular {
        context: context.to_string(),
        condition: condition_number(a),
    })
}

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
