//! Shifted logit/softmax coordinates for mixture weights and the Gram metric
//! that makes those coordinates isometric to the spline-mixture L2 geometry.
//!
//! The last weight is the base component. For a shift `delta >= 0`,
//! `logit_delta` maps `{p : p_j > -delta, sum p = 1}` onto `R^J` and
//! `softmax_delta` is its inverse.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::SplineBasis;

/// Tolerance on `sum p = 1` accepted by [`logit_delta`].
pub const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    pub delta: f64,
    /// Coordinate dimension `J`; weight vectors have `J + 1` entries.
    pub dim: usize,
}

impl TransformConfig {
    pub fn new(delta: f64, dim: usize) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "shift delta must be nonnegative, got {delta}"
            )));
        }
        Ok(TransformConfig { delta, dim })
    }
}

pub fn logit_delta(p: &[f64], cfg: &TransformConfig) -> Result<Vec<f64>> {
    if p.len() != cfg.dim + 1 {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim + 1,
            got: p.len(),
        });
    }
    check_domain(p, cfg)?;
    let base = (cfg.delta + p[cfg.dim]).ln();
    Ok(p[..cfg.dim]
        .iter()
        .map(|pj| (cfg.delta + pj).ln() - base)
        .collect())
}

fn check_domain(p: &[f64], cfg: &TransformConfig) -> Result<()> {
    if let Some((j, v)) = p.iter().enumerate().find(|(_, v)| !(**v > -cfg.delta)) {
        return Err(Error::OutsideDomain(format!(
            "component {j} = {v} is not above -delta = {}",
            -cfg.delta
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::OutsideDomain(format!(
            "components sum to {s}, not 1"
        )));
    }
    Ok(())
}

pub fn softmax_delta(b: &[f64], cfg: &TransformConfig) -> Result<Vec<f64>> {
    if b.len() != cfg.dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim,
            got: b.len(),
        });
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    // the base component carries an implicit zero coordinate
    let shift = b.iter().cloned().fold(0.0, f64::max);
    let mut e: Vec<f64> = b.iter().map(|x| (x - shift).exp()).collect();
    e.push((-shift).exp());
    let denom: f64 = e.iter().sum();
    let scale = (cfg.dim + 1) as f64 * cfg.delta + 1.0;
    Ok(e.into_iter()
        .map(|v| scale * v / denom - cfg.delta)
        .collect())
}

/// `w1 (+) w2 = softmax(logit(w1) + logit(w2))`.
pub fn oplus(w1: &[f64], w2: &[f64], cfg: &TransformConfig) -> Result<Vec<f64>> {
    let a = logit_delta(w1, cfg)?;
    let b = logit_delta(w2, cfg)?;
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    softmax_delta(&sum, cfg)
}

/// `alpha (x) w = softmax(alpha * logit(w))`.
pub fn otimes(alpha: f64, w: &[f64], cfg: &TransformConfig) -> Result<Vec<f64>> {
    let a = logit_delta(w, cfg)?;
    let scaled: Vec<f64> = a.iter().map(|x| alpha * x).collect();
    softmax_delta(&scaled, cfg)
}

/// Gram metric `H` on logit coordinates and a square root `K K^T = H`.
///
/// The stacked metric over `C` units is `I_C (x) H`; it is applied block by
/// block and never materialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricPack {
    h: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl MetricPack {
    /// Builds `H = E^T G E`, where the columns of `E` are `softmax_delta(e_i)`
    /// and `G` is the Gram matrix of the normalized spline components.
    pub fn build(basis: &SplineBasis, cfg: &TransformConfig) -> Result<Self> {
        let j = cfg.dim;
        if basis.num_weights() != j + 1 {
            return Err(Error::DimensionMismatch {
                expected: j + 1,
                got: basis.num_weights(),
            });
        }
        if j == 0 {
            return Err(Error::InvalidDimension(
                "metric needs at least one logit coordinate".into(),
            ));
        }
        let mut e = DMatrix::zeros(j + 1, j);
        for i in 0..j {
            let mut unit = vec![0.0; j];
            unit[i] = 1.0;
            let col = softmax_delta(&unit, cfg)?;
            e.set_column(i, &DVector::from_vec(col));
        }
        let mut h = e.transpose() * basis.raw_gram() * &e;
        symmetrize(&mut h);
        Self::from_metric(h)
    }

    /// Wraps an explicit SPD metric.
    pub fn from_metric(h: DMatrix<f64>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::InvalidDimension("metric must be square".into()));
        }
        let chol = h.clone().cholesky().ok_or_else(|| {
            Error::Cholesky(
                "Gram metric is not numerically positive definite; check delta and J".into(),
            )
        })?;
        let k = chol.l();
        Ok(MetricPack { h, k })
    }

    /// Euclidean metric, under which whitening is the identity.
    pub fn identity(dim: usize) -> Self {
        MetricPack {
            h: DMatrix::identity(dim, dim),
            k: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Lower-triangular factor with `K K^T = H`.
    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// `<u, v>_H = u^T H v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let j = self.dim();
        for len in [u.len(), v.len()] {
            if len != j {
                return Err(Error::DimensionMismatch {
                    expected: j,
                    got: len,
                });
            }
        }
        let mut acc = 0.0;
        for a in 0..j {
            let mut row = 0.0;
            for b in 0..j {
                row += self.h[(a, b)] * v[b];
            }
            acc += u[a] * row;
        }
        Ok(acc)
    }

    /// `K^T y` for one unit block.
    pub fn whiten_block(&self, y: &[f64]) -> Vec<f64> {
        let j = self.dim();
        (0..j)
            .map(|a| (a..j).map(|b| self.k[(b, a)] * y[b]).sum())
            .collect()
    }

    /// Applies `I_C (x) K^T` to a stacked vector of `C` blocks.
    pub fn whiten_stacked(&self, y: &[f64]) -> Vec<f64> {
        y.chunks(self.dim())
            .flat_map(|blk| self.whiten_block(blk))
            .collect()
    }

    /// Solves `K^T x = z` for one unit block.
    pub fn unwhiten_block(&self, z: &[f64]) -> Vec<f64> {
        let j = self.dim();
        let mut x = vec![0.0; j];
        for a in (0..j).rev() {
            let mut s = z[a];
            for b in a + 1..j {
                s -= self.k[(b, a)] * x[b];
            }
            x[a] = s / self.k[(a, a)];
        }
        x
    }

    /// Applies `(I_C (x) K^T)^{-1}` to a stacked vector.
    pub fn unwhiten_stacked(&self, z: &[f64]) -> Vec<f64> {
        z.chunks(self.dim())
            .flat_map(|blk| self.unwhiten_block(blk))
            .collect()
    }

    /// Stacked inner product `u^T (I_C (x) H) v`.
    pub fn inner_stacked(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != v.len() || !u.len().is_multiple_of(self.dim()) {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: v.len(),
            });
        }
        u.chunks(self.dim())
            .zip(v.chunks(self.dim()))
            .map(|(a, b)| self.inner(a, b))
            .sum()
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for a in 0..n {
        for b in 0..a {
            let v = 0.5 * (m[(a, b)] + m[(b, a)]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg(delta: f64, dim: usize) -> TransformConfig {
        TransformConfig::new(delta, dim).unwrap()
    }

    #[test]
    fn uniform_maps_to_origin() {
        for d in [0.0, 0.3, 1.0] {
            let c = cfg(d, 4);
            let z = logit_delta(&[0.2; 5], &c).unwrap();
            assert!(z.iter().all(|v| v.abs() < 1e-15));
            let u = softmax_delta(&[0.0; 4], &c).unwrap();
            assert!(u.iter().all(|v| (v - 0.2).abs() < 1e-15));
        }
    }

    #[test]
    fn worked_values() {
        let z = logit_delta(&[0.5, 0.25, 0.25], &cfg(0.0, 2)).unwrap();
        assert_abs_diff_eq!(z[0], 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(z[1], 0.0, epsilon = 1e-15);
        let s = softmax_delta(&[0.0], &cfg(1.0, 1)).unwrap();
        assert_eq!(s, vec![0.5, 0.5]);
    }

    #[test]
    fn domain_errors() {
        let c = cfg(0.1, 2);
        assert!(matches!(
            logit_delta(&[1.2, -0.1, -0.1], &c),
            Err(Error::OutsideDomain(_))
        ));
        assert!(matches!(
            logit_delta(&[0.5, 0.4, 0.3], &c),
            Err(Error::OutsideDomain(_))
        ));
        assert!(matches!(
            softmax_delta(&[f64::NAN, 0.0], &c),
            Err(Error::NonFinite(_))
        ));
        assert!(TransformConfig::new(-0.1, 2).is_err());
    }

    #[test]
    fn extended_domain_accepts_negative_components() {
        let c = cfg(0.5, 2);
        let p = [1.3, -0.2, -0.1];
        let back = softmax_delta(&logit_delta(&p, &c).unwrap(), &c).unwrap();
        for (a, b) in p.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_coordinates_do_not_overflow() {
        let c = cfg(0.0, 3);
        let s = softmax_delta(&[800.0, -900.0, 0.0], &c).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(s.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn group_operations() {
        let c = cfg(0.2, 3);
        let w = [0.1, 0.4, 0.3, 0.2];
        let u = [0.25; 4];
        let v = oplus(&w, &u, &c).unwrap();
        let one = otimes(1.0, &w, &c).unwrap();
        let zero = otimes(0.0, &w, &c).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(v[i], w[i], epsilon = 1e-12);
            assert_abs_diff_eq!(one[i], w[i], epsilon = 1e-12);
            assert_abs_diff_eq!(zero[i], 0.25, epsilon = 1e-12);
        }
        let lhs = otimes(0.7 + 1.9, &w, &c).unwrap();
        let rhs = oplus(
            &otimes(0.7, &w, &c).unwrap(),
            &otimes(1.9, &w, &c).unwrap(),
            &c,
        )
        .unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(lhs[i], rhs[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn step_basis_metric_by_hand() {
        let b = SplineBasis::new(0.0, 1.0, 0, 1).unwrap();
        let pack = MetricPack::build(&b, &cfg(0.0, 1)).unwrap();
        // e_hat = (e/(1+e), 1/(1+e)); int (2 e1 1[0,.5) + 2 e2 1[.5,1])^2 = 2(e1^2 + e2^2)
        let e = std::f64::consts::E;
        let e1 = e / (1.0 + e);
        let e2 = 1.0 / (1.0 + e);
        let expected = 2.0 * (e1 * e1 + e2 * e2);
        assert_abs_diff_eq!(pack.h()[(0, 0)], expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 1.2135, epsilon = 1e-4);
    }

    #[test]
    fn cholesky_reconstructs_metric() {
        let b = SplineBasis::new(10.0, 40.0, 3, 15).unwrap();
        let pack = MetricPack::build(&b, &cfg(1.0, 15)).unwrap();
        let kkt = pack.k() * pack.k().transpose();
        assert!((kkt - pack.h()).abs().max() < 1e-10);
        assert_eq!(pack.h(), &pack.h().transpose());
        assert!(pack.h().clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn whitening_preserves_inner_products() {
        let b = SplineBasis::new(0.0, 2.0, 2, 6).unwrap();
        let pack = MetricPack::build(&b, &cfg(0.5, 6)).unwrap();
        let u = [0.3, -1.0, 0.2, 0.9, -0.4, 0.1];
        let v = [-0.7, 0.5, 0.5, 0.1, 1.3, -0.2];
        let wu = pack.whiten_block(&u);
        let wv = pack.whiten_block(&v);
        let euclid: f64 = wu.iter().zip(&wv).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(euclid, pack.inner(&u, &v).unwrap(), epsilon = 1e-10);
        let back = pack.unwhiten_block(&wu);
        for (a, b) in back.iter().zip(&u) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(pack.inner(&u, &u).unwrap() > 0.0);
        assert_abs_diff_eq!(
            pack.inner(&u, &v).unwrap(),
            pack.inner(&v, &u).unwrap(),
            epsilon = 1e-14
        );
        assert!(matches!(
            pack.inner(&u[..3], &v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn simplex_point(raw: Vec<f64>) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn round_trips(
            raw in prop::collection::vec(0.01f64..1.0, 6),
            b in prop::collection::vec(-4.0f64..4.0, 5),
            delta in prop::sample::select(vec![0.0, 0.5, 1.0]),
        ) {
            let c = cfg(delta, 5);
            let p = simplex_point(raw);
            let back = softmax_delta(&logit_delta(&p, &c).unwrap(), &c).unwrap();
            for (x, y) in p.iter().zip(&back) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let s = softmax_delta(&b, &c).unwrap();
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            prop_assert!(s.iter().all(|v| *v > -delta));
            let bb = logit_delta(&s, &c).unwrap();
            for (x, y) in b.iter().zip(&bb) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn oplus_is_associative_and_commutative(
            a in prop::collection::vec(-2.0f64..2.0, 3),
            b in prop::collection::vec(-2.0f64..2.0, 3),
            d in prop::collection::vec(-2.0f64..2.0, 3),
            alpha in -2.0f64..2.0,
        ) {
            let c = cfg(0.3, 3);
            let (wa, wb, wd) = (
                softmax_delta(&a, &c).unwrap(),
                softmax_delta(&b, &c).unwrap(),
                softmax_delta(&d, &c).unwrap(),
            );
            let left = oplus(&oplus(&wa, &wb, &c).unwrap(), &wd, &c).unwrap();
            let right = oplus(&wa, &oplus(&wb, &wd, &c).unwrap(), &c).unwrap();
            let ab = oplus(&wa, &wb, &c).unwrap();
            let ba = oplus(&wb, &wa, &c).unwrap();
            let dist_l = otimes(alpha, &ab, &c).unwrap();
            let dist_r = oplus(&otimes(alpha, &wa, &c).unwrap(), &otimes(alpha, &wb, &c).unwrap(), &c).unwrap();
            for i in 0..4 {
                prop_assert!((left[i] - right[i]).abs() < 1e-12);
                prop_assert!((ab[i] - ba[i]).abs() < 1e-12);
                prop_assert!((dist_l[i] - dist_r[i]).abs() < 1e-12);
            }
        }
    }
}
