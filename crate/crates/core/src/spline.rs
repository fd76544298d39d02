//! Clamped-uniform B-spline bases normalized to densities on a compact support.
//!
//! Component `j` of a basis is `phi_j(x) = B_j(x) / n_j` where `B_j` is the
//! degree-`k` B-spline on a clamped uniform knot vector and `n_j` is its
//! integral over the support. A basis with `J + 1` components has `J - k`
//! interior knots, so `J >= k` is required.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineBasis {
    support_lo: f64,
    support_hi: f64,
    degree: usize,
    num_weights: usize,
    knots: Vec<f64>,
    normalizers: Vec<f64>,
    gram: DMatrix<f64>,
}

impl SplineBasis {
    /// Builds the `J + 1` component basis of the given degree on `[lo, hi]`.
    pub fn new(support_lo: f64, support_hi: f64, degree: usize, j: usize) -> Result<Self> {
        if !(support_lo.is_finite() && support_hi.is_finite()) || support_lo >= support_hi {
            return Err(Error::InvalidRange {
                lo: support_lo,
                hi: support_hi,
            });
        }
        if j < degree {
            return Err(Error::InvalidDimension(format!(
                "J = {j} is below the degree {degree}; a clamped basis needs J >= degree"
            )));
        }
        let intervals = j - degree + 1;
        let h = (support_hi - support_lo) / intervals as f64;
        let mut knots = Vec::with_capacity(j + degree + 2);
        knots.extend(std::iter::repeat_n(support_lo, degree + 1));
        for i in 1..intervals {
            knots.push(support_lo + i as f64 * h);
        }
        knots.extend(std::iter::repeat_n(support_hi, degree + 1));

        let mut basis = SplineBasis {
            support_lo,
            support_hi,
            degree,
            num_weights: j + 1,
            knots,
            normalizers: vec![1.0; j + 1],
            gram: DMatrix::zeros(j + 1, j + 1),
        };
        basis.normalizers = basis.raw_integrals();
        basis.gram = basis.compute_gram();
        Ok(basis)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of mixture components, `J + 1`.
    pub fn num_weights(&self) -> usize {
        self.num_weights
    }

    /// Dimension `J` of the logit coordinates attached to this basis.
    pub fn dim(&self) -> usize {
        self.num_weights - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn normalizers(&self) -> &[f64] {
        &self.normalizers
    }

    /// Gram matrix `G_mn = int phi_m phi_n` of the normalized components.
    pub fn raw_gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.support_lo && x <= self.support_hi
    }

    /// Index `s` of the knot span `[t_s, t_{s+1})` holding `x`; the right
    /// endpoint is folded into the last non-empty span.
    fn span(&self, x: f64) -> usize {
        let k = self.degree;
        let last = self.num_weights - 1;
        if x >= self.knots[last + 1] {
            return last;
        }
        // knots[k..=last+1] are strictly increasing
        let mut lo = k;
        let mut hi = last + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Raw B-spline values `B_{s-k..=s}(x)` (Cox–de Boor triangle).
    fn raw_nonzero(&self, x: f64) -> (usize, Vec<f64>) {
        let k = self.degree;
        let s = self.span(x);
        let t = &self.knots;
        let mut n = vec![0.0; k + 1];
        let mut left = vec![0.0; k + 1];
        let mut right = vec![0.0; k + 1];
        n[0] = 1.0;
        for d in 1..=k {
            left[d] = x - t[s + 1 - d];
            right[d] = t[s + d] - x;
            let mut saved = 0.0;
            for r in 0..d {
                let denom = right[r + 1] + left[d - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            n[d] = saved;
        }
        (s - k, n)
    }

    /// Raw (unnormalized) B-spline values at `x` for all components.
    pub fn raw_values(&self, x: f64) -> Result<Vec<f64>> {
        self.check_support(x)?;
        let (first, vals) = self.raw_nonzero(x);
        let mut out = vec![0.0; self.num_weights];
        out[first..first + vals.len()].copy_from_slice(&vals);
        Ok(out)
    }

    /// Normalized component values `phi_j(x)` that can be nonzero at `x`,
    /// returned as `(first_index, values)`.
    pub fn nonzero_components(&self, x: f64) -> Result<(usize, Vec<f64>)> {
        self.check_support(x)?;
        let (first, mut vals) = self.raw_nonzero(x);
        for (i, v) in vals.iter_mut().enumerate() {
            *v /= self.normalizers[first + i];
        }
        Ok((first, vals))
    }

    /// All `J + 1` normalized component values at `x`.
    pub fn components(&self, x: f64) -> Result<Vec<f64>> {
        let (first, vals) = self.nonzero_components(x)?;
        let mut out = vec![0.0; self.num_weights];
        out[first..first + vals.len()].copy_from_slice(&vals);
        Ok(out)
    }

    /// Mixture density `sum_j w_j phi_j(x)`.
    pub fn eval_density(&self, weights: &[f64], x: f64) -> Result<f64> {
        if weights.len() != self.num_weights {
            return Err(Error::DimensionMismatch {
                expected: self.num_weights,
                got: weights.len(),
            });
        }
        let (first, vals) = self.nonzero_components(x)?;
        Ok(vals
            .iter()
            .enumerate()
            .map(|(i, v)| weights[first + i] * v)
            .sum())
    }

    fn check_support(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfSupport {
                x,
                lo: self.support_lo,
                hi: self.support_hi,
            })
        }
    }

    /// Non-empty knot spans `[t_s, t_{s+1}]`.
    fn spans(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.knots
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
    }

    fn nodes_per_span(&self) -> usize {
        // exact for polynomials of degree 2k + 1
        self.degree + 1
    }

    fn raw_integrals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_weights];
        for (lo, hi) in self.spans() {
            let (xs, ws) = gauss_legendre_on(self.nodes_per_span(), lo, hi);
            for (x, w) in xs.into_iter().zip(ws) {
                let (first, vals) = self.raw_nonzero(x);
                for (i, v) in vals.iter().enumerate() {
                    out[first + i] += w * v;
                }
            }
        }
        out
    }

    fn compute_gram(&self) -> DMatrix<f64> {
        let m = self.num_weights;
        let mut g = DMatrix::zeros(m, m);
        for (lo, hi) in self.spans() {
            let (xs, ws) = gauss_legendre_on(self.nodes_per_span(), lo, hi);
            for (x, w) in xs.into_iter().zip(ws) {
                let (first, mut vals) = self.raw_nonzero(x);
                for (i, v) in vals.iter_mut().enumerate() {
                    *v /= self.normalizers[first + i];
                }
                for (a, va) in vals.iter().enumerate() {
                    for (b, vb) in vals.iter().enumerate().skip(a) {
                        g[(first + a, first + b)] += w * va * vb;
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::trapezoid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cubic_fifteen_has_sixteen_components() {
        let b = SplineBasis::new(10.0, 40.0, 3, 15).unwrap();
        assert_eq!(b.num_weights(), 16);
        assert_eq!(b.knots().len(), 16 + 3 + 1);
        assert_eq!(b.support(), (10.0, 40.0));
    }

    #[test]
    fn single_constant_component_is_uniform() {
        let b = SplineBasis::new(0.0, 1.0, 0, 0).unwrap();
        assert_eq!(b.num_weights(), 1);
        for x in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(b.components(x).unwrap()[0], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn degree_zero_split_gives_steps() {
        let b = SplineBasis::new(0.0, 1.0, 0, 1).unwrap();
        assert_eq!(b.components(0.25).unwrap(), vec![2.0, 0.0]);
        assert_eq!(b.components(0.5).unwrap(), vec![0.0, 2.0]);
        assert_eq!(b.components(1.0).unwrap(), vec![0.0, 2.0]);
        assert_abs_diff_eq!(b.eval_density(&[1.0, 0.0], 0.25).unwrap(), 2.0);
        let g = b.raw_gram();
        assert_abs_diff_eq!(g[(0, 0)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(1, 1)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            SplineBasis::new(1.0, 1.0, 3, 5),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            SplineBasis::new(0.0, 1.0, 3, 2),
            Err(Error::InvalidDimension(_))
        ));
        let b = SplineBasis::new(0.0, 1.0, 2, 4).unwrap();
        assert!(matches!(
            b.eval_density(&[0.2; 5], 1.5),
            Err(Error::OutOfSupport { .. })
        ));
        assert!(matches!(
            b.eval_density(&[0.25; 4], 0.5),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partition_of_unity() {
        for (k, j) in [(0, 3), (1, 4), (2, 7), (3, 15), (4, 9)] {
            let b = SplineBasis::new(10.0, 40.0, k, j).unwrap();
            for i in 0..=997 {
                let x = 10.0 + 30.0 * i as f64 / 997.0;
                let s: f64 = b.raw_values(x).unwrap().iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "k={k} x={x} sum={s}");
            }
        }
    }

    #[test]
    fn normalizers_match_closed_form() {
        // int B_j = (t_{j+k+1} - t_j) / (k + 1)
        let b = SplineBasis::new(10.0, 40.0, 3, 15).unwrap();
        let t = b.knots();
        for (j, n) in b.normalizers().iter().enumerate() {
            let closed = (t[j + 4] - t[j]) / 4.0;
            assert_abs_diff_eq!(*n, closed, epsilon = 1e-12);
        }
    }

    #[test]
    fn components_integrate_to_one() {
        let b = SplineBasis::new(10.0, 40.0, 3, 15).unwrap();
        // higher-order composite rule per span as an independent check
        for j in 0..b.num_weights() {
            let mut total = 0.0;
            for w in b.knots().windows(2).filter(|w| w[1] > w[0]) {
                let (xs, ws) = gauss_legendre_on(12, w[0], w[1]);
                for (x, wt) in xs.into_iter().zip(ws) {
                    total += wt * b.components(x).unwrap()[j];
                }
            }
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_matches_trapezoid() {
        let b = SplineBasis::new(10.0, 40.0, 3, 15).unwrap();
        let m = b.num_weights();
        let n = 100_000;
        let h = 30.0 / (n - 1) as f64;
        let mut g = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            let x = 10.0 + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            let phi = b.components(x).unwrap();
            for a in 0..m {
                if phi[a] == 0.0 {
                    continue;
                }
                for c in 0..m {
                    g[(a, c)] += w * phi[a] * phi[c];
                }
            }
        }
        let diff = (&g - b.raw_gram()).abs().max();
        assert!(diff < 1e-6, "max diff {diff}");
        assert_eq!(b.raw_gram(), &b.raw_gram().transpose());
    }

    #[test]
    fn gram_is_psd() {
        for (k, j) in [(0, 1), (1, 5), (3, 15), (2, 3)] {
            let b = SplineBasis::new(0.0, 5.0, k, j).unwrap();
            let eig = b.raw_gram().clone().symmetric_eigenvalues();
            assert!(eig.min() >= -1e-10);
        }
    }

    #[test]
    fn uniform_mixture_integrates_to_one() {
        let b = SplineBasis::new(0.0, 3.0, 2, 6).unwrap();
        let w = vec![1.0 / 7.0; 7];
        let v = trapezoid(|x| b.eval_density(&w, x).unwrap(), 0.0, 3.0, 200_001);
        assert!((v - 1.0).abs() < 1e-8);
    }
}
