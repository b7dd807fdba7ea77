//! Primitive samplers: normals, multivariate normals and an alias table for
//! categorical draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{MscError, Result};
use crate::rng::RngStream;

/// Allowed deviation of a probability vector's sum from one.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[inline]
pub fn sample_std_normal(stream: &mut RngStream) -> f64 {
    stream.sample(StandardNormal)
}

pub fn std_normal_vector(stream: &mut RngStream, d: usize) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| sample_std_normal(stream)))
}

/// Draw `mean + chol_factor * z` with `z ~ N(0, I)`.
///
/// Only the lower triangle of `chol_factor` is read.
pub fn sample_mvn(
    stream: &mut RngStream,
    mean: &DVector<f64>,
    chol_factor: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let d = mean.len();
    if chol_factor.nrows() != d || chol_factor.ncols() != d {
        return Err(MscError::invalid(format!(
            "factor is {}x{}, mean has length {d}",
            chol_factor.nrows(),
            chol_factor.ncols()
        )));
    }
    if chol_factor.iter().any(|v| !v.is_finite()) {
        return Err(MscError::invalid("non-finite entry in Cholesky factor"));
    }
    let z = std_normal_vector(stream, d);
    let mut out = mean.clone();
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += chol_factor[(i, j)] * z[j];
        }
        out[i] += acc;
    }
    Ok(out)
}

/// Walker/Vose alias table: O(n) construction, O(1) per draw.
#[derive(Clone, Debug)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Build from a probability vector (nonnegative, summing to one within
    /// [`WEIGHT_SUM_TOL`]).
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(MscError::invalid("empty weight vector"));
        }
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(MscError::invalid(format!("weight {i} is {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MscError::invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self::from_unnormalized(weights, total))
    }

    fn from_unnormalized(weights: &[f64], total: f64) -> Self {
        let n = weights.len();
        let scale = n as f64 / total;
        let mut prob: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small = Vec::with_capacity(n);
        let mut large = Vec::with_capacity(n);
        for (i, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l;
            prob[l] -= 1.0 - prob[s];
            if prob[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }
        AliasTable { prob, alias }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    #[inline]
    pub fn sample(&self, stream: &mut RngStream) -> usize {
        let n = self.prob.len();
        let u = stream.uniform() * n as f64;
        let i = (u as usize).min(n - 1);
        let frac = u - i as f64;
        if frac < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// One categorical draw. Builds a throwaway table; use [`AliasTable`]
/// directly for repeated draws from the same weights.
pub fn sample_categorical(stream: &mut RngStream, weights: &[f64]) -> Result<usize> {
    Ok(AliasTable::new(weights)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn std_normal_moments() {
        let mut s = derive_stream(1, "normal", 0);
        let n = 1_000_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = sample_std_normal(&mut s);
            m1 += z;
            m2 += z * z;
        }
        let mean = m1 / n as f64;
        let var = m2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn std_normal_is_deterministic() {
        let a = sample_std_normal(&mut derive_stream(5, "n", 3));
        let b = sample_std_normal(&mut derive_stream(5, "n", 3));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn mvn_zero_factor_returns_mean() {
        let mut s = derive_stream(2, "mvn", 0);
        let mean = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let x = sample_mvn(&mut s, &mean, &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(x, mean);
    }

    #[test]
    fn mvn_identity_covariance() {
        let mut s = derive_stream(2, "mvn", 1);
        let n = 100_000;
        let mean = DVector::zeros(3);
        let eye = DMatrix::identity(3, 3);
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        let mut sum = DVector::<f64>::zeros(3);
        for _ in 0..n {
            let x = sample_mvn(&mut s, &mean, &eye).unwrap();
            cov += &x * x.transpose();
            sum += x;
        }
        let m = sum / n as f64;
        let cov = cov / n as f64 - &m * m.transpose();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 0.05, "cov[{i},{j}] = {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn mvn_scalar_scale() {
        let mut s = derive_stream(2, "mvn", 2);
        let n = 100_000;
        let f = DMatrix::from_element(1, 1, 2.0);
        let mean = DVector::zeros(1);
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_mvn(&mut s, &mean, &f).unwrap()[0];
            m1 += x;
            m2 += x * x;
        }
        let var = m2 / n as f64 - (m1 / n as f64).powi(2);
        assert!((var - 4.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn mvn_rejects_non_finite_factor() {
        let mut s = derive_stream(2, "mvn", 3);
        let mut f = DMatrix::identity(2, 2);
        f[(1, 0)] = f64::NAN;
        assert!(sample_mvn(&mut s, &DVector::zeros(2), &f).is_err());
    }

    #[test]
    fn categorical_degenerate_cases() {
        let mut s = derive_stream(3, "cat", 0);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&mut s, &[1.0]).unwrap(), 0);
        }
        let table = AliasTable::new(&[0.0, 1.0, 0.0]).unwrap();
        for _ in 0..10_000 {
            assert_eq!(table.sample(&mut s), 1);
        }
    }

    #[test]
    fn categorical_fair_coin() {
        let mut s = derive_stream(3, "cat", 1);
        let table = AliasTable::new(&[0.5, 0.5]).unwrap();
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| table.sample(&mut s) == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((0.4985..=0.5015).contains(&freq), "freq {freq}");
    }

    #[test]
    fn categorical_matches_weights() {
        let w = [0.1, 0.0, 0.25, 0.05, 0.6];
        let table = AliasTable::new(&w).unwrap();
        let mut s = derive_stream(3, "cat", 2);
        let n = 1_000_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[table.sample(&mut s)] += 1;
        }
        for (c, p) in counts.iter().zip(w) {
            let f = *c as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() <= 4.0 * sd + 1e-12, "freq {f} vs {p}");
        }
    }

    #[test]
    fn categorical_rejects_bad_weights() {
        let mut s = derive_stream(3, "cat", 3);
        assert!(sample_categorical(&mut s, &[0.5, -0.1, 0.6]).is_err());
        assert!(sample_categorical(&mut s, &[0.5, 0.4]).is_err());
        assert!(sample_categorical(&mut s, &[]).is_err());
    }
}
