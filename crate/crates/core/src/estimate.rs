use serde::Serialize;

use crate::scalar::Scalar;

/// A value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T = f64> {
    pub value: T,
    pub sigma: T,
}

impl<T: Scalar> Estimate<T> {
    pub fn new(value: T, sigma: T) -> Self {
        Self { value, sigma }
    }

    pub fn exact(value: T) -> Self {
        Self::new(value, T::zero())
    }

    /// Distance to `reference` in units of `sigma`. Infinite when `sigma` is
    /// zero and the values differ.
    pub fn pull(&self, reference: T) -> T {
        let diff = (self.value - reference).abs();
        if diff == T::zero() {
            T::zero()
        } else {
            diff / self.sigma
        }
    }

    pub fn within(&self, reference: T, n_sigma: T) -> bool {
        self.pull(reference) <= n_sigma
    }
}

impl<T: Scalar> std::fmt::Display for Estimate<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ± {}", self.value, self.sigma)
    }
}

/// First-order variance `g^T C g` of a function with gradient `g` of
/// variables with covariance `C`.
pub fn propagate<const N: usize>(grad: &[f64; N], cov: &[[f64; N]; N]) -> f64 {
    let mut v = 0.0;
    for i in 0..N {
        for j in 0..N {
            v += grad[i] * cov[i][j] * grad[j];
        }
    }
    v.max(0.0)
}
