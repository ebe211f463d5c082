//! Quadrature on uniform grids.

use crate::scalar::{lit, Scalar};

/// Composite Simpson weights for `n` uniformly spaced samples with step `h`.
///
/// An odd number of intervals closes with Simpson's 3/8 rule on the last
/// three intervals. Two samples fall back to the trapezoid rule.
pub fn simpson_weights<T: Scalar>(n: usize, h: T) -> Vec<T> {
    assert!(n >= 2, "need at least two samples");
    let mut w = vec![T::zero(); n];
    if n == 2 {
        w[0] = h / lit(2.0);
        w[1] = h / lit(2.0);
        return w;
    }
    let intervals = n - 1;
    let simpson_end = if intervals.is_multiple_of(2) {
        n - 1
    } else {
        n - 4
    };
    let third = h / lit(3.0);
    let mut i = 0;
    while i + 2 <= simpson_end {
        w[i] = w[i] + third;
        w[i + 1] = w[i + 1] + lit::<T>(4.0) * third;
        w[i + 2] = w[i + 2] + third;
        i += 2;
    }
    if intervals % 2 == 1 {
        let s = lit::<T>(3.0) * h / lit(8.0);
        let k = n - 4;
        w[k] = w[k] + s;
        w[k + 1] = w[k + 1] + lit::<T>(3.0) * s;
        w[k + 2] = w[k + 2] + lit::<T>(3.0) * s;
        w[k + 3] = w[k + 3] + s;
    }
    w
}

pub fn simpson<T: Scalar>(values: &[T], h: T) -> T {
    simpson_weights(values.len(), h)
        .into_iter()
        .zip(values)
        .fold(T::zero(), |acc, (w, &v)| acc + w * v)
}

/// Weighted mean `sum(w f) / sum(w)`, accumulated as deviations from the
/// first sample so constant inputs come back bit-exact.
pub fn simpson_mean<T: Scalar>(values: &[T], h: T) -> T {
    let w = simpson_weights(values.len(), h);
    let base = values[0];
    let total = w.iter().fold(T::zero(), |a, &b| a + b);
    let acc = w
        .iter()
        .zip(values)
        .fold(T::zero(), |a, (&w, &v)| a + w * (v - base));
    base + acc / total
}

/// Running integral `F[k] = ∫_{x_0}^{x_k} f`, fourth-order accurate per
/// interval using the quadratic through three neighbouring samples.
pub fn cumulative<T: Scalar>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    let mut out = vec![T::zero(); n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = h * (values[0] + values[1]) / lit(2.0);
        return out;
    }
    let twelfth = h / lit(12.0);
    for k in 0..n - 1 {
        let piece = if k + 2 < n {
            twelfth * (lit::<T>(5.0) * values[k] + lit::<T>(8.0) * values[k + 1] - values[k + 2])
        } else {
            twelfth * (-values[k - 1] + lit::<T>(8.0) * values[k] + lit::<T>(5.0) * values[k + 1])
        };
        out[k + 1] = out[k] + piece;
    }
    out
}
