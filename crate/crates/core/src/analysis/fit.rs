//! Power-sweep reduction, `a x^2 + b` fits and source-parameter extraction.

use serde::Serialize;

use crate::error::{ensure_non_negative, Error, Result};
use crate::estimate::Estimate;
use crate::scalar::{from_u64, lit, Scalar};

/// Measured rates at one effective pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSweepPoint<T> {
    /// Effective pump power, W.
    pub pbar: T,
    /// cps
    pub rate_i: T,
    pub rate_s: T,
    pub rate_si_net: T,
    /// 1σ of `(rate_i, rate_s, rate_si_net)`, cps.
    pub sigma: Option<[T; 3]>,
}

impl<T: Scalar> PowerSweepPoint<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pbar", self.pbar),
            ("rate_i", self.rate_i),
            ("rate_s", self.rate_s),
        ] {
            ensure_non_negative(name, v)?;
        }
        // accidental subtraction can leave a small negative net rate
        if !self.rate_si_net.is_finite() {
            return Err(Error::invalid("rate_si_net", "must be finite"));
        }
        if let Some(s) = self.sigma {
            for v in s {
                ensure_non_negative("sigma", v)?;
            }
        }
        Ok(())
    }
}

/// Reduced observables, each `a pbar^2` in the ideal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables<T> {
    pub pbar: T,
    pub y_i: T,
    pub y_s: T,
    pub y_si: T,
    pub sigma: Option<[T; 3]>,
}

/// Detector and chip factors removed by [`reduce_observables`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reduction<T> {
    pub eta_on_i: T,
    pub eta_on_s: T,
    pub eta_nd: T,
    pub d_i: T,
    pub d_s: T,
    /// Hz
    pub rep_rate: T,
}

/// `y_i = (p_i - eta_nd d_i) / (eta_on_i eta_nd)`, `y_s = (p_s - d_s) / eta_on_s`,
/// `y_si = p_si / (eta_on_i eta_nd eta_on_s)` with `p = rate / R_p`.
pub fn reduce_observables<T: Scalar>(
    point: &PowerSweepPoint<T>,
    r: &Reduction<T>,
) -> Result<Observables<T>> {
    point.validate()?;
    for (name, v) in [
        ("eta_on_i", r.eta_on_i),
        ("eta_on_s", r.eta_on_s),
        ("eta_nd", r.eta_nd),
    ] {
        if !(v > T::zero() && v <= T::one()) {
            return Err(Error::invalid(name, "must lie in (0, 1]"));
        }
    }
    ensure_non_negative("d_i", r.d_i)?;
    ensure_non_negative("d_s", r.d_s)?;
    if !(r.rep_rate > T::zero()) {
        return Err(Error::invalid("rep_rate", "must be positive"));
    }
    let scale_i = T::one() / (r.rep_rate * r.eta_on_i * r.eta_nd);
    let scale_s = T::one() / (r.rep_rate * r.eta_on_s);
    let scale_si = T::one() / (r.rep_rate * r.eta_on_i * r.eta_nd * r.eta_on_s);
    Ok(Observables {
        pbar: point.pbar,
        y_i: (point.rate_i / r.rep_rate - r.eta_nd * r.d_i) / (r.eta_on_i * r.eta_nd),
        y_s: (point.rate_s / r.rep_rate - r.d_s) / r.eta_on_s,
        y_si: point.rate_si_net * scale_si,
        sigma: point
            .sigma
            .map(|[a, b, c]| [a * scale_i, b * scale_s, c * scale_si]),
    })
}

/// Result of fitting `y = a x^2 + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticFit<T> {
    pub a: Estimate<T>,
    pub b: Estimate<T>,
    pub cov_ab: T,
    pub chi2: T,
    pub points: usize,
    /// Whether the errors come from the supplied `σ_y`.
    pub weighted: bool,
}

/// Linear least squares in the basis `{x^2, 1}`. With `sigma` given the fit
/// is weighted by `1/σ²` and the covariance is `(XᵀWX)⁻¹`; without it, the
/// covariance is scaled by the residual variance.
pub fn quadratic_fit<T: Scalar>(x: &[T], y: &[T], sigma: Option<&[T]>) -> Result<QuadraticFit<T>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("points", "need at least 3"));
    }
    if y.len() != n || sigma.is_some_and(|s| s.len() != n) {
        return Err(Error::invalid("points", "x, y and sigma lengths differ"));
    }
    let weight = |k: usize| -> Result<T> {
        match sigma {
            Some(s) if s[k] > T::zero() => Ok(T::one() / (s[k] * s[k])),
            Some(_) => Err(Error::invalid("sigma", "must be positive")),
            None => Ok(T::one()),
        }
    };
    let (mut sw, mut sx2, mut sx4, mut sy, mut sx2y) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for k in 0..n {
        let w = weight(k)?;
        let u = x[k] * x[k];
        sw = sw + w;
        sx2 = sx2 + w * u;
        sx4 = sx4 + w * u * u;
        sy = sy + w * y[k];
        sx2y = sx2y + w * u * y[k];
    }
    let det = sx4 * sw - sx2 * sx2;
    if !(det > lit::<T>(1e-12) * sx4 * sw) {
        return Err(Error::Numerical(
            "rank-deficient design: x^2 values are not distinct".into(),
        ));
    }
    let a = (sw * sx2y - sx2 * sy) / det;
    let b = (sx4 * sy - sx2 * sx2y) / det;
    let mut chi2 = T::zero();
    for k in 0..n {
        let r = y[k] - a * x[k] * x[k] - b;
        chi2 = chi2 + weight(k)? * r * r;
    }
    let scale = if sigma.is_some() {
        T::one()
    } else if n > 2 {
        chi2 / from_u64::<T>(n as u64 - 2)
    } else {
        T::zero()
    };
    Ok(QuadraticFit {
        a: Estimate::new(a, (scale * sw / det).sqrt()),
        b: Estimate::new(b, (scale * sx4 / det).sqrt()),
        cov_ab: -scale * sx2 / det,
        chi2,
        points: n,
        weighted: sigma.is_some(),
    })
}

/// Source parameters from the three fitted quadratic coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSweepFit<T> {
    pub a_i: Estimate<T>,
    pub a_s: Estimate<T>,
    pub a_si: Estimate<T>,
    pub b_i: Estimate<T>,
    pub b_s: Estimate<T>,
    pub b_si: Estimate<T>,
    /// 1/W^2
    pub xi: Estimate<T>,
    pub eta_i_off: Estimate<T>,
    pub eta_s_off: Estimate<T>,
    /// Covariance of `(xi, eta_i_off, eta_s_off)`.
    pub covariance: [[T; 3]; 3],
}

/// `xi = a_i a_s / a_si`, `eta_i_off = a_si / a_s`, `eta_s_off = a_si / a_i`,
/// with first-order errors treating the three fits as independent.
pub fn extract_source_params<T: Scalar>(
    fit_i: &QuadraticFit<T>,
    fit_s: &QuadraticFit<T>,
    fit_si: &QuadraticFit<T>,
) -> Result<PowerSweepFit<T>> {
    let (ai, as_, asi) = (fit_i.a.value, fit_s.a.value, fit_si.a.value);
    for (name, v) in [("a_i", ai), ("a_s", as_), ("a_si", asi)] {
        if !(v > T::zero()) {
            return Err(Error::invalid(name, "fit coefficient must be positive"));
        }
    }
    // relative variances
    let ri = (fit_i.a.sigma / ai).powi(2);
    let rs = (fit_s.a.sigma / as_).powi(2);
    let rsi = (fit_si.a.sigma / asi).powi(2);
    let v = [ai * as_ / asi, asi / as_, asi / ai];
    // covariance of the logarithms
    let log_cov = [
        [ri + rs + rsi, -rs - rsi, -ri - rsi],
        [-rs - rsi, rs + rsi, rsi],
        [-ri - rsi, rsi, ri + rsi],
    ];
    let mut covariance = [[T::zero(); 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            covariance[p][q] = v[p] * v[q] * log_cov[p][q];
        }
    }
    let est = |k: usize| Estimate::new(v[k], covariance[k][k].sqrt());
    Ok(PowerSweepFit {
        a_i: fit_i.a,
        a_s: fit_s.a,
        a_si: fit_si.a,
        b_i: fit_i.b,
        b_s: fit_s.b,
        b_si: fit_si.b,
        xi: est(0),
        eta_i_off: est(1),
        eta_s_off: est(2),
        covariance,
    })
}

/// `eta_I = R_si_net / ((R_i - R_dc_i) eta_s_off)`. Values above 1 point at
/// an inconsistent calibration and are logged.
pub fn intrinsic_heralding<T: Scalar>(
    rate_si_net: T,
    rate_i: T,
    dark_rate_i: T,
    eta_s_off: T,
) -> Result<T> {
    ensure_non_negative("rate_si_net", rate_si_net)?;
    ensure_non_negative("dark_rate_i", dark_rate_i)?;
    if !(rate_i > dark_rate_i) {
        return Err(Error::invalid("rate_i", "must exceed the idler dark rate"));
    }
    if !(eta_s_off > T::zero() && eta_s_off <= T::one()) {
        return Err(Error::invalid("eta_s_off", "must lie in (0, 1]"));
    }
    let eta = rate_si_net / ((rate_i - dark_rate_i) * eta_s_off);
    if eta > T::one() {
        log::warn!("intrinsic heralding efficiency {eta} exceeds 1: calibration inconsistency");
    }
    Ok(eta)
}

/// Runs reduction, the three fits and the extraction over `points` whose
/// effective power is below `max_pbar`.
pub fn fit_power_sweep<T: Scalar>(
    points: &[PowerSweepPoint<T>],
    reduction: &Reduction<T>,
    max_pbar: Option<T>,
) -> Result<(PowerSweepFit<T>, Vec<Observables<T>>)> {
    let obs = points
        .iter()
        .filter(|p| max_pbar.is_none_or(|m| p.pbar < m))
        .map(|p| reduce_observables(p, reduction))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<T> = obs.iter().map(|o| o.pbar).collect();
    let series = |k: usize| -> (Vec<T>, Option<Vec<T>>) {
        let y = obs.iter().map(|o| [o.y_i, o.y_s, o.y_si][k]).collect();
        let s = obs
            .iter()
            .map(|o| o.sigma.map(|s| s[k]))
            .collect::<Option<Vec<T>>>();
        (y, s)
    };
    let fit = |k: usize| {
        let (y, s) = series(k);
        quadratic_fit(&x, &y, s.as_deref())
    };
    let result = extract_source_params(&fit(0)?, &fit(1)?, &fit(2)?)?;
    Ok((result, obs))
}
