use crate::error::{ensure_positive, Result};
use crate::quadrature;
use crate::scalar::{from_u64, lit, Scalar};

/// Root of `sin(u)^2 / u^2 = 1/2`; the squared sinc's half width at half maximum.
pub const SINC2_HALF_WIDTH: f64 = 1.391_557_378_251_51;

/// Fraction of a gaussian signal spectrum (FWHM `signal_fwhm`) transmitted by
/// a centred unit-peak squared-sinc filter (FWHM `filter_fwhm`). Units cancel.
pub fn filter_overlap<T: Scalar>(signal_fwhm: T, filter_fwhm: T) -> Result<T> {
    ensure_positive("signal_fwhm", signal_fwhm)?;
    ensure_positive("filter_fwhm", filter_fwhm)?;
    let two = lit::<T>(2.0);
    let sigma = signal_fwhm / (two * (two * two.ln()).sqrt());
    let kappa = two * lit::<T>(SINC2_HALF_WIDTH) / filter_fwhm;

    let half_range = lit::<T>(10.0) * signal_fwhm;
    let step_target = signal_fwhm.min(filter_fwhm) / lit(200.0);
    let intervals = ((two * half_range / step_target)
        .ceil()
        .to_u64()
        .unwrap_or(2))
    .max(2);
    let intervals = intervals + intervals % 2;
    let h = two * half_range / from_u64(intervals);

    let mut gauss = Vec::with_capacity(intervals as usize + 1);
    let mut product = Vec::with_capacity(intervals as usize + 1);
    for k in 0..=intervals {
        let x = -half_range + h * from_u64(k);
        let g = (-(x * x) / (two * sigma * sigma)).exp();
        let u = kappa * x;
        let f = if u == T::zero() {
            T::one()
        } else {
            (u.sin() / u).powi(2)
        };
        gauss.push(g);
        product.push(g * f);
    }
    Ok(quadrature::simpson(&product, h) / quadrature::simpson(&gauss, h))
}
