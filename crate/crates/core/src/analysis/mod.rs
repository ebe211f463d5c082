//! Estimators applied to measured or simulated data.

pub mod fit;
mod g2h;
mod histogram;

pub use fit::{
    extract_source_params, fit_power_sweep, intrinsic_heralding, quadratic_fit, reduce_observables,
    Observables, PowerSweepFit, PowerSweepPoint, QuadraticFit, Reduction,
};
pub use g2h::{g2h_from_counts, hbt_histograms, three_fold_starts, G2hResult, HbtHistograms};
pub use histogram::{
    car_from_histogram, histogram, histogram_from_times, CarResult, CoincidenceHistogram,
    DEFAULT_MIN_ACCIDENTAL_PEAKS,
};
