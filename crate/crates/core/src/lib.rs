//! Simulation and analysis of heralded single-photon pair sources.
//!
//! The closed-form parts ([`photon_statistics`], [`waveguide`], [`analytic`]
//! and the fitting routines in [`analysis::fit`]) are generic over the
//! [`Scalar`] type; the aliases below fix them to `f64`, the precision used
//! by the Monte Carlo and the tag-stream estimators.

// `!(x > 0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod analytic;
pub mod config;
pub mod error;
pub mod estimate;
pub mod montecarlo;
pub mod photon_statistics;
pub mod quadrature;
pub mod scalar;
pub mod tags;
pub mod waveguide;

pub use error::{Error, Result};
pub use estimate::Estimate;
pub use photon_statistics::Statistics;
pub use scalar::Scalar;

pub type PhotonNumberDistribution = photon_statistics::PhotonNumberDistribution<f64>;
pub type WaveguideModel = waveguide::WaveguideModel<f64>;
pub type PowerProfile = waveguide::PowerProfile<f64>;
pub type SourceParams = analytic::SourceParams<f64>;
pub type ChannelModel = analytic::ChannelModel<f64>;
pub type HbtSplit = analytic::HbtSplit<f64>;
pub type DetectorResponse = analytic::DetectorResponse<f64>;
