//! Heralded and unheralded second-order coherence.
//!
//! Three-fold and two-fold probabilities enumerate every combination of
//! pair photons and dark counts that can trigger the detectors, keeping only
//! first-order terms in the (small) channel efficiencies: at most one photon
//! per detector, no photon and dark count on the same detector.

use serde::Serialize;

use super::{ChannelModel, HbtSplit, SourceParams, SINGLE_PHOTON_THRESHOLD};
use crate::error::{ensure_non_negative, Error, Result};
use crate::photon_statistics::{PhotonNumberDistribution, Statistics};
use crate::scalar::{lit, Scalar};

/// The seven contributions to the idler/arm-1/arm-2 three-fold probability,
/// each already multiplied by the herald response factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeFoldTerms<T> {
    /// `E[n^2 (n-1)] eta_1 eta_2 eta_i`
    pub photons_all: T,
    /// `E[n^2] (eta_1 d_2 + d_1 eta_2) eta_i`
    pub herald_one_arm_dark_other: T,
    /// `1/2 E[n(n-1)] eta_1 eta_2 d_i`
    pub both_arms_dark_herald: T,
    /// `E[n] eta_1 d_2 d_i`
    pub arm1_only: T,
    /// `E[n] d_1 eta_2 d_i`
    pub arm2_only: T,
    /// `E[n] d_1 d_2 eta_i`
    pub herald_only: T,
    /// `d_1 d_2 d_i`
    pub darks_only: T,
}

impl<T: Scalar> ThreeFoldTerms<T> {
    pub fn as_array(&self) -> [T; 7] {
        [
            self.photons_all,
            self.herald_one_arm_dark_other,
            self.both_arms_dark_herald,
            self.arm1_only,
            self.arm2_only,
            self.herald_only,
            self.darks_only,
        ]
    }

    pub fn total(&self) -> T {
        self.as_array().into_iter().fold(T::zero(), |a, b| a + b)
    }
}

/// Contributions to the idler/arm-k two-fold probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoFoldTerms<T> {
    /// `E[n^2] eta_k eta_i`
    pub photons: T,
    /// `E[n] (eta_k d_i + d_k eta_i)`
    pub photon_and_dark: T,
    /// `d_k d_i`
    pub darks: T,
}

impl<T: Scalar> TwoFoldTerms<T> {
    pub fn total(&self) -> T {
        self.photons + self.photon_and_dark + self.darks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeraldedG2<T> {
    pub statistics: Statistics,
    pub mu: T,
    pub value: T,
    pub p_i: T,
    pub p_1i: T,
    pub p_2i: T,
    pub p_12i: T,
    pub three_fold: ThreeFoldTerms<T>,
    pub two_fold_1: TwoFoldTerms<T>,
    pub two_fold_2: TwoFoldTerms<T>,
}

impl<T: Scalar> HeraldedG2<T> {
    pub fn is_single_photon(&self) -> bool {
        self.value < lit(SINGLE_PHOTON_THRESHOLD)
    }
}

/// Per-pulse efficiencies and noise entering the three-fold model.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HbtInputs<T> {
    pub eta_i: T,
    pub eta_1: T,
    pub eta_2: T,
    pub d_i: T,
    pub d_1: T,
    pub d_2: T,
    pub nd: T,
}

impl<T: Scalar> HbtInputs<T> {
    pub(crate) fn new(
        src: &SourceParams<T>,
        pbar: T,
        arm1: &ChannelModel<T>,
        arm2: &ChannelModel<T>,
        idler: &ChannelModel<T>,
        hbt: &HbtSplit<T>,
    ) -> Result<Self> {
        src.validate()?;
        for ch in [arm1, arm2, idler] {
            ch.validate()?;
        }
        hbt.validate()?;
        let mu = src.mean_pairs(pbar)?;
        let (eta_1, eta_2) = hbt.arm_efficiencies(arm1, arm2);
        let eta_i = idler.eta_bar();
        let d_i = idler.noise_probability(src.rep_rate, pbar)?;
        Ok(Self {
            eta_i,
            eta_1,
            eta_2,
            d_i,
            d_1: arm1.noise_probability(src.rep_rate, pbar)?,
            d_2: arm2.noise_probability(src.rep_rate, pbar)?,
            nd: idler.eta_nd.factor(mu * eta_i + d_i),
        })
    }
}

pub(crate) fn evaluate<T: Scalar>(
    dist: &PhotonNumberDistribution<T>,
    x: &HbtInputs<T>,
) -> Result<HeraldedG2<T>> {
    let mean = dist.mean();
    let n2 = dist.second_moment();
    let n2n1 = dist.triple_weight();
    let nn1 = dist.factorial_moment(2)?;
    let HbtInputs {
        eta_i,
        eta_1,
        eta_2,
        d_i,
        d_1,
        d_2,
        nd,
    } = *x;

    let three_fold = ThreeFoldTerms {
        photons_all: n2n1 * eta_1 * eta_2 * eta_i * nd,
        herald_one_arm_dark_other: n2 * (eta_1 * d_2 + d_1 * eta_2) * eta_i * nd,
        both_arms_dark_herald: lit::<T>(0.5) * nn1 * eta_1 * eta_2 * d_i * nd,
        arm1_only: mean * eta_1 * d_2 * d_i * nd,
        arm2_only: mean * d_1 * eta_2 * d_i * nd,
        herald_only: mean * d_1 * d_2 * eta_i * nd,
        darks_only: d_1 * d_2 * d_i * nd,
    };
    let two_fold = |eta_k: T, d_k: T| TwoFoldTerms {
        photons: n2 * eta_k * eta_i * nd,
        photon_and_dark: mean * (eta_k * d_i + d_k * eta_i) * nd,
        darks: d_k * d_i * nd,
    };
    let two_fold_1 = two_fold(eta_1, d_1);
    let two_fold_2 = two_fold(eta_2, d_2);
    let p_i = (mean * eta_i + d_i) * nd;
    let (p_1i, p_2i, p_12i) = (two_fold_1.total(), two_fold_2.total(), three_fold.total());
    if p_1i <= T::zero() || p_2i <= T::zero() {
        return Err(Error::Undefined(
            "heralded g2: a two-fold probability is zero".into(),
        ));
    }
    Ok(HeraldedG2 {
        statistics: dist.kind(),
        mu: mean,
        value: p_12i * p_i / (p_1i * p_2i),
        p_i,
        p_1i,
        p_2i,
        p_12i,
        three_fold,
        two_fold_1,
        two_fold_2,
    })
}

/// Heralded `g2_h(0) = p_12i p_i / (p_1i p_2i)` for the source's statistics.
pub fn g2h_predicted<T: Scalar>(
    src: &SourceParams<T>,
    pbar: T,
    arm1: &ChannelModel<T>,
    arm2: &ChannelModel<T>,
    idler: &ChannelModel<T>,
    hbt: &HbtSplit<T>,
) -> Result<HeraldedG2<T>> {
    let inputs = HbtInputs::new(src, pbar, arm1, arm2, idler, hbt)?;
    evaluate(&src.distribution(pbar)?, &inputs)
}

/// `(poissonian, thermal)` predictions bounding the heralded g2.
pub fn g2h_band<T: Scalar>(
    src: &SourceParams<T>,
    pbar: T,
    arm1: &ChannelModel<T>,
    arm2: &ChannelModel<T>,
    idler: &ChannelModel<T>,
    hbt: &HbtSplit<T>,
) -> Result<(HeraldedG2<T>, HeraldedG2<T>)> {
    let inputs = HbtInputs::new(src, pbar, arm1, arm2, idler, hbt)?;
    let mu = src.mean_pairs(pbar)?;
    Ok((
        evaluate(&PhotonNumberDistribution::poisson(mu)?, &inputs)?,
        evaluate(&PhotonNumberDistribution::thermal(mu)?, &inputs)?,
    ))
}

/// Unheralded g2 of a beam carrying mean signal `s` with intrinsic
/// `g2_true`, diluted by independent poissonian noise of mean `d`:
/// `(s^2 g2_true + 2 s d + d^2) / (s + d)^2`.
pub fn g2_unheralded<T: Scalar>(s: T, d: T, g2_true: T) -> Result<T> {
    ensure_non_negative("signal", s)?;
    ensure_non_negative("noise", d)?;
    ensure_non_negative("g2_true", g2_true)?;
    let total = s + d;
    if total == T::zero() {
        return Err(Error::Undefined(
            "unheralded g2 with neither signal nor noise".into(),
        ));
    }
    Ok((s * s * g2_true + lit::<T>(2.0) * s * d + d * d) / (total * total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(mu: f64, kind: Statistics, darks: bool) -> HeraldedG2<f64> {
        let xi = 0.72;
        let pbar = (mu / xi).sqrt();
        let src = SourceParams::new(xi, 80e6, kind).unwrap();
        let (di, d1, d2) = if darks {
            (620.0, 1150.0, 1160.0)
        } else {
            (0.0, 0.0, 0.0)
        };
        let idler = ChannelModel::gated(0.8, 2.81e-3, di, 1.9e-9);
        let arm1 = ChannelModel::free_running(0.85, 3.97e-4, d1, 2e-9);
        let arm2 = ChannelModel::free_running(0.85, 3.97e-4, d2, 2e-9);
        g2h_predicted(&src, pbar, &arm1, &arm2, &idler, &HbtSplit::default()).unwrap()
    }

    #[test]
    fn low_mu_limits_without_darks() {
        let mu = 1e-3;
        let p = setup(mu, Statistics::Poisson, false);
        assert_relative_eq!(
            p.value,
            mu * (mu + 2.0) / (mu + 1.0).powi(2),
            max_relative = 1e-12
        );
        assert!((p.value - 1.9970e-3).abs() < 5e-8);
        let t = setup(mu, Statistics::Thermal, false);
        assert_relative_eq!(
            t.value,
            mu * (6.0 * mu + 4.0) / (2.0 * mu + 1.0).powi(2),
            max_relative = 1e-12
        );
        assert!((t.value - 3.9900e-3).abs() < 5e-8);
    }

    #[test]
    fn pure_noise_gives_unity() {
        let src = SourceParams::new(0.0, 80e6, Statistics::Thermal).unwrap();
        let idler = ChannelModel::gated(0.8, 2.81e-3, 620.0, 1.9e-9);
        let arm = ChannelModel::free_running(0.85, 3.97e-4, 1150.0, 2e-9);
        let g = g2h_predicted(&src, 0.3, &arm, &arm, &idler, &HbtSplit::default()).unwrap();
        assert_relative_eq!(g.value, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn undefined_without_any_two_fold() {
        let src = SourceParams::new(0.0, 80e6, Statistics::Poisson).unwrap();
        let quiet = ChannelModel::free_running(1.0, 1e-3, 0.0, 2e-9);
        let idler = ChannelModel::gated(1.0, 1e-3, 0.0, 1.9e-9);
        assert!(g2h_predicted(&src, 0.3, &quiet, &quiet, &idler, &HbtSplit::default()).is_err());
    }

    #[test]
    fn thermal_above_poisson_across_mu() {
        for k in 0..=40 {
            let mu = 10f64.powf(-4.0 + k as f64 * 0.1);
            let p = setup(mu, Statistics::Poisson, true);
            let t = setup(mu, Statistics::Thermal, true);
            assert!(t.value >= p.value, "mu={mu}");
        }
    }

    #[test]
    fn single_photon_classifier() {
        assert!(setup(0.05, Statistics::Thermal, true).is_single_photon());
        assert!(!setup(0.5, Statistics::Thermal, true).is_single_photon());
    }

    #[test]
    fn unheralded_limits() {
        assert_eq!(g2_unheralded(0.3, 0.0, 1.67).unwrap(), 1.67);
        assert_eq!(g2_unheralded(0.0, 0.2, 1.67).unwrap(), 1.0);
        assert!(g2_unheralded(0.0, 0.0, 2.0).is_err());
        let mut last = 1.0;
        for k in 1..60 {
            let s = 10f64.powf(-3.0 + k as f64 * 0.1);
            let g = g2_unheralded(s, 1.0, 1.67).unwrap();
            assert!(g > last && g < 1.67);
            last = g;
        }
    }
}
