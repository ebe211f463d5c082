//! Closed-form forward model of singles, coincidences, CAR and g2.

mod heralded;
mod spectral;

pub use heralded::{
    g2_unheralded, g2h_band, g2h_predicted, HeraldedG2, ThreeFoldTerms, TwoFoldTerms,
};
pub use spectral::{filter_overlap, SINC2_HALF_WIDTH};

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, ensure_unit_interval, Error, Result};
use crate::photon_statistics::{PhotonNumberDistribution, Statistics};
use crate::scalar::{lit, Scalar};

/// Mean pair number above which the first-order detection model is suspect.
pub const LOW_GAIN_LIMIT: f64 = 0.1;

/// Heralded g2 below this value certifies single-photon emission.
pub const SINGLE_PHOTON_THRESHOLD: f64 = 0.5;

static LOW_GAIN_WARNED: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams<T> {
    /// Pair generation probability per pulse per squared peak power, 1/W^2.
    pub xi: T,
    /// Pump repetition rate, Hz.
    pub rep_rate: T,
    pub statistics: Statistics,
}

impl<T: Scalar> SourceParams<T> {
    pub fn new(xi: T, rep_rate: T, statistics: Statistics) -> Result<Self> {
        let s = Self {
            xi,
            rep_rate,
            statistics,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("xi", self.xi)?;
        ensure_positive("rep_rate", self.rep_rate)
    }

    /// `mu = xi * pbar^2`. The first value outside the low-gain regime is
    /// logged as a warning, later ones at debug level.
    pub fn mean_pairs(&self, pbar: T) -> Result<T> {
        ensure_non_negative("pbar", pbar)?;
        let mu = self.xi * pbar * pbar;
        if mu > lit(LOW_GAIN_LIMIT) {
            let level = if LOW_GAIN_WARNED.swap(true, Ordering::Relaxed) {
                log::Level::Debug
            } else {
                log::Level::Warn
            };
            log::log!(
                level,
                "mean pair number {mu} exceeds the low-gain limit {LOW_GAIN_LIMIT}"
            );
        }
        Ok(mu)
    }

    pub fn distribution(&self, pbar: T) -> Result<PhotonNumberDistribution<T>> {
        PhotonNumberDistribution::new(self.statistics, self.mean_pairs(pbar)?)
    }
}

/// Response of the herald detector relative to an ideal click detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorResponse<T> {
    Constant {
        value: T,
    },
    /// `1 / (1 + p / p_sat)` with `p` the pre-response click probability.
    Saturating {
        p_sat: T,
    },
}

impl<T: Scalar> Default for DetectorResponse<T> {
    fn default() -> Self {
        DetectorResponse::Constant { value: T::one() }
    }
}

impl<T: Scalar> DetectorResponse<T> {
    pub fn factor(&self, click_probability: T) -> T {
        match *self {
            DetectorResponse::Constant { value } => value,
            DetectorResponse::Saturating { p_sat } => {
                T::one() / (T::one() + click_probability / p_sat)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DetectorResponse::Constant { value } => ensure_unit_interval("eta_nd", value),
            DetectorResponse::Saturating { p_sat } => ensure_positive("p_sat", p_sat),
        }
    }
}

/// One detection arm: efficiency chain, detector response and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct ChannelModel<T> {
    /// Averaged on-chip survival.
    pub eta_on_avg: T,
    /// Off-chip transmission including detection efficiency.
    pub eta_off: T,
    /// Detector nonlinearity; only the herald (idler) channel applies it.
    #[serde(default)]
    pub eta_nd: DetectorResponse<T>,
    /// Dark count rate, counts/s.
    pub dark_rate: T,
    /// Detection window, s: the gate for a gated detector, the coincidence
    /// window for a free-running one.
    pub window: T,
    /// Gated detectors count darks per gate (`d = R_dc / R_p`); free-running
    /// ones accumulate poissonian darks over the window.
    #[serde(default)]
    pub gated: bool,
    /// Optional noise probability per pulse per watt of effective pump power
    /// (Raman, pump leakage). Zero by default.
    #[serde(default)]
    pub linear_noise: T,
}

impl<T: Scalar> ChannelModel<T> {
    pub fn gated(eta_on_avg: T, eta_off: T, dark_rate: T, gate: T) -> Self {
        Self {
            eta_on_avg,
            eta_off,
            eta_nd: DetectorResponse::default(),
            dark_rate,
            window: gate,
            gated: true,
            linear_noise: T::zero(),
        }
    }

    pub fn free_running(eta_on_avg: T, eta_off: T, dark_rate: T, window: T) -> Self {
        Self {
            gated: false,
            ..Self::gated(eta_on_avg, eta_off, dark_rate, window)
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_unit_interval("eta_on_avg", self.eta_on_avg)?;
        ensure_unit_interval("eta_off", self.eta_off)?;
        ensure_non_negative("dark_rate", self.dark_rate)?;
        ensure_positive("window", self.window)?;
        ensure_non_negative("linear_noise", self.linear_noise)?;
        self.eta_nd.validate()
    }

    /// `eta_on_avg * eta_off`.
    pub fn eta_bar(&self) -> T {
        self.eta_on_avg * self.eta_off
    }

    pub fn dark_probability(&self, rep_rate: T) -> Result<T> {
        if self.gated {
            dark_prob_idler(self.dark_rate, rep_rate)
        } else {
            dark_prob_signal(self.dark_rate, self.window)
        }
    }

    /// Dark plus optional pump-linear noise probability per pulse.
    pub fn noise_probability(&self, rep_rate: T, pbar: T) -> Result<T> {
        Ok(self.dark_probability(rep_rate)? + self.linear_noise * pbar)
    }
}

/// Beam splitter of the Hanbury Brown-Twiss stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtSplit<T> {
    /// Power transmission `T^2`.
    pub t2: T,
    /// Power reflection `R^2`.
    pub r2: T,
    /// Excess loss factor.
    pub eta_bs: T,
}

impl<T: Scalar> Default for HbtSplit<T> {
    fn default() -> Self {
        Self {
            t2: lit(0.5),
            r2: lit(0.5),
            eta_bs: T::one(),
        }
    }
}

impl<T: Scalar> HbtSplit<T> {
    pub fn validate(&self) -> Result<()> {
        ensure_unit_interval("t2", self.t2)?;
        ensure_unit_interval("r2", self.r2)?;
        ensure_unit_interval("eta_bs", self.eta_bs)?;
        if (self.t2 + self.r2 - T::one()).abs() > lit(1e-9) {
            return Err(Error::invalid("t2 + r2", "must equal 1"));
        }
        Ok(())
    }

    /// Efficiencies `(eta_1, eta_2)` of the transmitted and reflected arms.
    pub fn arm_efficiencies(&self, arm1: &ChannelModel<T>, arm2: &ChannelModel<T>) -> (T, T) {
        (
            arm1.eta_bar() * self.t2 * self.eta_bs,
            arm2.eta_bar() * self.r2 * self.eta_bs,
        )
    }
}

/// `d_i = R_dc / R_p` for a detector gated at the pump rate.
pub fn dark_prob_idler<T: Scalar>(dark_rate: T, rep_rate: T) -> Result<T> {
    ensure_non_negative("dark_rate", dark_rate)?;
    ensure_positive("rep_rate", rep_rate)?;
    Ok(dark_rate / rep_rate)
}

/// `d_s = 1 - exp(-R_dc * window)` for poissonian noise in a window.
pub fn dark_prob_signal<T: Scalar>(dark_rate: T, window: T) -> Result<T> {
    ensure_non_negative("dark_rate", dark_rate)?;
    ensure_positive("window", window)?;
    Ok(-(-(dark_rate * window)).exp_m1())
}

/// Per-pulse detection probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionProbabilities<T> {
    pub mu: T,
    pub p_i: T,
    pub p_s: T,
    /// Net (true) coincidences.
    pub p_si: T,
    pub p_acc: T,
}

impl<T: Scalar> DetectionProbabilities<T> {
    /// Rates in counts/s: `(R_i, R_s, R_si, R_acc)`.
    pub fn rates(&self, rep_rate: T) -> (T, T, T, T) {
        (
            self.p_i * rep_rate,
            self.p_s * rep_rate,
            self.p_si * rep_rate,
            self.p_acc * rep_rate,
        )
    }
}

pub fn detection_probabilities<T: Scalar>(
    src: &SourceParams<T>,
    pbar: T,
    idler: &ChannelModel<T>,
    signal: &ChannelModel<T>,
) -> Result<DetectionProbabilities<T>> {
    src.validate()?;
    idler.validate()?;
    signal.validate()?;
    let mu = src.mean_pairs(pbar)?;
    let d_i = idler.noise_probability(src.rep_rate, pbar)?;
    let d_s = signal.noise_probability(src.rep_rate, pbar)?;
    let eta_i = idler.eta_bar();
    let eta_s = signal.eta_bar();
    let nd = idler.eta_nd.factor(mu * eta_i + d_i);

    let p_si = mu * eta_i * eta_s * nd;
    let p_i = (mu * eta_i + d_i) * nd;
    let p_s = mu * eta_s + d_s;
    Ok(DetectionProbabilities {
        mu,
        p_i,
        p_s,
        p_si,
        p_acc: p_i * p_s,
    })
}

/// Coincidence-to-accidental ratio `p_si / (p_i p_s)`.
pub fn car<T: Scalar>(
    src: &SourceParams<T>,
    pbar: T,
    idler: &ChannelModel<T>,
    signal: &ChannelModel<T>,
) -> Result<T> {
    let p = detection_probabilities(src, pbar, idler, signal)?;
    if p.p_acc <= T::zero() {
        return Err(Error::Undefined(
            "CAR is infinite: accidental probability is zero".into(),
        ));
    }
    Ok(p.p_si / p.p_acc)
}

/// Net coincidence rate `xi pbar^2 eta_i eta_s eta_nd R_p`, counts/s.
pub fn net_coincidence_rate<T: Scalar>(
    src: &SourceParams<T>,
    pbar: T,
    idler: &ChannelModel<T>,
    signal: &ChannelModel<T>,
) -> Result<T> {
    let p = detection_probabilities(src, pbar, idler, signal)?;
    Ok(p.p_si * src.rep_rate)
}
