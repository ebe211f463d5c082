//! Event-level Monte Carlo of the pulsed pair source, its detectors and a
//! time tagger.
//!
//! Pulses are simulated in fixed-size blocks, each drawing from its own
//! counter-based random stream keyed by `(seed, block, purpose)`, so results
//! depend only on the seed, the pulse count and the block size, never on the
//! number of worker threads.
//!
//! Only pulses that contain an event are visited: the indices of pulses with
//! at least one detectable pair, and of pulses with a dark count, are drawn as
//! geometric gaps of Bernoulli processes. Both pair-number laws are closed
//! under thinning, so the number of detectable pairs in a visited pulse is
//! drawn from the thinned law conditioned on being non-zero.

mod conditional;
mod counts;
mod oracle;
mod streams;
mod timetags;

pub use conditional::{
    conditional_estimates, simulate_conditional, ConditionalEstimates, HeraldedEstimates,
    PairHistogram,
};
pub use counts::{simulate_counts, CountSummary};
pub use oracle::unheralded_g2_mc;
pub use timetags::simulate_timetags;

use serde::{Deserialize, Serialize};

use crate::analytic::{ChannelModel, HbtSplit, SourceParams};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::photon_statistics::PhotonNumberDistribution;

/// Pulses per random-stream block.
pub const DEFAULT_BLOCK_PULSES: u64 = 1 << 24;

/// Default gaussian tag jitter, s.
pub const DEFAULT_JITTER_SIGMA: f64 = 100e-12;

/// Arrival times relative to the pump pulse, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    /// Idler arrival, also the centre of its detection gate.
    #[serde(default)]
    pub idler_offset: f64,
    /// Arrival at the first and second signal detector.
    #[serde(default)]
    pub signal_delay: [f64; 2],
    #[serde(default = "default_jitter")]
    pub jitter_sigma: f64,
}

fn default_jitter() -> f64 {
    DEFAULT_JITTER_SIGMA
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            idler_offset: 0.0,
            signal_delay: [0.0; 2],
            jitter_sigma: DEFAULT_JITTER_SIGMA,
        }
    }
}

/// Beam splitter in front of two signal detectors. The first arm uses the
/// experiment's `signal` channel, the second `arm2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtSetup {
    pub split: HbtSplit<f64>,
    pub arm2: ChannelModel<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub source: SourceParams<f64>,
    /// Effective pump power, W.
    pub pbar: f64,
    pub idler: ChannelModel<f64>,
    pub signal: ChannelModel<f64>,
    pub hbt: Option<HbtSetup>,
    pub pulses: u64,
    pub seed: u64,
    pub timing: Timing,
    pub block_pulses: u64,
}

impl ExperimentConfig {
    pub fn new(
        source: SourceParams<f64>,
        pbar: f64,
        idler: ChannelModel<f64>,
        signal: ChannelModel<f64>,
        pulses: u64,
        seed: u64,
    ) -> Self {
        Self {
            source,
            pbar,
            idler,
            signal,
            hbt: None,
            pulses,
            seed,
            timing: Timing::default(),
            block_pulses: DEFAULT_BLOCK_PULSES,
        }
    }

    pub fn with_hbt(mut self, split: HbtSplit<f64>, arm2: ChannelModel<f64>) -> Self {
        self.hbt = Some(HbtSetup { split, arm2 });
        self
    }

    /// `1 / R_p`, s.
    pub fn rep_period(&self) -> f64 {
        1.0 / self.source.rep_rate
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        ensure_non_negative("pbar", self.pbar)?;
        self.idler.validate()?;
        self.signal.validate()?;
        if let Some(h) = &self.hbt {
            h.split.validate()?;
            h.arm2.validate()?;
        }
        if self.pulses == 0 {
            return Err(Error::invalid("pulses", "must be at least 1"));
        }
        if self.block_pulses == 0 {
            return Err(Error::invalid("block_pulses", "must be at least 1"));
        }
        ensure_non_negative("jitter_sigma", self.timing.jitter_sigma)?;
        ensure_positive("rep_period", self.rep_period())?;
        for v in [
            self.timing.idler_offset,
            self.timing.signal_delay[0],
            self.timing.signal_delay[1],
        ] {
            if !v.is_finite() {
                return Err(Error::invalid("timing", "offsets must be finite"));
            }
        }
        Ok(())
    }

    pub(crate) fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let rate = self.source.rep_rate;
        let dist = self.source.distribution(self.pbar)?;
        let eta_i = self.idler.eta_bar();
        let d_i = self.idler.noise_probability(rate, self.pbar)?;
        let (eta, noise, arm2) = match &self.hbt {
            Some(h) => {
                let (e1, e2) = h.split.arm_efficiencies(&self.signal, &h.arm2);
                let n2 = h.arm2.noise_probability(rate, self.pbar)?;
                (
                    [eta_i, e1, e2],
                    [d_i, self.signal.noise_probability(rate, self.pbar)?, n2],
                    Some(h.arm2),
                )
            }
            None => (
                [eta_i, self.signal.eta_bar(), 0.0],
                [d_i, self.signal.noise_probability(rate, self.pbar)?, 0.0],
                None,
            ),
        };
        if eta[1] + eta[2] > 1.0 {
            return Err(Error::invalid("hbt", "arm efficiencies sum above 1"));
        }
        Ok(Resolved {
            nd: self.idler.eta_nd.factor(dist.mean() * eta_i + d_i),
            dist,
            eta,
            noise,
            channels: [Some(self.idler), Some(self.signal), arm2],
        })
    }
}

/// Per-pulse probabilities derived from an [`ExperimentConfig`]. Index 0 is
/// the idler, 1 and 2 the signal detectors.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub dist: PhotonNumberDistribution<f64>,
    pub eta: [f64; 3],
    pub noise: [f64; 3],
    pub nd: f64,
    pub channels: [Option<ChannelModel<f64>>; 3],
}

impl Resolved {
    /// Probability that a pair leaves at least one photon in a detector.
    pub fn detectable(&self) -> f64 {
        let s = self.eta[1] + self.eta[2];
        self.eta[0] + s - self.eta[0] * s
    }
}

/// Half-open pulse ranges `[start, start + len)` of each block.
pub(crate) fn blocks(pulses: u64, block_pulses: u64) -> impl Iterator<Item = (u64, u64, u64)> {
    let n = pulses.div_ceil(block_pulses);
    (0..n).map(move |b| {
        let start = b * block_pulses;
        (b, start, block_pulses.min(pulses - start))
    })
}
