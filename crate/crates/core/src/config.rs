//! Run configuration: one TOML document describing source, chip, detectors,
//! sweep grid, Monte Carlo and analysis settings. Unknown keys are rejected.
//!
//! All quantities are SI: W, m, s, Hz, counts/s.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic::{ChannelModel, DetectorResponse, HbtSplit, SourceParams};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::montecarlo::{ExperimentConfig, Timing, DEFAULT_BLOCK_PULSES};
use crate::waveguide::{WaveguideModel, DEFAULT_GRID_POINTS};

/// Detector channel without its on-chip efficiency, which follows from the
/// waveguide at each pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub eta_off: f64,
    /// counts/s
    pub dark_rate: f64,
    /// s
    pub window: f64,
    #[serde(default)]
    pub gated: bool,
    #[serde(default)]
    pub eta_nd: DetectorResponse<f64>,
    /// Noise probability per pulse per W of effective pump power.
    #[serde(default)]
    pub linear_noise: f64,
}

impl ChannelConfig {
    pub fn with_on_chip(&self, eta_on_avg: f64) -> ChannelModel<f64> {
        ChannelModel {
            eta_on_avg,
            eta_off: self.eta_off,
            eta_nd: self.eta_nd,
            dark_rate: self.dark_rate,
            window: self.window,
            gated: self.gated,
            linear_noise: self.linear_noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsConfig {
    pub idler: ChannelConfig,
    /// The signal detector, or the first one behind the beam splitter.
    pub signal: ChannelConfig,
    /// Second detector behind the beam splitter; defaults to `signal`.
    #[serde(default)]
    pub arm2: Option<ChannelConfig>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepModel {
    #[default]
    Analytic,
    Montecarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// On-chip peak pump powers, W.
    pub powers: Vec<f64>,
    /// Only powers below this enter the fit, W.
    #[serde(default)]
    pub fit_max_power: Option<f64>,
    #[serde(default)]
    pub model: SweepModel,
    /// Integration time per point, s. Sets the poissonian weights of
    /// analytic sweeps.
    #[serde(default = "default_integration_time")]
    pub integration_time: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_integration_time() -> f64 {
    60.0
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub pulses: u64,
    pub seed: u64,
    /// On-chip peak pump power of `simulate`, W.
    pub power: f64,
    #[serde(default = "default_block_pulses")]
    pub block_pulses: u64,
    #[serde(default)]
    pub timing: Timing,
}

fn default_block_pulses() -> u64 {
    DEFAULT_BLOCK_PULSES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Histogram bin width, s.
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    /// Histogram half range, s.
    #[serde(default = "default_span")]
    pub span: f64,
    /// Coincidence windows for CAR, s.
    #[serde(default = "default_windows")]
    pub windows: Vec<f64>,
    #[serde(default = "default_min_peaks")]
    pub min_accidental_peaks: usize,
    /// Three-fold coincidence window, also the g2 histogram bin width, s.
    #[serde(default = "default_g2h_window")]
    pub g2h_window: f64,
    /// Bins on each side of zero left out of the g2 normalisation.
    #[serde(default = "default_exclusion")]
    pub exclusion: usize,
}

fn default_bin_width() -> f64 {
    50e-12
}
fn default_span() -> f64 {
    80e-9
}
fn default_windows() -> Vec<f64> {
    vec![1.1e-9, 2e-9]
}
fn default_min_peaks() -> usize {
    crate::analysis::DEFAULT_MIN_ACCIDENTAL_PEAKS
}
fn default_g2h_window() -> f64 {
    2e-9
}
fn default_exclusion() -> usize {
    1
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            bin_width: default_bin_width(),
            span: default_span(),
            windows: default_windows(),
            min_accidental_peaks: default_min_peaks(),
            g2h_window: default_g2h_window(),
            exclusion: default_exclusion(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tag_format: TagFormat,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            output_dir: default_output_dir(),
            tag_format: TagFormat::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceParams<f64>,
    pub waveguide: WaveguideModel<f64>,
    pub channels: ChannelsConfig,
    /// Present when the signal goes through a beam splitter to two detectors.
    #[serde(default)]
    pub hbt: Option<HbtSplit<f64>>,
    pub sweep: SweepConfig,
    pub montecarlo: MonteCarloConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub io: IoConfig,
}

/// Channel models and effective pump power at one on-chip peak power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    /// On-chip peak power, W.
    pub power: f64,
    pub pbar: f64,
    pub eta_on_idler: f64,
    pub eta_on_signal: f64,
    pub idler: ChannelModel<f64>,
    pub signal: ChannelModel<f64>,
    pub arm2: ChannelModel<f64>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            match line {
                Some(line) => Error::Config(format!("line {line}: {}", e.message().trim())),
                None => Error::Config(e.message().trim().to_string()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap =
            |section: &str, r: Result<()>| r.map_err(|e| Error::Config(format!("[{section}] {e}")));
        wrap("source", self.source.validate())?;
        wrap("waveguide", self.waveguide.validate())?;
        for (name, ch) in [
            ("idler", Some(self.channels.idler)),
            ("signal", Some(self.channels.signal)),
            ("arm2", self.channels.arm2),
        ] {
            if let Some(ch) = ch {
                wrap(&format!("channels.{name}"), ch.with_on_chip(1.0).validate())?;
            }
        }
        if let Some(h) = &self.hbt {
            wrap("hbt", h.validate())?;
        }
        wrap("sweep", self.validate_sweep())?;
        wrap("montecarlo", self.validate_montecarlo())?;
        wrap("analysis", self.validate_analysis())
    }

    fn validate_sweep(&self) -> Result<()> {
        if self.sweep.powers.is_empty() {
            return Err(Error::invalid("powers", "sweep grid is empty"));
        }
        for &p in &self.sweep.powers {
            ensure_non_negative("powers", p)?;
        }
        if let Some(m) = self.sweep.fit_max_power {
            ensure_positive("fit_max_power", m)?;
        }
        ensure_positive("integration_time", self.sweep.integration_time)?;
        if self.sweep.grid_points < 2 {
            return Err(Error::invalid("grid_points", "need at least 2"));
        }
        Ok(())
    }

    fn validate_montecarlo(&self) -> Result<()> {
        let mc = &self.montecarlo;
        if mc.pulses == 0 || mc.block_pulses == 0 {
            return Err(Error::invalid(
                "pulses",
                "pulses and block_pulses must be at least 1",
            ));
        }
        ensure_non_negative("power", mc.power)?;
        ensure_non_negative("jitter_sigma", mc.timing.jitter_sigma)
    }

    fn validate_analysis(&self) -> Result<()> {
        let a = &self.analysis;
        ensure_positive("bin_width", a.bin_width)?;
        ensure_positive("span", a.span)?;
        ensure_positive("g2h_window", a.g2h_window)?;
        let half_period = 0.5 / self.source.rep_rate;
        for &w in &a.windows {
            ensure_positive("windows", w)?;
            if w > half_period {
                return Err(Error::invalid(
                    "windows",
                    "must not exceed half the repetition period",
                ));
            }
        }
        if a.span < a.bin_width {
            return Err(Error::invalid("span", "must cover at least one bin"));
        }
        Ok(())
    }

    pub fn hbt_split(&self) -> HbtSplit<f64> {
        self.hbt.unwrap_or_default()
    }

    pub fn operating_point(&self, power: f64) -> Result<OperatingPoint> {
        let wg = self.waveguide.evaluate(power, self.sweep.grid_points)?;
        let arm2 = self.channels.arm2.unwrap_or(self.channels.signal);
        Ok(OperatingPoint {
            power,
            pbar: wg.pbar,
            eta_on_idler: wg.eta_on_idler,
            eta_on_signal: wg.eta_on_signal,
            idler: self.channels.idler.with_on_chip(wg.eta_on_idler),
            signal: self.channels.signal.with_on_chip(wg.eta_on_signal),
            arm2: arm2.with_on_chip(wg.eta_on_signal),
        })
    }

    /// Monte Carlo experiment at `power` with the configured pulses, seed and
    /// timing; includes the beam splitter when `[hbt]` is present.
    pub fn experiment(&self, power: f64) -> Result<ExperimentConfig> {
        let op = self.operating_point(power)?;
        let mc = &self.montecarlo;
        let mut exp = ExperimentConfig::new(
            self.source,
            op.pbar,
            op.idler,
            op.signal,
            mc.pulses,
            mc.seed,
        );
        exp.timing = mc.timing;
        exp.block_pulses = mc.block_pulses;
        if let Some(split) = self.hbt {
            exp = exp.with_hbt(split, op.arm2);
        }
        exp.validate()?;
        Ok(exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[source]
xi = 0.72
rep_rate = 80e6
statistics = "poisson"

[waveguide]
length = 0.015
alpha_pump = 0.0
alpha_idler = 0.0
alpha_signal = 0.0
beta_tpa = 0.0
gamma_xtpa_idler = 0.0
gamma_xtpa_signal = 0.0
sigma_fca = 0.0
carrier_factor = 1.0
a_eff = 0.4e-12
pump_split = [0.5, 0.5]
pulse_width = 40e-12
rep_rate = 80e6
pump_wavelength = 1550.3e-9

[channels.idler]
eta_off = 2.81e-3
dark_rate = 620.0
window = 1.9e-9
gated = true

[channels.signal]
eta_off = 3.97e-4
dark_rate = 2150.0
window = 1.1e-9

[sweep]
powers = [0.1, 0.2, 0.3]

[montecarlo]
pulses = 1000
seed = 1
power = 0.1
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.analysis, AnalysisConfig::default());
        assert_eq!(c.io.tag_format, TagFormat::Csv);
        assert!(c.hbt.is_none());
        let op = c.operating_point(0.2).unwrap();
        assert!((op.pbar - 0.2).abs() < 1e-12);
        assert_eq!(op.idler.eta_on_avg, 1.0);
        let e = c.experiment(0.2).unwrap();
        assert_eq!(e.pulses, 1000);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = MINIMAL.replace("gated = true", "gated = true\ngate = 3");
        let err = RunConfig::from_toml_str(&text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        let line = text[..text.find("gate = 3").unwrap()].matches('\n').count() + 1;
        assert!(
            msg.contains(&format!("line {line}:")) && msg.contains("gate"),
            "{msg}"
        );
    }

    #[test]
    fn semantic_errors_name_the_section() {
        let text = MINIMAL.replace("powers = [0.1, 0.2, 0.3]", "powers = []");
        let msg = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("[sweep]"), "{msg}");
        let text = MINIMAL.replace("eta_off = 2.81e-3", "eta_off = 2.0");
        let msg = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("channels.idler"), "{msg}");
    }
}
