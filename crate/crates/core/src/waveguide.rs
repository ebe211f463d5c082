//! Pump propagation through the waveguide with linear loss, two-photon
//! absorption and free-carrier absorption, and the resulting effective pump
//! power and on-chip survival of generated photons.
//!
//! The pump obeys
//!
//! ```text
//! dP/dz = -alpha_p P - (beta_tpa / a_eff) P^2 - sigma_fca N_c(z) P
//! N_c(z) = carrier_factor * beta_tpa / (2 hbar omega_p a_eff^2) * P(z)^2 * pulse_width
//! ```
//!
//! and a photon of channel `j` born at `z` survives to the chip output with
//!
//! ```text
//! eta_j(z) = exp(-∫_z^L [alpha_j + 2 (gamma_j / a_eff) P + sigma_fca N_c] dz')
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::quadrature;
use crate::scalar::{from_u64, lit, Scalar};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default number of grid points for the fixed-step RK4 solution.
pub const DEFAULT_GRID_POINTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhotonChannel {
    Idler,
    Signal,
}

/// Waveguide geometry and loss coefficients, SI units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideModel<T> {
    /// m
    pub length: T,
    /// 1/m
    pub alpha_pump: T,
    pub alpha_idler: T,
    pub alpha_signal: T,
    /// m/W
    pub beta_tpa: T,
    pub gamma_xtpa_idler: T,
    pub gamma_xtpa_signal: T,
    /// m^2
    pub sigma_fca: T,
    /// Dimensionless scale on the quasi-static carrier density.
    pub carrier_factor: T,
    /// m^2
    pub a_eff: T,
    /// Pump fraction carried by each of the two pump modes. Only validated:
    /// the split is assumed folded into the effective coefficients.
    pub pump_split: [T; 2],
    /// s
    pub pulse_width: T,
    /// Hz
    pub rep_rate: T,
    /// m
    pub pump_wavelength: T,
}

impl<T: Scalar> WaveguideModel<T> {
    /// A loss-free waveguide of the given length; handy as a starting point.
    pub fn lossless(length: T) -> Self {
        Self {
            length,
            alpha_pump: T::zero(),
            alpha_idler: T::zero(),
            alpha_signal: T::zero(),
            beta_tpa: T::zero(),
            gamma_xtpa_idler: T::zero(),
            gamma_xtpa_signal: T::zero(),
            sigma_fca: T::zero(),
            carrier_factor: T::one(),
            a_eff: lit(0.4e-12),
            pump_split: [lit(0.5), lit(0.5)],
            pulse_width: lit(40e-12),
            rep_rate: lit(80e6),
            pump_wavelength: lit(1550.3e-9),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("length", self.length)?;
        ensure_positive("a_eff", self.a_eff)?;
        ensure_positive("pulse_width", self.pulse_width)?;
        ensure_positive("rep_rate", self.rep_rate)?;
        ensure_positive("pump_wavelength", self.pump_wavelength)?;
        for (name, v) in [
            ("alpha_pump", self.alpha_pump),
            ("alpha_idler", self.alpha_idler),
            ("alpha_signal", self.alpha_signal),
            ("beta_tpa", self.beta_tpa),
            ("gamma_xtpa_idler", self.gamma_xtpa_idler),
            ("gamma_xtpa_signal", self.gamma_xtpa_signal),
            ("sigma_fca", self.sigma_fca),
            ("carrier_factor", self.carrier_factor),
        ] {
            ensure_non_negative(name, v)?;
        }
        let [a, b] = self.pump_split;
        ensure_non_negative("pump_split", a)?;
        ensure_non_negative("pump_split", b)?;
        if (a + b - T::one()).abs() > lit(1e-9) {
            return Err(Error::invalid("pump_split", "components must sum to 1"));
        }
        Ok(())
    }

    /// Free-carrier density per squared pump power, 1/(m^3 W^2).
    pub fn carrier_density_per_w2(&self) -> T {
        let photon_energy = lit::<T>(HBAR) * lit::<T>(2.0) * T::PI() * lit::<T>(SPEED_OF_LIGHT)
            / self.pump_wavelength;
        // grouped to stay inside f32 range
        self.carrier_factor
            * (self.beta_tpa / self.a_eff)
            * (self.pulse_width / (lit::<T>(2.0) * photon_energy))
            / self.a_eff
    }

    /// `sigma_fca * N_c / P^2`, 1/(m W^2).
    fn fca_coefficient(&self) -> T {
        self.sigma_fca * self.carrier_density_per_w2()
    }

    /// Local pump attenuation `-dP/dz` at power `p`.
    fn pump_loss(&self, p: T) -> T {
        let k = self.fca_coefficient();
        self.alpha_pump * p + (self.beta_tpa / self.a_eff) * p * p + k * p * p * p
    }

    /// Local loss rate seen by a generated photon of `channel` at pump power `p`.
    pub fn photon_loss_rate(&self, channel: PhotonChannel, p: T) -> T {
        let (alpha, gamma) = match channel {
            PhotonChannel::Idler => (self.alpha_idler, self.gamma_xtpa_idler),
            PhotonChannel::Signal => (self.alpha_signal, self.gamma_xtpa_signal),
        };
        alpha + lit::<T>(2.0) * (gamma / self.a_eff) * p + self.fca_coefficient() * p * p
    }

    /// Effective pump power and averaged on-chip efficiencies for an input
    /// peak power `p0`.
    pub fn evaluate(&self, p0: T, grid_points: usize) -> Result<WaveguideSummary<T>> {
        let profile = propagate_pump(self, p0, grid_points)?;
        Ok(WaveguideSummary {
            p0,
            pbar: effective_pump_power(&profile)?,
            eta_on_idler: average_on_chip_efficiency(self, PhotonChannel::Idler, &profile)?,
            eta_on_signal: average_on_chip_efficiency(self, PhotonChannel::Signal, &profile)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveguideSummary<T> {
    pub p0: T,
    pub pbar: T,
    pub eta_on_idler: T,
    pub eta_on_signal: T,
}

/// Peak pump power sampled on a uniform grid from `z = 0` to `z = L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile<T> {
    step: T,
    power: Vec<T>,
}

impl<T: Scalar> PowerProfile<T> {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn length(&self) -> T {
        self.step * from_u64::<T>(self.power.len().saturating_sub(1) as u64)
    }

    pub fn z(&self, k: usize) -> T {
        self.step * from_u64::<T>(k as u64)
    }

    pub fn power(&self) -> &[T] {
        &self.power
    }

    pub fn input(&self) -> T {
        self.power[0]
    }

    pub fn output(&self) -> T {
        *self.power.last().expect("non-empty profile")
    }
}

/// Integrates the pump equation with classical RK4 on `grid_points` points.
pub fn propagate_pump<T: Scalar>(
    wg: &WaveguideModel<T>,
    p0: T,
    grid_points: usize,
) -> Result<PowerProfile<T>> {
    wg.validate()?;
    ensure_non_negative("p0", p0)?;
    if grid_points < 2 {
        return Err(Error::invalid("grid_points", "need at least 2"));
    }
    let h = wg.length / from_u64::<T>(grid_points as u64 - 1);
    let half = lit::<T>(0.5);
    let sixth = T::one() / lit(6.0);
    let rhs = |p: T| -wg.pump_loss(p);

    let mut power = Vec::with_capacity(grid_points);
    let mut p = p0;
    power.push(p);
    for k in 1..grid_points {
        let k1 = rhs(p);
        let k2 = rhs(p + half * h * k1);
        let k3 = rhs(p + half * h * k2);
        let k4 = rhs(p + h * k3);
        p = p + h * sixth * (k1 + lit::<T>(2.0) * (k2 + k3) + k4);
        // losses are non-negative, so any growth is integrator instability
        if !p.is_finite() || p < T::zero() || p > power[k - 1] {
            return Err(Error::Numerical(format!(
                "pump power became {p} at grid point {k}; step too coarse for the loss coefficients"
            )));
        }
        power.push(p);
    }
    Ok(PowerProfile { step: h, power })
}

/// `sqrt((1/L) ∫ P(z)^2 dz)`.
pub fn effective_pump_power<T: Scalar>(profile: &PowerProfile<T>) -> Result<T> {
    if profile.len() < 2 {
        return Err(Error::invalid("profile", "needs at least two grid points"));
    }
    let squared: Vec<T> = profile.power.iter().map(|&p| p * p).collect();
    Ok(quadrature::simpson_mean(&squared, profile.step).sqrt())
}

/// Survival probability `eta_j(z)` tabulated on the pump grid.
#[derive(Debug, Clone)]
pub struct SurvivalCurve<T> {
    step: T,
    /// ∫_0^{z_k} loss rate
    cumulative: Vec<T>,
    rate: Vec<T>,
}

impl<T: Scalar> SurvivalCurve<T> {
    pub fn new(
        wg: &WaveguideModel<T>,
        channel: PhotonChannel,
        profile: &PowerProfile<T>,
    ) -> Result<Self> {
        wg.validate()?;
        if profile.len() < 2 {
            return Err(Error::invalid("profile", "needs at least two grid points"));
        }
        let rate: Vec<T> = profile
            .power
            .iter()
            .map(|&p| wg.photon_loss_rate(channel, p))
            .collect();
        let cumulative = quadrature::cumulative(&rate, profile.step);
        Ok(Self {
            step: profile.step,
            cumulative,
            rate,
        })
    }

    fn total(&self) -> T {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn length(&self) -> T {
        self.step * from_u64::<T>(self.rate.len() as u64 - 1)
    }

    /// Values at the grid points.
    pub fn values(&self) -> Vec<T> {
        let total = self.total();
        self.cumulative.iter().map(|&c| (c - total).exp()).collect()
    }

    /// Survival for a photon born at `z`, cubic Hermite between grid points.
    pub fn at(&self, z: T) -> Result<T> {
        let length = self.length();
        if !(z >= T::zero() && z <= length) {
            return Err(Error::invalid("z", "must lie within [0, L]"));
        }
        let last = self.rate.len() - 1;
        let pos = z / self.step;
        let k = pos
            .floor()
            .to_usize()
            .unwrap_or(last)
            .min(last.saturating_sub(1));
        let t = pos - from_u64::<T>(k as u64);
        let (c0, c1) = (self.cumulative[k], self.cumulative[k + 1]);
        let (m0, m1) = (self.rate[k] * self.step, self.rate[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let c = (two * t3 - three * t2 + T::one()) * c0
            + (t3 - two * t2 + t) * m0
            + (-two * t3 + three * t2) * c1
            + (t3 - t2) * m1;
        Ok((c - self.total()).exp())
    }

    /// `(1/L) ∫_0^L eta_j(z) dz`.
    pub fn average(&self) -> T {
        quadrature::simpson_mean(&self.values(), self.step)
    }
}

/// Transmission to the chip output of a photon of `channel` generated at `z`.
pub fn photon_survival<T: Scalar>(
    wg: &WaveguideModel<T>,
    channel: PhotonChannel,
    z: T,
    profile: &PowerProfile<T>,
) -> Result<T> {
    SurvivalCurve::new(wg, channel, profile)?.at(z)
}

/// On-chip efficiency averaged over the generation point.
pub fn average_on_chip_efficiency<T: Scalar>(
    wg: &WaveguideModel<T>,
    channel: PhotonChannel,
    profile: &PowerProfile<T>,
) -> Result<T> {
    Ok(SurvivalCurve::new(wg, channel, profile)?.average())
}
