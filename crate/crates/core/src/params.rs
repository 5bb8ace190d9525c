//! Emitter, pulse and rotation parameters with their invariants.
//!
//! Rates are in ns⁻¹ and splittings in rad/ns throughout. Derived
//! quantities are computed on demand from the stored fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the pulse duration / bandwidth consistency relation.
const PULSE_CONSISTENCY_TOL: f64 = 1e-9;

/// Fraction of each transition's waveguide decay going to the reflection side.
///
/// The transmission-side fraction is the complement, so the two always sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSplit {
    /// Γ₁ʳ/Γ₁ for the vertical (spin-preserving) transition.
    pub transition1_reflect: f64,
    /// Γ₂ʳ/Γ₂ for the diagonal (Raman) transition.
    pub transition2_reflect: f64,
}

impl Default for CouplingSplit {
    fn default() -> Self {
        Self {
            transition1_reflect: 0.5,
            transition2_reflect: 0.5,
        }
    }
}

/// Rates and splittings of the four-level emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Waveguide decay rate of the vertical transition (Γ₁).
    pub gamma1_wg: f64,
    /// Waveguide decay rate of the diagonal transition (Γ₂).
    pub gamma2_wg: f64,
    /// Loss rate of the vertical transition into non-guided modes (γ₁).
    pub gamma1_loss: f64,
    /// Loss rate of the diagonal transition into non-guided modes (γ₂).
    pub gamma2_loss: f64,
    /// Pure dephasing rate of the optical transition (γ_d).
    pub gamma_dephase: f64,
    /// Ground-state splitting in rad/ns (Δ_h).
    pub delta_h: f64,
    /// Incoherent spin-flip rate (κ).
    pub kappa_flip: f64,
    /// Spin inhomogeneous dephasing time in ns (T₂*).
    pub t2_star: f64,
    /// Fraction of emission captured by the waveguide mode.
    pub beta_factor: f64,
    pub coupling_split: CouplingSplit,
    /// Ground-state recycle rate; recorded for validity checks only.
    pub ground_recycle_rate: Option<f64>,
}

impl EmitterParams {
    /// Builds an emitter from its measured linewidth and transition cyclicity.
    ///
    /// `gamma_total_deph` is the full linewidth Γ₁+Γ₂+γ₁+γ₂+2γ_d and
    /// `cyclicity` is (Γ₁+γ₁)/(Γ₂+γ₂). The remaining fields take neutral
    /// values: no spin flips, effectively infinite T₂*, unit β-factor.
    pub fn from_linewidth(
        gamma_total_deph: f64,
        gamma_dephase: f64,
        gamma1_loss: f64,
        gamma2_loss: f64,
        cyclicity: f64,
        delta_h: f64,
    ) -> Self {
        let gamma_rad = gamma_total_deph - 2.0 * gamma_dephase;
        let branch1 = gamma_rad * cyclicity / (cyclicity + 1.0);
        let branch2 = gamma_rad / (cyclicity + 1.0);
        Self {
            gamma1_wg: branch1 - gamma1_loss,
            gamma2_wg: branch2 - gamma2_loss,
            gamma1_loss,
            gamma2_loss,
            gamma_dephase,
            delta_h,
            kappa_flip: 0.0,
            t2_star: 1e12,
            beta_factor: 1.0,
            coupling_split: CouplingSplit::default(),
            ground_recycle_rate: None,
        }
    }

    /// The quantum-dot parameter set of the reference experiment.
    ///
    /// Linewidth 2.48 ns⁻¹, γ_d = 0.092 ns⁻¹, γ₁ = γ₂ = 0.05 ns⁻¹ (estimates),
    /// cyclicity 14.7, Δ_h = 2π·7.3 GHz, κ = 0.021 ns⁻¹, T₂* = 23.2 ns,
    /// β-factor 0.95.
    pub fn reference() -> Self {
        Self {
            kappa_flip: 0.021,
            t2_star: 23.2,
            beta_factor: 0.95,
            ..Self::from_linewidth(2.48, 0.092, 0.05, 0.05, 14.7, 2.0 * PI * 7.3)
        }
    }

    /// A lossless, dephasing-free two-level mirror: Γ₁ = Γ, everything else zero.
    pub fn ideal(gamma: f64, delta_h: f64) -> Self {
        Self {
            gamma1_wg: gamma,
            gamma2_wg: 0.0,
            gamma1_loss: 0.0,
            gamma2_loss: 0.0,
            gamma_dephase: 0.0,
            delta_h,
            kappa_flip: 0.0,
            t2_star: 1e12,
            beta_factor: 1.0,
            coupling_split: CouplingSplit::default(),
            ground_recycle_rate: None,
        }
    }

    /// Γ₁+Γ₂+γ₁+γ₂.
    pub fn gamma_total_rad(&self) -> f64 {
        self.gamma1_wg + self.gamma2_wg + self.gamma1_loss + self.gamma2_loss
    }

    /// Γ₁+Γ₂+γ₁+γ₂+2γ_d, the measured homogeneous linewidth.
    pub fn gamma_total_deph(&self) -> f64 {
        self.gamma_total_rad() + 2.0 * self.gamma_dephase
    }

    /// (Γ₁+γ₁)/(Γ₂+γ₂); infinite when the diagonal transition is absent.
    pub fn cyclicity_transition(&self) -> f64 {
        (self.gamma1_wg + self.gamma1_loss) / (self.gamma2_wg + self.gamma2_loss)
    }

    /// (Γ₁+Γ₂)/(γ₁+γ₂); infinite for a lossless emitter.
    pub fn cyclicity_channel(&self) -> f64 {
        (self.gamma1_wg + self.gamma2_wg) / (self.gamma1_loss + self.gamma2_loss)
    }

    /// Reflection-side and transmission-side rates (Γ₁ʳ, Γ₁ᵗ).
    pub fn transition1_split(&self) -> (f64, f64) {
        let f = self.coupling_split.transition1_reflect;
        (self.gamma1_wg * f, self.gamma1_wg * (1.0 - f))
    }

    /// Reflection-side and transmission-side rates (Γ₂ʳ, Γ₂ᵗ).
    pub fn transition2_split(&self) -> (f64, f64) {
        let f = self.coupling_split.transition2_reflect;
        (self.gamma2_wg * f, self.gamma2_wg * (1.0 - f))
    }

    /// Checks every invariant, reporting the first one violated.
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma1_wg", self.gamma1_wg),
            ("gamma2_wg", self.gamma2_wg),
            ("gamma1_loss", self.gamma1_loss),
            ("gamma2_loss", self.gamma2_loss),
            ("gamma_dephase", self.gamma_dephase),
            ("kappa_flip", self.kappa_flip),
        ];
        for (field, value) in rates {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(field, value, "must be a finite rate >= 0"));
            }
        }
        let total = self.gamma_total_rad();
        if total <= 0.0 {
            return Err(Error::invalid(
                "gamma_total_rad",
                total,
                "gamma_total_rad must be positive",
            ));
        }
        if !self.delta_h.is_finite() || self.delta_h <= 0.0 {
            return Err(Error::invalid("delta_h", self.delta_h, "must be positive"));
        }
        if !self.t2_star.is_finite() || self.t2_star <= 0.0 {
            return Err(Error::invalid("t2_star", self.t2_star, "must be positive"));
        }
        if !(self.beta_factor > 0.0 && self.beta_factor <= 1.0) {
            return Err(Error::invalid(
                "beta_factor",
                self.beta_factor,
                "must lie in (0, 1]",
            ));
        }
        for (field, value) in [
            ("coupling_split.transition1_reflect", self.coupling_split.transition1_reflect),
            ("coupling_split.transition2_reflect", self.coupling_split.transition2_reflect),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(field, value, "must lie in [0, 1]"));
            }
        }
        if let Some(k) = self.ground_recycle_rate {
            if !k.is_finite() || k < 0.0 {
                return Err(Error::invalid("ground_recycle_rate", k, "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Incident pulse shape, detuning and photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// Gaussian spectral standard deviation of the pulse (σ_o), rad/ns.
    pub sigma_o: f64,
    /// Spectral-diffusion standard deviation of the transition (σ_e), rad/ns.
    pub sigma_e: f64,
    /// Carrier detuning from the vertical transition (δ₁), rad/ns.
    pub detuning: f64,
    /// Pulse duration T_p in ns.
    pub t_pulse: f64,
    /// Mean photon number per pulse.
    pub n_bar: f64,
}

impl PulseParams {
    /// Pulse with duration set by the bandwidth, T_p = 1/(2σ_o).
    pub fn from_bandwidth(sigma_o: f64, sigma_e: f64, detuning: f64, n_bar: f64) -> Self {
        Self {
            sigma_o,
            sigma_e,
            detuning,
            t_pulse: 1.0 / (2.0 * sigma_o),
            n_bar,
        }
    }

    /// Pulse with bandwidth set by the duration, σ_o = 1/(2T_p).
    pub fn from_duration(t_pulse: f64, sigma_e: f64, detuning: f64, n_bar: f64) -> Self {
        Self {
            sigma_o: 1.0 / (2.0 * t_pulse),
            sigma_e,
            detuning,
            t_pulse,
            n_bar,
        }
    }

    /// The 2 ns pulse of the reference experiment with σ_e = 0.3 ns⁻¹ and n̄ = 0.0732.
    pub fn reference() -> Self {
        Self::from_duration(2.0, 0.3, 0.0, 0.0732)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_o.is_finite() || self.sigma_o <= 0.0 {
            return Err(Error::invalid("sigma_o", self.sigma_o, "must be positive"));
        }
        if !self.sigma_e.is_finite() || self.sigma_e < 0.0 {
            return Err(Error::invalid("sigma_e", self.sigma_e, "must be >= 0"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", self.detuning, "must be finite"));
        }
        if !self.t_pulse.is_finite() || self.t_pulse <= 0.0 {
            return Err(Error::invalid("t_pulse", self.t_pulse, "must be positive"));
        }
        if !self.n_bar.is_finite() || self.n_bar < 0.0 {
            return Err(Error::invalid("n_bar", self.n_bar, "must be >= 0"));
        }
        let product = 2.0 * self.sigma_o * self.t_pulse;
        if (product - 1.0).abs() > PULSE_CONSISTENCY_TOL {
            return Err(Error::invalid(
                "t_pulse",
                self.t_pulse,
                format!("inconsistent with sigma_o = {} (requires t_pulse = 1/(2 sigma_o))", self.sigma_o),
            ));
        }
        Ok(())
    }
}

/// Equatorial rotation axis of a spin pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// A resonant spin rotation pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationPulse {
    pub axis: Axis,
    /// Rotation angle in radians.
    pub angle: f64,
    /// Extra equatorial phase added to the axis, radians.
    pub phase: f64,
    /// Pulse duration T_r in ns.
    pub duration: f64,
}

impl RotationPulse {
    pub fn new(axis: Axis, angle: f64, duration: f64) -> Self {
        Self {
            axis,
            angle,
            phase: 0.0,
            duration,
        }
    }

    /// A y-axis π/2 pulse.
    pub fn half_pi(duration: f64) -> Self {
        Self::new(Axis::Y, PI / 2.0, duration)
    }

    /// A y-axis π pulse.
    pub fn pi(duration: f64) -> Self {
        Self::new(Axis::Y, PI, duration)
    }

    /// Rabi frequency Ω = angle / duration.
    pub fn rabi(&self) -> f64 {
        self.angle / self.duration
    }

    /// Azimuth of the rotation axis in the equatorial plane.
    pub fn azimuth(&self) -> f64 {
        let base = match self.axis {
            Axis::X => 0.0,
            Axis::Y => PI / 2.0,
        };
        base + self.phase
    }

    pub fn validate(&self) -> Result<()> {
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return Err(Error::invalid("duration", self.duration, "must be positive"));
        }
        if !self.angle.is_finite() {
            return Err(Error::invalid("angle", self.angle, "must be finite"));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase", self.phase, "must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclicity_from_rates() {
        let p = EmitterParams {
            gamma1_wg: 2.32,
            gamma2_wg: 0.158,
            gamma1_loss: 0.0,
            gamma2_loss: 0.0,
            ..EmitterParams::reference()
        };
        assert!((p.cyclicity_transition() - 2.32 / 0.158).abs() < 1e-12);
        assert!((p.cyclicity_transition() - 14.7).abs() < 0.02);
    }

    #[test]
    fn zero_rates_rejected() {
        let p = EmitterParams {
            gamma1_wg: 0.0,
            gamma2_wg: 0.0,
            gamma1_loss: 0.0,
            gamma2_loss: 0.0,
            gamma_dephase: 0.0,
            ..EmitterParams::reference()
        };
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("gamma_total_rad must be positive"));
    }

    #[test]
    fn reference_linewidth_and_splitting() {
        let p = EmitterParams::reference();
        p.validate().unwrap();
        assert!((p.gamma_total_deph() - 2.48).abs() < 1e-12);
        assert!((p.delta_h - 2.0 * PI * 7.3).abs() < 1e-12);
        assert!((p.cyclicity_transition() - 14.7).abs() < 1e-12);
    }

    #[test]
    fn negative_rate_names_field() {
        let p = EmitterParams {
            gamma2_loss: -0.1,
            ..EmitterParams::reference()
        };
        match p.validate().unwrap_err() {
            Error::InvalidParameter { field, value, .. } => {
                assert_eq!(field, "gamma2_loss");
                assert_eq!(value, -0.1);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn pulse_consistency() {
        PulseParams::reference().validate().unwrap();
        assert!((PulseParams::reference().sigma_o - 0.25).abs() < 1e-15);
        let bad = PulseParams {
            t_pulse: 3.0,
            ..PulseParams::reference()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rotation_rabi() {
        let p = RotationPulse::pi(7.0);
        assert!((p.rabi() * p.duration - PI).abs() < 1e-15);
        assert!(RotationPulse::pi(0.0).validate().is_err());
    }
}
