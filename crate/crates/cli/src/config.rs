//! TOML configuration: schema, validation, and conversion to model types.
//!
//! Frequencies given in GHz are converted to rad/ns here and nowhere else.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use spingate_core::protocol::{AmplitudeSource, ChannelConfig, DepolarizingModel, EchoTiming};
use spingate_core::{EmitterParams, PulseParams, RotationPulse};

use crate::error::CliError;

/// The reference-parameter configuration shipped with the tool.
pub const REFERENCE_CONFIG: &str = include_str!("../configs/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub emitter: EmitterSection,
    pub pulse: PulseSection,
    pub rotations: RotationSection,
    pub readout: ReadoutSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<ChannelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo: Option<EchoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSection>,
}

/// Emitter rates in ns⁻¹. Give either the four waveguide/loss rates
/// explicitly, or `linewidth` and `cyclicity` plus the loss rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1_wg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2_wg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclicity: Option<f64>,
    pub gamma1_loss: f64,
    pub gamma2_loss: f64,
    pub gamma_dephase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_h_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_h_rad_ns: Option<f64>,
    pub kappa_flip: f64,
    pub t2_star_ns: f64,
    pub beta_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_o: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_pulse_ns: Option<f64>,
    pub sigma_e: f64,
    #[serde(default)]
    pub detuning: f64,
    pub n_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSection {
    pub t_pi_ns: f64,
    pub t_pi2_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSection {
    pub fidelity_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeChoice {
    #[default]
    Spectral,
    /// Perfect mirror amplitudes r₁ = −1, r̊₁ = 0.
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "yes")]
    pub pure_dephasing: bool,
    #[serde(default = "yes")]
    pub spin_flip: bool,
    #[serde(default = "yes")]
    pub driving_dephasing: bool,
    #[serde(default = "yes")]
    pub readout_error: bool,
    #[serde(default)]
    pub amplitudes: AmplitudeChoice,
    #[serde(default)]
    pub depolarizing_model: DepolarizingModel,
}

fn yes() -> bool {
    true
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            pure_dephasing: true,
            spin_flip: true,
            driving_dephasing: true,
            readout_error: true,
            amplitudes: AmplitudeChoice::Spectral,
            depolarizing_model: DepolarizingModel::default(),
        }
    }
}

/// Ground-state precession averaged over a Gaussian Overhauser field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoSection {
    /// Time of the first scattering event.
    pub t0_ns: f64,
    /// Time of the π pulse.
    pub t_pi_ns: f64,
    /// Time of the second scattering event.
    pub t_r_ns: f64,
    /// Defaults to √2/T₂*.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    #[serde(default)]
    pub theta_p: f64,
}

/// Validated model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub emitter: EmitterParams,
    pub pulse: PulseParams,
    pub channels: ChannelConfig,
    pub theta_p: f64,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Resolves derived quantities and validates every section.
    pub fn resolve(&self) -> Result<ModelConfig, CliError> {
        let e = &self.emitter;
        let delta_h = match (e.delta_h_ghz, e.delta_h_rad_ns) {
            (Some(ghz), None) => 2.0 * PI * ghz,
            (None, Some(rad)) => rad,
            _ => {
                return Err(config_err(
                    "emitter: give exactly one of delta_h_ghz and delta_h_rad_ns",
                ))
            }
        };
        let base = match (e.gamma1_wg, e.gamma2_wg, e.linewidth, e.cyclicity) {
            (Some(g1), Some(g2), None, None) => EmitterParams {
                gamma1_wg: g1,
                gamma2_wg: g2,
                gamma1_loss: e.gamma1_loss,
                gamma2_loss: e.gamma2_loss,
                gamma_dephase: e.gamma_dephase,
                delta_h,
                ..EmitterParams::ideal(g1, delta_h)
            },
            (None, None, Some(lw), Some(c)) => EmitterParams::from_linewidth(
                lw,
                e.gamma_dephase,
                e.gamma1_loss,
                e.gamma2_loss,
                c,
                delta_h,
            ),
            _ => {
                return Err(config_err(
                    "emitter: give either gamma1_wg and gamma2_wg, or linewidth and cyclicity",
                ))
            }
        };
        let emitter = EmitterParams {
            kappa_flip: e.kappa_flip,
            t2_star: e.t2_star_ns,
            beta_factor: e.beta_factor,
            ground_recycle_rate: e.kappa_g,
            ..base
        };
        emitter.validate().map_err(|err| config_err(format!("emitter: {err}")))?;

        let p = &self.pulse;
        let pulse = match (p.sigma_o, p.t_pulse_ns) {
            (Some(s), None) => PulseParams::from_bandwidth(s, p.sigma_e, p.detuning, p.n_bar),
            (None, Some(t)) => PulseParams::from_duration(t, p.sigma_e, p.detuning, p.n_bar),
            (Some(s), Some(t)) => PulseParams {
                sigma_o: s,
                sigma_e: p.sigma_e,
                detuning: p.detuning,
                t_pulse: t,
                n_bar: p.n_bar,
            },
            (None, None) => return Err(config_err("pulse: give sigma_o or t_pulse_ns")),
        };
        pulse.validate().map_err(|err| config_err(format!("pulse: {err}")))?;

        let ch = self.channels.clone().unwrap_or_default();
        let channels = ChannelConfig {
            enable_pure_dephasing: ch.pure_dephasing,
            enable_spin_flip: ch.spin_flip,
            enable_driving_dephasing: ch.driving_dephasing,
            enable_readout_error: ch.readout_error,
            readout_fidelity: self.readout.fidelity_r,
            half_pi: RotationPulse::half_pi(self.rotations.t_pi2_ns),
            pi: RotationPulse::pi(self.rotations.t_pi_ns),
            depolarizing_model: ch.depolarizing_model,
            amplitudes: match ch.amplitudes {
                AmplitudeChoice::Spectral => AmplitudeSource::Spectral,
                AmplitudeChoice::Ideal => AmplitudeSource::ideal(),
            },
            keep_transmitted: false,
            echo: self.echo.as_ref().map(|s| {
                let mut t = EchoTiming::from_t2_star(s.t0_ns, s.t_pi_ns, s.t_r_ns, emitter.t2_star);
                if let Some(sg) = s.sigma_g {
                    t.sigma_g = sg;
                }
                t
            }),
        };
        channels
            .validate()
            .map_err(|err| config_err(format!("channels: {err}")))?;
        let theta_p = self.gate.as_ref().map(|g| g.theta_p).unwrap_or(0.0);
        if !theta_p.is_finite() {
            return Err(config_err("gate: theta_p must be finite"));
        }
        Ok(ModelConfig {
            emitter,
            pulse,
            channels,
            theta_p,
        })
    }

    /// Copy with the field at dotted `path` set to `value`.
    ///
    /// Setting one of a pair of alternative inputs (sigma_o/t_pulse_ns,
    /// delta_h_ghz/delta_h_rad_ns) drops the other.
    pub fn with_field(&self, path: &str, value: f64) -> Result<Self, CliError> {
        let unknown = || config_err(format!("unknown parameter path '{path}'"));
        let (section, key) = path.split_once('.').ok_or_else(unknown)?;
        let mut doc = toml::Value::try_from(self).expect("config converts to a TOML value");
        let root = doc.as_table_mut().expect("config is a table");
        let table = match root.get_mut(section) {
            Some(t) => t,
            None => {
                if !["channels", "echo", "gate"].contains(&section) {
                    return Err(unknown());
                }
                root.insert(section.to_string(), toml::Value::Table(Default::default()));
                root.get_mut(section).expect("just inserted")
            }
        };
        let table = table.as_table_mut().ok_or_else(unknown)?;
        let sibling = match key {
            "sigma_o" => Some("t_pulse_ns"),
            "t_pulse_ns" => Some("sigma_o"),
            "delta_h_ghz" => Some("delta_h_rad_ns"),
            "delta_h_rad_ns" => Some("delta_h_ghz"),
            _ => None,
        };
        if let Some(s) = sibling {
            table.remove(s);
        }
        let existing_is_bool = matches!(table.get(key), Some(toml::Value::Boolean(_)));
        if existing_is_bool {
            return Err(config_err(format!("parameter '{path}' is not numeric")));
        }
        table.insert(key.to_string(), toml::Value::Float(value));
        let updated: ConfigFile = doc.try_into().map_err(|_: toml::de::Error| unknown())?;
        Ok(updated)
    }
}

/// Reads and parses a config file, or the bundled reference when `path` is `None`.
pub fn load(path: Option<&std::path::Path>) -> Result<(ConfigFile, String), CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?,
        None => REFERENCE_CONFIG.to_string(),
    };
    let cfg = ConfigFile::parse(&text)?;
    Ok((cfg, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_matches_reference_emitter() {
        let cfg = ConfigFile::parse(REFERENCE_CONFIG).unwrap();
        let m = cfg.resolve().unwrap();
        let r = EmitterParams::reference();
        assert!((m.emitter.gamma1_wg - r.gamma1_wg).abs() < 1e-12);
        assert!((m.emitter.delta_h - r.delta_h).abs() < 1e-12);
        assert_eq!(m.pulse, PulseParams::reference());
        assert_eq!(m.channels, ChannelConfig::reference());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = REFERENCE_CONFIG.replace("[readout]", "[readout]\nbogus = 1.0");
        assert!(matches!(ConfigFile::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn conflicting_forms_rejected() {
        let mut cfg = ConfigFile::parse(REFERENCE_CONFIG).unwrap();
        cfg.emitter.delta_h_rad_ns = Some(40.0);
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn field_paths() {
        let cfg = ConfigFile::parse(REFERENCE_CONFIG).unwrap();
        let k = cfg.with_field("emitter.kappa_flip", 0.003).unwrap();
        assert_eq!(k.emitter.kappa_flip, 0.003);
        let s = cfg.with_field("pulse.sigma_o", 0.2).unwrap();
        assert_eq!(s.pulse.t_pulse_ns, None);
        assert!(s.resolve().is_ok());
        assert!(cfg.with_field("emitter.nonsense", 1.0).is_err());
        assert!(cfg.with_field("nowhere", 1.0).is_err());
        assert!(cfg.with_field("channels.spin_flip", 1.0).is_err());
        let t = cfg.with_field("gate.theta_p", 0.5).unwrap();
        assert_eq!(t.resolve().unwrap().theta_p, 0.5);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ConfigFile::parse(REFERENCE_CONFIG).unwrap();
        let back = ConfigFile::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }
}
