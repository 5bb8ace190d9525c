//! Frequency-domain scattering coefficients of the emitter and spectral
//! overlaps of a Gaussian input pulse with them.
//!
//! Detunings are measured from the vertical transition (photon frequency
//! minus transition frequency enters with the sign convention Γ + 2iδ).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{EmitterParams, PulseParams};
use crate::quadrature::{integrate, normal_nodes, QuadOptions};

/// Number of Gauss–Hermite nodes used for spectral-diffusion averages.
pub const DIFFUSION_NODES: usize = 41;

/// Half-width of the frequency window, in units of the pulse bandwidth.
const WINDOW_SIGMAS: f64 = 12.0;

/// Normalized Gaussian spectral intensity |Φ(ω)|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub center: f64,
    pub sigma: f64,
}

impl SpectralProfile {
    pub fn new(center: f64, sigma: f64) -> Self {
        Self { center, sigma }
    }

    pub fn from_pulse(pulse: &PulseParams) -> Self {
        Self::new(pulse.detuning, pulse.sigma_o)
    }

    /// |Φ(ω)|², integrating to one over the real line.
    pub fn intensity(&self, omega: f64) -> f64 {
        let z = (omega - self.center) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Interval outside which the intensity is below e^{-72} of its peak.
    pub fn window(&self) -> (f64, f64) {
        let h = WINDOW_SIGMAS * self.sigma;
        (self.center - h, self.center + h)
    }
}

/// Reflection and transmission amplitudes for both spin states at one frequency.
///
/// The unmarked fields are for the spin state resonant with the vertical
/// transition; the `_off` fields are for the other spin, detuned by Δ_h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterAmplitudes {
    pub r1: Complex64,
    pub t1: Complex64,
    pub r2: Complex64,
    pub t2: Complex64,
    pub r1_off: Complex64,
    pub t1_off: Complex64,
    pub r2_off: Complex64,
    pub t2_off: Complex64,
}

impl ScatterAmplitudes {
    /// |r₁|²+|t₁|²+|r₂|²+|t₂|², the probability the photon stays in the waveguide.
    pub fn guided_probability(&self) -> f64 {
        self.r1.norm_sqr() + self.t1.norm_sqr() + self.r2.norm_sqr() + self.t2.norm_sqr()
    }

    pub fn guided_probability_off(&self) -> f64 {
        self.r1_off.norm_sqr()
            + self.t1_off.norm_sqr()
            + self.r2_off.norm_sqr()
            + self.t2_off.norm_sqr()
    }
}

fn amplitudes(params: &EmitterParams, delta: f64) -> [Complex64; 4] {
    let gamma = params.gamma_total_deph();
    let (g1r, g1t) = params.transition1_split();
    let (g2r, g2t) = params.transition2_split();
    let denom = Complex64::new(gamma, 2.0 * delta);
    [
        -2.0 * (g1t * g1r).sqrt() / denom,
        1.0 - 2.0 * g1t / denom,
        -2.0 * (g1t * g2r).sqrt() / denom,
        -2.0 * (g1t * g2t).sqrt() / denom,
    ]
}

/// Scattering coefficients at photon detuning `delta` from the vertical transition.
///
/// The denominator uses the full linewidth including 2γ_d.
pub fn coefficients_at(params: &EmitterParams, delta: f64) -> ScatterAmplitudes {
    let [r1, t1, r2, t2] = amplitudes(params, delta);
    let [r1_off, t1_off, r2_off, t2_off] = amplitudes(params, delta + params.delta_h);
    ScatterAmplitudes {
        r1,
        t1,
        r2,
        t2,
        r1_off,
        t1_off,
        r2_off,
        t2_off,
    }
}

/// Normalized Lorentzian lineshape Γ²/(Γ²+4δ²) of the vertical transition.
pub fn lineshape(params: &EmitterParams, delta: f64) -> f64 {
    let g = params.gamma_total_deph();
    g * g / (g * g + 4.0 * delta * delta)
}

/// Pulse-averaged reflection and transmission probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapIntegrals {
    /// ∫|Φ|²|r₁|² dω.
    pub i_res: f64,
    /// ∫|Φ|²|r̊₁|² dω.
    pub i_off: f64,
    /// ∫|Φ|²|t₁|² dω.
    pub i_trans_res: f64,
    /// ∫|Φ|²|t̊₁|² dω.
    pub i_trans_off: f64,
    /// ∫|Φ|² Γ²/(Γ²+4δ²) dω, the spectral weight of resonant excitation.
    pub i_lineshape: f64,
}

/// How [`overlap_integrals`] evaluates the spectral integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMethod {
    Quadrature,
    Perturbative,
}

/// Averages a vector-valued function of the photon–transition detuning over
/// the pulse spectrum and the spectral-diffusion distribution.
///
/// `f(delta, out)` receives the detuning of the photon from the (shifted)
/// vertical transition. The inner integral is adaptive Gauss–Kronrod with
/// absolute tolerance `opts.abs_tol`; the outer average uses 41 Hermite nodes.
pub fn spectral_average<F>(
    params: &EmitterParams,
    pulse: &PulseParams,
    dim: usize,
    opts: QuadOptions,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    let profile = SpectralProfile::from_pulse(pulse);
    let (lo, hi) = profile.window();
    let mut total = vec![0.0; dim];
    for (shift, weight) in normal_nodes(DIFFUSION_NODES, pulse.sigma_e) {
        let breaks = [-shift, -shift - params.delta_h, profile.center];
        let part = integrate(
            |omega, out: &mut [f64]| {
                f(omega + shift, out);
                let w = profile.intensity(omega);
                out.iter_mut().for_each(|v| *v *= w);
            },
            lo,
            hi,
            &breaks,
            dim,
            opts,
        )?;
        for k in 0..dim {
            total[k] += weight * part[k];
        }
    }
    Ok(total)
}

/// Overlap integrals of the pulse with the reflection and transmission spectra.
pub fn overlap_integrals(
    params: &EmitterParams,
    pulse: &PulseParams,
    method: OverlapMethod,
) -> Result<OverlapIntegrals> {
    params.validate()?;
    pulse.validate()?;
    match method {
        OverlapMethod::Quadrature => {
            let v = spectral_average(params, pulse, 5, QuadOptions::default(), |delta, out| {
                let a = coefficients_at(params, delta);
                out[0] = a.r1.norm_sqr();
                out[1] = a.r1_off.norm_sqr();
                out[2] = a.t1.norm_sqr();
                out[3] = a.t1_off.norm_sqr();
                out[4] = lineshape(params, delta);
            })?;
            Ok(OverlapIntegrals {
                i_res: v[0],
                i_off: v[1],
                i_trans_res: v[2],
                i_trans_off: v[3],
                i_lineshape: v[4],
            })
        }
        OverlapMethod::Perturbative => Ok(perturbative_overlaps(params, pulse)),
    }
}

/// Leading-order overlaps for a pulse narrow compared with the linewidth.
///
/// Spectral diffusion adds its variance to the pulse variance.
fn perturbative_overlaps(params: &EmitterParams, pulse: &PulseParams) -> OverlapIntegrals {
    let gamma = params.gamma_total_deph();
    if pulse.sigma_o > gamma / 3.0 {
        log::warn!(
            "perturbative overlaps outside validity: sigma_o = {} > Gamma/3 = {}",
            pulse.sigma_o,
            gamma / 3.0
        );
    }
    if gamma > params.delta_h / 3.0 {
        log::warn!(
            "perturbative overlaps outside validity: Gamma = {} > delta_h/3 = {}",
            gamma,
            params.delta_h / 3.0
        );
    }
    let spread = 4.0 * (pulse.sigma_o.powi(2) + pulse.sigma_e.powi(2)) / (gamma * gamma);
    let peak = coefficients_at(params, 0.0);
    let r0 = peak.r1.norm_sqr();
    let t0 = peak.t1.norm_sqr();
    let off = coefficients_at(params, pulse.detuning);
    OverlapIntegrals {
        i_res: r0 - spread,
        i_off: off.r1_off.norm_sqr(),
        i_trans_res: t0 + (1.0 - t0) * spread,
        i_trans_off: off.t1_off.norm_sqr(),
        i_lineshape: 1.0 - spread,
    }
}
