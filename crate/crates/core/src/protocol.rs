//! The heralded gate sequence R(π/2) → S_e → R(π) → S_l with its error
//! channels, evaluated on the joint spin–photon density matrix.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{EmitterParams, PulseParams, RotationPulse};
use crate::quadrature::{normal_nodes, QuadOptions};
use crate::scattering::{coefficients_at, lineshape, spectral_average};
use crate::state::{
    joint_index, kron, on_spin, pauli_x, pauli_y, time_bin_qubit, trace_spin, CMatrix2, CMatrix4,
    JointDensity, Spin, SpinDensity, TimeBin,
};

/// Number of Gauss–Hermite nodes for the Overhauser-field average.
const ECHO_NODES: usize = 41;

/// How the incoherent spin flip acts on the joint state during a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DepolarizingModel {
    /// Flip term p·ρ_p⊗I/2 built from the input photonic qubit, applied
    /// blockwise as in the closed-form error propagation. Not trace
    /// preserving once heralding has removed weight from the state.
    #[default]
    Blockwise,
    /// Flip term p·Tr_s(ρ)⊗I/2, a completely positive trace-preserving channel.
    TracePreserving,
}

/// Coherent error branch of an imperfect rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorBranch {
    /// The pulse rotates by the opposite angle (maps |↓⟩ to |−⟩ for a π/2 pulse).
    ReverseRotation,
    /// The pulse fails and leaves the spin unchanged.
    Identity,
}

impl ErrorBranch {
    /// π pulses fail to the identity; every other angle to the reverse rotation.
    pub fn for_pulse(pulse: &RotationPulse) -> Self {
        if (pulse.angle.abs() - PI).abs() < 1e-9 {
            ErrorBranch::Identity
        } else {
            ErrorBranch::ReverseRotation
        }
    }
}

/// Unitary of a rotation by `angle` about the equatorial axis at `azimuth`.
///
/// Uses the logical Pauli operators, so a y rotation by π/2 maps |↓⟩ to (|↑⟩+|↓⟩)/√2.
pub fn rotation_unitary(angle: f64, azimuth: f64) -> CMatrix2 {
    let c = Complex64::new((angle / 2.0).cos(), 0.0);
    let s = Complex64::new(0.0, -(angle / 2.0).sin());
    let gen = pauli_x() * Complex64::new(azimuth.cos(), 0.0)
        + pauli_y() * Complex64::new(azimuth.sin(), 0.0);
    CMatrix2::identity() * c + gen * s
}

fn pulse_unitary(pulse: &RotationPulse) -> CMatrix2 {
    rotation_unitary(pulse.angle, pulse.azimuth())
}

fn error_unitary(pulse: &RotationPulse) -> CMatrix2 {
    match ErrorBranch::for_pulse(pulse) {
        ErrorBranch::ReverseRotation => rotation_unitary(-pulse.angle, pulse.azimuth()),
        ErrorBranch::Identity => CMatrix2::identity(),
    }
}

/// Error-free rotation of a spin state.
pub fn ideal_rotation(spin: &SpinDensity, pulse: &RotationPulse) -> SpinDensity {
    spin.conjugate_by(&pulse_unitary(pulse))
}

/// Flip probability and coherent fidelity of one rotation pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationNoise {
    /// p = 1 − exp(−κT_r).
    pub flip_prob: f64,
    /// F = 1 − (2/π²)(T_r/T₂*)².
    pub coherent_fidelity: f64,
}

impl RotationNoise {
    pub fn none() -> Self {
        Self {
            flip_prob: 0.0,
            coherent_fidelity: 1.0,
        }
    }
}

/// Flip probability and coherent fidelity for `pulse` given the emitter's κ and T₂*.
pub fn rotation_noise(pulse: &RotationPulse, params: &EmitterParams) -> Result<RotationNoise> {
    pulse.validate()?;
    let ratio = pulse.duration / params.t2_star;
    if ratio > PI / 2f64.sqrt() {
        return Err(Error::RotationOutsideModel { ratio });
    }
    Ok(RotationNoise {
        flip_prob: 1.0 - (-params.kappa_flip * pulse.duration).exp(),
        coherent_fidelity: 1.0 - 2.0 / (PI * PI) * ratio * ratio,
    })
}

/// Rotation with incoherent spin flips and finite coherent fidelity.
///
/// E(ρ) = (1−p)(F·RρR† + (1−F)·ρ_err) + (p/2)·Tr(ρ)·I.
pub fn depolarizing_rotation(
    spin: &SpinDensity,
    pulse: &RotationPulse,
    params: &EmitterParams,
) -> Result<SpinDensity> {
    let noise = rotation_noise(pulse, params)?;
    let good = spin.conjugate_by(&pulse_unitary(pulse));
    let bad = spin.conjugate_by(&error_unitary(pulse));
    let (p, f) = (noise.flip_prob, noise.coherent_fidelity);
    let m = (good.matrix() * Complex64::new(f, 0.0) + bad.matrix() * Complex64::new(1.0 - f, 0.0))
        * Complex64::new(1.0 - p, 0.0)
        + CMatrix2::identity() * Complex64::new(0.5 * p * spin.trace(), 0.0);
    Ok(SpinDensity::new_unchecked(m))
}

/// Total fidelity of a rotation, (1−p)F + p/2.
pub fn rotation_fidelity_total(pulse: &RotationPulse, params: &EmitterParams) -> Result<f64> {
    let n = rotation_noise(pulse, params)?;
    Ok((1.0 - n.flip_prob) * n.coherent_fidelity + 0.5 * n.flip_prob)
}

/// Closed-form gate fidelity with perfect scattering (r₁ = 1, r̊₁ = 0) and
/// only rotation errors present.
pub fn spin_flip_fidelity(kappa: f64, t2_star: f64, t_pi: f64, t_half_pi: f64) -> f64 {
    let a = (t_pi / t2_star).powi(2);
    let b = (t_half_pi / t2_star).powi(2);
    let pi2 = PI * PI;
    let num = 1.0 - (-kappa * t_pi).exp() * a / pi2
        + (-kappa * (t_pi + t_half_pi)).exp() * (1.0 - 2.0 * a / pi2) * (1.0 - 4.0 * b / pi2);
    num / (3.0 - (-kappa * t_pi).exp())
}

/// First-order expansion 1 − (5π/4)(κ/Ω) − (3/2)/(Ω²T₂*²) with Ω = π/T_π.
pub fn spin_flip_fidelity_linear(kappa: f64, t2_star: f64, t_pi: f64) -> f64 {
    let omega = PI / t_pi;
    1.0 - 1.25 * PI * kappa / omega - 1.5 / (omega * omega * t2_star * t2_star)
}

/// Multiplies every spin coherence by (1 − p_d).
pub fn phase_damping(rho: &JointDensity, p_d: f64) -> JointDensity {
    JointDensity::new_unchecked(damp(rho.matrix(), p_d), rho.is_normalized())
}

fn damp(m: &CMatrix4, p_d: f64) -> CMatrix4 {
    let keep = 1.0 - p_d;
    CMatrix4::from_fn(|i, j| if i % 2 == j % 2 { m[(i, j)] } else { m[(i, j)] * keep })
}

/// Spin readout that reports the opposite outcome with probability 1 − F_R.
pub fn readout_error(rho: &JointDensity, f_r: f64) -> JointDensity {
    JointDensity::new_unchecked(readout(rho.matrix(), f_r), rho.is_normalized())
}

fn readout(m: &CMatrix4, f_r: f64) -> CMatrix4 {
    let x = on_spin(&pauli_x());
    m * Complex64::new(f_r, 0.0) + x * m * x * Complex64::new(1.0 - f_r, 0.0)
}

/// Success probability of scattering a resonant photon, P_{ω₁}+P_{ω₂}, to
/// first order in the loss rates, for an explicit cyclicity `c`.
pub fn scattering_success(gamma: f64, gamma1_loss: f64, gamma2_loss: f64, c: f64) -> f64 {
    let branch = 1.0 - inv_c1(c) - gamma1_loss / gamma;
    1.0 - 2.0 * ((gamma1_loss + gamma2_loss) / gamma) * branch
}

fn inv_c1(c: f64) -> f64 {
    if c.is_infinite() {
        0.0
    } else {
        1.0 / (c + 1.0)
    }
}

/// Dephasing probability per scattering step, 1 − exp[−n̄(P_{ω₁}+P_{ω₂})].
///
/// Uses the linewidth with dephasing and the transition cyclicity, so that
/// 1 − 1/(C+1) − γ₁/Γ tracks the vertical branching ratio.
pub fn driving_dephasing_prob(pulse: &PulseParams, params: &EmitterParams) -> f64 {
    let p = scattering_success(
        params.gamma_total_deph(),
        params.gamma1_loss,
        params.gamma2_loss,
        params.cyclicity_transition(),
    );
    1.0 - (-pulse.n_bar * p).exp()
}

/// Fidelity under driving-induced dephasing alone, ½[1 + exp(−2n̄(P_{ω₁}+P_{ω₂}))].
pub fn driving_dephasing_fidelity(n_bar: f64, scattering_success: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * n_bar * scattering_success).exp())
}

/// Probability that a resonant photon is scattered incoherently after a
/// dephasing-induced jump, for an explicit cyclicity `c`.
///
/// P = (2γ_d/Γ)(1 − 1/(C+1) − γ₁/Γ)[(1 − 1/(C+1))(1 − 2γ_d/Γ) − γ₁/Γ].
pub fn dephasing_jump_probability(gamma: f64, gamma_dephase: f64, gamma1_loss: f64, c: f64) -> f64 {
    let ic = inv_c1(c);
    let x = 2.0 * gamma_dephase / gamma;
    let l = gamma1_loss / gamma;
    x * (1.0 - ic - l) * ((1.0 - ic) * (1.0 - x) - l)
}

/// [`dephasing_jump_probability`] evaluated for an emitter.
pub fn dephasing_jump_probability_for(params: &EmitterParams) -> f64 {
    dephasing_jump_probability(
        params.gamma_total_deph(),
        params.gamma_dephase,
        params.gamma1_loss,
        params.cyclicity_transition(),
    )
}

/// Incoherent populations added to the heralded state by pure dephasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingInjection {
    /// Jump probability P^{ω₁}_{γ_d}.
    pub jump_prob: f64,
    /// Weight ½|α|²P placed on |e↓⟩ (early photon, spin flipped by the echo pulse).
    pub early: f64,
    /// Weight ½|β|²P placed on |l↑⟩.
    pub late: f64,
}

impl DephasingInjection {
    /// Diagonal additive matrix over {e↑, e↓, l↑, l↓}.
    pub fn matrix(&self) -> CMatrix4 {
        let mut m = CMatrix4::zeros();
        let e = joint_index(TimeBin::Early, Spin::Down);
        let l = joint_index(TimeBin::Late, Spin::Up);
        m[(e, e)] = Complex64::new(self.early, 0.0);
        m[(l, l)] = Complex64::new(self.late, 0.0);
        m
    }
}

/// Closed-form dephasing terms for photonic weights |α|², |β|².
pub fn pure_dephasing_injection(
    params: &EmitterParams,
    alpha_sq: f64,
    beta_sq: f64,
) -> DephasingInjection {
    let p = dephasing_jump_probability_for(params);
    DephasingInjection {
        jump_prob: p,
        early: 0.5 * alpha_sq * p,
        late: 0.5 * beta_sq * p,
    }
}

/// Echo amplitudes (λ↑, λ↓) for Overhauser detuning `delta_g`.
///
/// The echo maps |↓⟩ → λ↑|↑⟩ and |↑⟩ → λ↓|↓⟩ with
/// λ↓ = −exp(−iδ_g m/2), λ↑ = exp(iδ_g m/2), m = 2t_π − t_r − t₀.
pub fn spin_echo_factor(delta_g: f64, t0: f64, t_pi: f64, t_r: f64) -> (Complex64, Complex64) {
    let m = 2.0 * t_pi - t_r - t0;
    let up = Complex64::from_polar(1.0, delta_g * m / 2.0);
    let down = -Complex64::from_polar(1.0, -delta_g * m / 2.0);
    (up, down)
}

/// Echo unitary in the (↑, ↓) basis.
pub fn echo_unitary(delta_g: f64, t0: f64, t_pi: f64, t_r: f64) -> CMatrix2 {
    let (up, down) = spin_echo_factor(delta_g, t0, t_pi, t_r);
    CMatrix2::new(Complex64::new(0.0, 0.0), up, down, Complex64::new(0.0, 0.0))
}

/// Timing of the echo sequence and the spread of the Overhauser detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoTiming {
    pub t0: f64,
    pub t_pi: f64,
    pub t_r: f64,
    /// Standard deviation of δ_g in rad/ns.
    pub sigma_g: f64,
}

impl EchoTiming {
    /// σ_g = √2/T₂*, matching a free-induction decay exp(−t²/T₂*²).
    pub fn from_t2_star(t0: f64, t_pi: f64, t_r: f64, t2_star: f64) -> Self {
        Self {
            t0,
            t_pi,
            t_r,
            sigma_g: 2f64.sqrt() / t2_star,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 <= self.t_pi && self.t_pi <= self.t_r) {
            return Err(Error::invalid("echo.t_pi", self.t_pi, "requires t0 <= t_pi <= t_r"));
        }
        if !self.sigma_g.is_finite() || self.sigma_g < 0.0 {
            return Err(Error::invalid("echo.sigma_g", self.sigma_g, "must be >= 0"));
        }
        Ok(())
    }
}

/// Reflection amplitudes seen by one time bin for both spin states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinAmplitudes {
    /// Amplitude for the resonant spin (↑).
    pub resonant: Complex64,
    /// Amplitude for the off-resonant spin (↓).
    pub off_resonant: Complex64,
}

impl BinAmplitudes {
    pub fn new(resonant: Complex64, off_resonant: Complex64) -> Self {
        Self {
            resonant,
            off_resonant,
        }
    }

    /// A perfect spin-dependent mirror: r₁ = −1, r̊₁ = 0.
    pub fn ideal() -> Self {
        Self::new(Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0))
    }
}

/// Where the scattering amplitudes come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeSource {
    /// Integrate the emitter's frequency-dependent amplitudes over the pulse.
    Spectral,
    /// Fixed amplitudes per bin; early and late may differ.
    Fixed {
        early: BinAmplitudes,
        late: BinAmplitudes,
    },
}

impl AmplitudeSource {
    /// Equal ideal amplitudes in both bins.
    pub fn ideal() -> Self {
        AmplitudeSource::Fixed {
            early: BinAmplitudes::ideal(),
            late: BinAmplitudes::ideal(),
        }
    }
}

/// Which output port heralds the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HeraldPort {
    #[default]
    Reflected,
    Transmitted,
}

/// Error channels and control pulses of one gate run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub enable_pure_dephasing: bool,
    pub enable_spin_flip: bool,
    pub enable_driving_dephasing: bool,
    pub enable_readout_error: bool,
    /// Readout fidelity F_R in [0.5, 1].
    pub readout_fidelity: f64,
    pub half_pi: RotationPulse,
    pub pi: RotationPulse,
    pub depolarizing_model: DepolarizingModel,
    pub amplitudes: AmplitudeSource,
    /// Also compute the transmission-heralded state.
    pub keep_transmitted: bool,
    /// Replace the π pulse by the echo unitary averaged over the Overhauser field.
    pub echo: Option<EchoTiming>,
}

impl ChannelConfig {
    /// Every channel on, with the reference pulse durations and readout fidelity.
    pub fn reference() -> Self {
        Self {
            enable_pure_dephasing: true,
            enable_spin_flip: true,
            enable_driving_dephasing: true,
            enable_readout_error: true,
            readout_fidelity: 0.966,
            half_pi: RotationPulse::half_pi(3.5),
            pi: RotationPulse::pi(7.0),
            depolarizing_model: DepolarizingModel::Blockwise,
            amplitudes: AmplitudeSource::Spectral,
            keep_transmitted: false,
            echo: None,
        }
    }

    /// Every channel off, spectral amplitudes.
    pub fn none() -> Self {
        Self {
            enable_pure_dephasing: false,
            enable_spin_flip: false,
            enable_driving_dephasing: false,
            enable_readout_error: false,
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.readout_fidelity) {
            return Err(Error::invalid(
                "readout_fidelity",
                self.readout_fidelity,
                "must lie in [0.5, 1]",
            ));
        }
        self.half_pi.validate()?;
        self.pi.validate()?;
        if let Some(echo) = &self.echo {
            echo.validate()?;
        }
        Ok(())
    }
}

/// Result of one heralded gate run.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    /// Unnormalized heralded state; its trace is the success probability.
    pub rho_heralded: JointDensity,
    pub success_prob: f64,
    /// Ordered (channel, fidelity multiplier) pairs of the perturbative budget.
    pub budget: Vec<(String, f64)>,
    /// Transmission-heralded state when requested.
    pub rho_transmitted: Option<JointDensity>,
}

/// Step-by-step evolution of the joint state through the gate.
///
/// Tracks which bins have scattered so each scatters exactly once.
#[derive(Debug, Clone)]
pub struct GateEvolution {
    rho: CMatrix4,
    photon_ref: CMatrix2,
    model: DepolarizingModel,
    scattered: [bool; 2],
}

impl GateEvolution {
    /// ρ_p ⊗ |↓⟩⟨↓| for the time-bin qubit with relative phase θ_p.
    pub fn new(theta_p: f64, model: DepolarizingModel) -> Self {
        let photon = time_bin_qubit(theta_p);
        Self {
            rho: kron(&photon, SpinDensity::down().matrix()),
            photon_ref: photon,
            model,
            scattered: [false; 2],
        }
    }

    /// Starts from an arbitrary joint state; the photonic reference is its spin-traced block.
    pub fn from_state(state: &JointDensity, model: DepolarizingModel) -> Self {
        Self {
            rho: *state.matrix(),
            photon_ref: trace_spin(state.matrix()),
            model,
            scattered: [false; 2],
        }
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.rho
    }

    /// Current (unnormalized) state.
    pub fn state(&self) -> JointDensity {
        JointDensity::new_unchecked(self.rho, false)
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Applies `unitary` with flip probability and coherent fidelity from `noise`.
    pub fn rotate_with(&mut self, unitary: &CMatrix2, error: &CMatrix2, noise: RotationNoise) {
        let u = on_spin(unitary);
        let e = on_spin(error);
        let (p, f) = (noise.flip_prob, noise.coherent_fidelity);
        let good = u * self.rho * u.adjoint();
        let mut out = good * Complex64::new((1.0 - p) * f, 0.0);
        if f < 1.0 {
            out += e * self.rho * e.adjoint() * Complex64::new((1.0 - p) * (1.0 - f), 0.0);
        }
        if p > 0.0 {
            let photon = match self.model {
                DepolarizingModel::Blockwise => self.photon_ref,
                DepolarizingModel::TracePreserving => trace_spin(&self.rho),
            };
            let half = CMatrix2::identity() * Complex64::new(0.5 * p, 0.0);
            out += kron(&photon, &half);
        }
        self.rho = out;
    }

    /// Rotation by `pulse`, ideal when `noise` is `None`.
    pub fn rotate(&mut self, pulse: &RotationPulse, noise: Option<RotationNoise>) {
        let noise = noise.unwrap_or_else(RotationNoise::none);
        self.rotate_with(&pulse_unitary(pulse), &error_unitary(pulse), noise);
    }

    /// Scatters one time bin: its spin-↑ amplitudes pick up `amps.resonant`,
    /// spin-↓ amplitudes `amps.off_resonant`; unheralded weight is dropped.
    ///
    /// `injection` is the probability that the resonant component is
    /// reflected incoherently; it adds population to the bin's spin-↑ slot.
    pub fn scatter(&mut self, bin: TimeBin, amps: BinAmplitudes, injection: f64) -> Result<()> {
        let b = bin.index();
        if self.scattered[b] {
            return Err(Error::AlreadyScattered(bin.name()));
        }
        self.scattered[b] = true;
        let up = joint_index(bin, Spin::Up);
        let before = self.rho[(up, up)].re;
        let mut k = [Complex64::new(1.0, 0.0); 4];
        k[up] = amps.resonant;
        k[joint_index(bin, Spin::Down)] = amps.off_resonant;
        self.rho = CMatrix4::from_fn(|i, j| k[i] * self.rho[(i, j)] * k[j].conj());
        self.rho[(up, up)] += Complex64::new(injection * before, 0.0);
        Ok(())
    }

    pub fn phase_damp(&mut self, p_d: f64) {
        self.rho = damp(&self.rho, p_d);
    }

    pub fn readout(&mut self, f_r: f64) {
        self.rho = readout(&self.rho, f_r);
    }

    pub fn precess(&mut self, unitary: &CMatrix2) {
        let u = on_spin(unitary);
        self.rho = u * self.rho * u.adjoint();
    }
}

/// Scatters `bin` of a running evolution; errors if that bin already scattered.
pub fn scatter_timebin(
    evolution: &mut GateEvolution,
    bin: TimeBin,
    amps: BinAmplitudes,
) -> Result<()> {
    evolution.scatter(bin, amps, 0.0)
}

/// Channel strengths resolved from the parameters for one run.
#[derive(Debug, Clone, Copy)]
struct Resolved {
    half_pi: RotationNoise,
    pi: RotationNoise,
    p_d: f64,
    f_r: f64,
    jump_prob: f64,
}

fn resolve(emitter: &EmitterParams, pulse: &PulseParams, ch: &ChannelConfig) -> Result<Resolved> {
    let (half_pi, pi) = if ch.enable_spin_flip {
        (rotation_noise(&ch.half_pi, emitter)?, rotation_noise(&ch.pi, emitter)?)
    } else {
        (RotationNoise::none(), RotationNoise::none())
    };
    Ok(Resolved {
        half_pi,
        pi,
        p_d: if ch.enable_driving_dephasing {
            driving_dephasing_prob(pulse, emitter)
        } else {
            0.0
        },
        f_r: if ch.enable_readout_error {
            ch.readout_fidelity
        } else {
            1.0
        },
        jump_prob: if ch.enable_pure_dephasing {
            dephasing_jump_probability_for(emitter)
        } else {
            0.0
        },
    })
}

/// Runs the full sequence for fixed amplitudes and injection probabilities.
///
/// Returns the final matrix and the trace the trace-preserving flip model
/// would give for the same sequence.
#[allow(clippy::too_many_arguments)]
fn sequence(
    theta_p: f64,
    ch: &ChannelConfig,
    r: &Resolved,
    pi_unitary: &CMatrix2,
    early: BinAmplitudes,
    late: BinAmplitudes,
    injection: f64,
) -> (CMatrix4, f64) {
    let run = |model| {
        let mut g = GateEvolution::new(theta_p, model);
        g.rotate_with(&pulse_unitary(&ch.half_pi), &error_unitary(&ch.half_pi), r.half_pi);
        g.scatter(TimeBin::Early, early, injection).expect("fresh evolution");
        g.phase_damp(r.p_d);
        g.rotate_with(pi_unitary, &error_unitary(&ch.pi), r.pi);
        g.scatter(TimeBin::Late, late, injection).expect("fresh evolution");
        g.phase_damp(r.p_d);
        g.readout(r.f_r);
        g.rho
    };
    let main = run(ch.depolarizing_model);
    let physical_trace = match ch.depolarizing_model {
        DepolarizingModel::TracePreserving => main.trace().re,
        DepolarizingModel::Blockwise if r.half_pi.flip_prob > 0.0 || r.pi.flip_prob > 0.0 => {
            run(DepolarizingModel::TracePreserving).trace().re
        }
        DepolarizingModel::Blockwise => main.trace().re,
    };
    (main, physical_trace)
}

/// Sequence averaged over the Overhauser field when echo timing is set.
#[allow(clippy::too_many_arguments)]
fn sequence_averaged(
    theta_p: f64,
    ch: &ChannelConfig,
    r: &Resolved,
    early: BinAmplitudes,
    late: BinAmplitudes,
    injection: f64,
) -> (CMatrix4, f64) {
    match &ch.echo {
        None => sequence(theta_p, ch, r, &pulse_unitary(&ch.pi), early, late, injection),
        Some(echo) => {
            let mut acc = CMatrix4::zeros();
            let mut tr = 0.0;
            for (dg, w) in normal_nodes(ECHO_NODES, echo.sigma_g) {
                let u = echo_unitary(dg, echo.t0, echo.t_pi, echo.t_r);
                let (m, t) = sequence(theta_p, ch, r, &u, early, late, injection);
                acc += m * Complex64::new(w, 0.0);
                tr += w * t;
            }
            (acc, tr)
        }
    }
}

fn pack(m: &CMatrix4, trace: f64, out: &mut [f64]) {
    for i in 0..4 {
        for j in 0..4 {
            out[2 * (4 * i + j)] = m[(i, j)].re;
            out[2 * (4 * i + j) + 1] = m[(i, j)].im;
        }
    }
    out[32] = trace;
}

fn unpack(v: &[f64]) -> (CMatrix4, f64) {
    let m = CMatrix4::from_fn(|i, j| Complex64::new(v[2 * (4 * i + j)], v[2 * (4 * i + j) + 1]));
    (m, v[32])
}

/// Heralded matrix for one port, integrated over the pulse spectrum when the
/// amplitudes are spectral. Rescaled to the physical herald probability.
fn heralded(
    emitter: &EmitterParams,
    pulse: &PulseParams,
    ch: &ChannelConfig,
    r: &Resolved,
    theta_p: f64,
    port: HeraldPort,
) -> Result<CMatrix4> {
    let (m, physical) = match ch.amplitudes {
        AmplitudeSource::Fixed { early, late } => {
            sequence_averaged(theta_p, ch, r, early, late, r.jump_prob)
        }
        AmplitudeSource::Spectral => {
            let v = spectral_average(emitter, pulse, 33, QuadOptions::default(), |delta, out| {
                let a = coefficients_at(emitter, delta);
                let amps = match port {
                    HeraldPort::Reflected => BinAmplitudes::new(a.r1, a.r1_off),
                    HeraldPort::Transmitted => BinAmplitudes::new(a.t1, a.t1_off),
                };
                let inj = r.jump_prob * lineshape(emitter, delta);
                let (m, t) = sequence_averaged(theta_p, ch, r, amps, amps, inj);
                pack(&m, t, out);
            })?;
            unpack(&v)
        }
    };
    let tr = m.trace().re;
    let scaled = if tr > 0.0 && (tr - physical).abs() > 0.0 {
        m * Complex64::new(physical / tr, 0.0)
    } else {
        m
    };
    // Remove round-off anti-Hermitian parts left by the quadrature.
    Ok((scaled + scaled.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Effective emitter with disabled channels removed.
fn effective_emitter(emitter: &EmitterParams, ch: &ChannelConfig) -> EmitterParams {
    let mut e = *emitter;
    if !ch.enable_pure_dephasing {
        e.gamma_dephase = 0.0;
    }
    if !ch.enable_spin_flip {
        e.kappa_flip = 0.0;
    }
    e
}

/// Runs the heralded gate and returns the reflected-port state.
///
/// The photonic qubit is (|e⟩ + e^{iθ_p}|l⟩)/√2 and the spin starts in |↓⟩.
pub fn run_gate(
    emitter: &EmitterParams,
    pulse: &PulseParams,
    channels: &ChannelConfig,
    theta_p: f64,
) -> Result<GateOutcome> {
    emitter.validate()?;
    pulse.validate()?;
    channels.validate()?;
    let e = effective_emitter(emitter, channels);
    let r = resolve(&e, pulse, channels)?;

    let rho = heralded(&e, pulse, channels, &r, theta_p, HeraldPort::Reflected)?;
    let rho_heralded = JointDensity::new_unchecked(rho, false);
    let success_prob = rho_heralded.trace();
    if success_prob < 1e-6 {
        log::warn!("heralded success probability {success_prob:e} is below 1e-6");
    }
    let rho_transmitted = if channels.keep_transmitted {
        let t = heralded(&e, pulse, channels, &r, theta_p, HeraldPort::Transmitted)?;
        Some(JointDensity::new_unchecked(t, false))
    } else {
        None
    };
    let budget = channel_budget(&e, pulse, channels, &r)?;
    Ok(GateOutcome {
        rho_heralded,
        success_prob,
        budget,
        rho_transmitted,
    })
}

fn ideal_fixed_fidelity(ch: &ChannelConfig, r: &Resolved) -> f64 {
    let ideal = BinAmplitudes::ideal();
    let (m, _) = sequence_averaged(0.0, ch, r, ideal, ideal, 0.0);
    crate::metrics::phi_minus_overlap(&m, 0.0) / m.trace().re
}

fn channel_budget(
    e: &EmitterParams,
    pulse: &PulseParams,
    ch: &ChannelConfig,
    r: &Resolved,
) -> Result<Vec<(String, f64)>> {
    use crate::metrics::{conditional_fidelity_formula, DephasingTerm};
    use crate::scattering::{overlap_integrals, OverlapMethod};

    let mut rows = Vec::new();
    let spectral = match ch.amplitudes {
        AmplitudeSource::Spectral => {
            let o = overlap_integrals(e, pulse, OverlapMethod::Quadrature)?;
            let base = conditional_fidelity_formula(&o, None)?;
            let with = if ch.enable_pure_dephasing {
                conditional_fidelity_formula(
                    &o,
                    Some(DephasingTerm::balanced(r.jump_prob * o.i_lineshape)),
                )?
            } else {
                base
            };
            Some((base, with / base))
        }
        AmplitudeSource::Fixed { .. } => None,
    };
    let (spec, deph) = spectral.unwrap_or((1.0, 1.0));
    rows.push(("spectral_off_resonant".to_string(), spec));
    rows.push(("pure_dephasing".to_string(), deph));

    let rot_only = Resolved {
        p_d: 0.0,
        f_r: 1.0,
        jump_prob: 0.0,
        ..*r
    };
    let plain = ChannelConfig {
        echo: None,
        ..*ch
    };
    let f_rot = ideal_fixed_fidelity(&plain, &rot_only);
    let f_rot_readout = ideal_fixed_fidelity(&plain, &Resolved { f_r: r.f_r, ..rot_only });
    rows.push(("rotation_spin_flip".to_string(), f_rot));
    rows.push(("readout".to_string(), f_rot_readout / f_rot));
    let driving = if ch.enable_driving_dephasing {
        let p = scattering_success(
            e.gamma_total_deph(),
            e.gamma1_loss,
            e.gamma2_loss,
            e.cyclicity_transition(),
        );
        driving_dephasing_fidelity(pulse.n_bar, p)
    } else {
        1.0
    };
    rows.push(("driving_dephasing".to_string(), driving));
    Ok(rows)
}
