//! Fidelities, contrasts, visibility, success probability and concurrence,
//! from simulated states or from measured counts.
//!
//! Contrast convention: the photonic qubit has |e⟩ as logical 0 and the
//! spin has |↓⟩ as logical 0, so the ideal heralded state
//! (|e↓⟩ − |l↑⟩)/√2 has (m_x, m_y, m_z) = (−1, +1, +1).

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{EmitterParams, PulseParams};
use crate::protocol::{
    dephasing_jump_probability_for, driving_dephasing_fidelity, run_gate, scattering_success,
    AmplitudeSource, ChannelConfig,
};
use crate::scattering::{overlap_integrals, OverlapIntegrals, OverlapMethod};
use crate::state::{
    hermitian_eigenvalues, joint_index, kron, pauli_x, pauli_y, pauli_z, CMatrix2, CMatrix4,
    JointDensity, Spin, TimeBin, PSD_TOL,
};

/// Normalized correlation contrasts of the spin–photon state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contrasts {
    pub m_x: f64,
    pub m_y: f64,
    pub m_z: f64,
}

impl Contrasts {
    pub fn new(m_x: f64, m_y: f64, m_z: f64) -> Result<Self> {
        for (field, v) in [("m_x", m_x), ("m_y", m_y), ("m_z", m_z)] {
            if !(v.abs() <= 1.0 + 1e-12) {
                return Err(Error::invalid(field, v, "contrast must lie in [-1, 1]"));
            }
        }
        Ok(Self { m_x, m_y, m_z })
    }

    /// Builds contrasts from the correlated Z probability P_z = (1+m_z)/2.
    pub fn from_pz(p_z: f64, m_x: f64, m_y: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_z) {
            return Err(Error::invalid("p_z", p_z, "must lie in [0, 1]"));
        }
        Self::new(m_x, m_y, 2.0 * p_z - 1.0)
    }

    /// Probability of correlated Z outcomes.
    pub fn p_z(&self) -> f64 {
        0.5 * (1.0 + self.m_z)
    }
}

/// Target Bell state of a fidelity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellTarget {
    /// (|e↓⟩ − e^{iθ}|l↑⟩)/√2, heralded in reflection.
    PhiMinus,
    /// (|e↓⟩ + e^{iθ}|l↑⟩)/√2.
    PhiPlus,
    /// (|e↑⟩ − e^{iθ}|l↓⟩)/√2, heralded in transmission.
    PsiMinus,
    /// (|e↑⟩ + e^{iθ}|l↓⟩)/√2.
    PsiPlus,
}

impl BellTarget {
    pub fn vector(self, theta_p: f64) -> [Complex64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let phase = Complex64::from_polar(h, theta_p);
        let zero = Complex64::new(0.0, 0.0);
        let (first, second, sign) = match self {
            BellTarget::PhiMinus => ((TimeBin::Early, Spin::Down), (TimeBin::Late, Spin::Up), -1.0),
            BellTarget::PhiPlus => ((TimeBin::Early, Spin::Down), (TimeBin::Late, Spin::Up), 1.0),
            BellTarget::PsiMinus => ((TimeBin::Early, Spin::Up), (TimeBin::Late, Spin::Down), -1.0),
            BellTarget::PsiPlus => ((TimeBin::Early, Spin::Up), (TimeBin::Late, Spin::Down), 1.0),
        };
        let mut v = [zero; 4];
        v[joint_index(first.0, first.1)] = Complex64::new(h, 0.0);
        v[joint_index(second.0, second.1)] = phase * sign;
        v
    }
}

fn overlap(m: &CMatrix4, v: &[Complex64; 4]) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            s += v[i].conj() * m[(i, j)] * v[j];
        }
    }
    s.re
}

/// ⟨φ⁻|m|φ⁻⟩ without normalization.
pub fn phi_minus_overlap(m: &CMatrix4, theta_p: f64) -> f64 {
    overlap(m, &BellTarget::PhiMinus.vector(theta_p))
}

/// Overlap with the target Bell state, normalized by the trace.
pub fn bell_fidelity(rho: &JointDensity, target: BellTarget, theta_p: f64) -> Result<f64> {
    let tr = rho.trace();
    if tr <= 0.0 {
        return Err(Error::NoHeraldedWeight);
    }
    // Clamp removes round-off excursions past the physical range.
    Ok((overlap(rho.matrix(), &target.vector(theta_p)) / tr).clamp(0.0, 1.0))
}

/// Incoherent contribution of pure dephasing to a conditional fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingTerm {
    /// Effective jump probability (already weighted by the pulse spectrum).
    pub jump_prob: f64,
    pub alpha_sq: f64,
    pub beta_sq: f64,
}

impl DephasingTerm {
    /// Equal photonic weights |α|² = |β|² = ½.
    pub fn balanced(jump_prob: f64) -> Self {
        Self {
            jump_prob,
            alpha_sq: 0.5,
            beta_sq: 0.5,
        }
    }
}

/// Heralded fidelity from overlap integrals.
///
/// i_res/(i_res+i_off) without dephasing, and
/// (i_res + (|α|⁴+|β|⁴)P)/(i_res + i_off + P) with it.
pub fn conditional_fidelity_formula(
    overlaps: &OverlapIntegrals,
    dephasing: Option<DephasingTerm>,
) -> Result<f64> {
    let (p, weight) = match dephasing {
        Some(d) => (d.jump_prob, d.alpha_sq.powi(2) + d.beta_sq.powi(2)),
        None => (0.0, 0.0),
    };
    let denom = overlaps.i_res + overlaps.i_off + p;
    if denom <= 0.0 {
        return Err(Error::NoHeraldedWeight);
    }
    Ok((overlaps.i_res + weight * p) / denom)
}

/// Conditional fidelity of an emitter and pulse, with spectrally weighted dephasing.
pub fn conditional_fidelity(params: &EmitterParams, pulse: &PulseParams) -> Result<f64> {
    let o = overlap_integrals(params, pulse, OverlapMethod::Quadrature)?;
    let p = dephasing_jump_probability_for(params) * o.i_lineshape;
    conditional_fidelity_formula(&o, Some(DephasingTerm::balanced(p)))
}

/// Leading-order heralded fidelity 1 − γ_d/Γ − Γ²/(4Δ_h²).
pub fn conditional_fidelity_perturbative(params: &EmitterParams) -> f64 {
    let g = params.gamma_total_deph();
    1.0 - params.gamma_dephase / g - g * g / (4.0 * params.delta_h * params.delta_h)
}

fn photon_pauli(k: usize) -> CMatrix2 {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match k {
        0 => CMatrix2::new(o, one, one, o),
        1 => CMatrix2::new(o, -i, i, o),
        _ => CMatrix2::new(one, o, o, -one),
    }
}

/// Correlation contrasts m_i = Tr(ρ σ_i⊗σ_i)/Tr ρ.
pub fn contrasts_from_state(rho: &JointDensity) -> Result<Contrasts> {
    let tr = rho.trace();
    if tr <= 0.0 {
        return Err(Error::NoHeraldedWeight);
    }
    let spin = [pauli_x(), pauli_y(), pauli_z()];
    let m: Vec<f64> = (0..3)
        .map(|k| (rho.matrix() * kron(&photon_pauli(k), &spin[k])).trace().re / tr)
        .collect();
    Ok(Contrasts {
        m_x: m[0],
        m_y: m[1],
        m_z: m[2],
    })
}

/// Bell fidelity from contrasts, P_z/2 + (M_y − M_x)/4.
pub fn fidelity_from_contrasts(c: &Contrasts) -> f64 {
    0.5 * c.p_z() + 0.25 * (c.m_y - c.m_x)
}

/// Success probability: leading-order closed form and the spectral integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessProbability {
    pub closed_form: f64,
    /// ½[i_res + i_off + P^{ω₁}_{γ_d}] with quadrature overlaps.
    pub integral: f64,
}

/// Closed-form heralding probability for explicit cyclicity `c`.
///
/// ½[1 − 4σ_o²/Γ² − 4σ_e²/Γ² − 2/(C+1) − (2γ_d/Γ)(1 − 1/(C+1)) − 2γ₁/Γ
///   + (Γ²/4Δ_h²)(1 − 1/(C+1) − γ₁/Γ)²]
pub fn success_probability_closed_form(
    gamma: f64,
    gamma_dephase: f64,
    gamma1_loss: f64,
    sigma_o: f64,
    sigma_e: f64,
    delta_h: f64,
    c: f64,
) -> f64 {
    let ic = if c.is_infinite() { 0.0 } else { 1.0 / (c + 1.0) };
    let g2 = gamma * gamma;
    let branch = 1.0 - ic - gamma1_loss / gamma;
    0.5 * (1.0 - 4.0 * sigma_o * sigma_o / g2 - 4.0 * sigma_e * sigma_e / g2 - 2.0 * ic
        - 2.0 * gamma_dephase / gamma * (1.0 - ic)
        - 2.0 * gamma1_loss / gamma
        + g2 / (4.0 * delta_h * delta_h) * branch * branch)
}

/// Heralding probability of an emitter and pulse.
pub fn success_probability(params: &EmitterParams, pulse: &PulseParams) -> Result<SuccessProbability> {
    let o = overlap_integrals(params, pulse, OverlapMethod::Quadrature)?;
    let p = dephasing_jump_probability_for(params) * o.i_lineshape;
    Ok(SuccessProbability {
        closed_form: success_probability_closed_form(
            params.gamma_total_deph(),
            params.gamma_dephase,
            params.gamma1_loss,
            pulse.sigma_o,
            pulse.sigma_e,
            params.delta_h,
            params.cyclicity_transition(),
        ),
        integral: 0.5 * (o.i_res + o.i_off + p),
    })
}

/// Trace of the heralded state from the full gate simulation.
pub fn success_probability_exact(
    params: &EmitterParams,
    pulse: &PulseParams,
    channels: &ChannelConfig,
) -> Result<f64> {
    Ok(run_gate(params, pulse, channels, 0.0)?.success_prob)
}

/// Single-photon interference visibility of the reflected light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    /// i_res/(i_res + P^{ω₁}_{γ_d}).
    pub exact: f64,
    /// 1 − 2γ_d/Γ.
    pub linear: f64,
}

pub fn photon_visibility(params: &EmitterParams, pulse: &PulseParams) -> Result<Visibility> {
    let o = overlap_integrals(params, pulse, OverlapMethod::Quadrature)?;
    let p = dephasing_jump_probability_for(params) * o.i_lineshape;
    Ok(Visibility {
        exact: o.i_res / (o.i_res + p),
        linear: 1.0 - 2.0 * params.gamma_dephase / params.gamma_total_deph(),
    })
}

/// Dephasing rate implied by a zero-photon-number visibility, γ_d = Γ(1−V₀)/2.
pub fn dephasing_from_visibility(v0: f64, gamma: f64) -> f64 {
    0.5 * gamma * (1.0 - v0)
}

/// Wootters concurrence of a two-qubit state.
///
/// Uses ρ̃ = (σ_y⊗σ_y)ρ*(σ_y⊗σ_y) and the eigenvalues of √ρ ρ̃ √ρ, which
/// equal those of ρρ̃. The input is normalized by its trace.
pub fn concurrence(rho: &JointDensity) -> Result<f64> {
    let tr = rho.trace();
    if tr <= 0.0 {
        return Err(Error::NoHeraldedWeight);
    }
    let m: CMatrix4 = rho.matrix() / Complex64::new(tr, 0.0);
    let h: CMatrix4 = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::InvalidState(format!(
            "not positive semidefinite (min eigenvalue {min:e})"
        )));
    }
    let sqrt_diag = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0)));
    let root = eig.eigenvectors * sqrt_diag * eig.eigenvectors.adjoint();
    let yy = kron(&photon_pauli(1), &photon_pauli(1));
    let flipped = yy * h.conjugate() * yy;
    let r = root * flipped * root;
    let mut lambdas: Vec<f64> = hermitian_eigenvalues(&r)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Coincidence counts of the four Z outcomes and the middle-window
/// equatorial projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    pub e_up: u64,
    pub e_down: u64,
    pub l_up: u64,
    pub l_down: u64,
    pub mid_x_plus: u64,
    pub mid_x_minus: u64,
    pub mid_y_plus: u64,
    pub mid_y_minus: u64,
}

impl CoincidenceCounts {
    pub fn z_total(&self) -> u64 {
        self.e_up + self.e_down + self.l_up + self.l_down
    }

    /// (M_x, M_y) from the middle-window counts, if both bases were recorded.
    pub fn equatorial_contrasts(&self) -> Option<(f64, f64)> {
        let nx = self.mid_x_plus + self.mid_x_minus;
        let ny = self.mid_y_plus + self.mid_y_minus;
        if nx == 0 || ny == 0 {
            return None;
        }
        Some((
            (self.mid_x_plus as f64 - self.mid_x_minus as f64) / nx as f64,
            (self.mid_y_plus as f64 - self.mid_y_minus as f64) / ny as f64,
        ))
    }

    /// Sets a count by its outcome label.
    pub fn set(&mut self, outcome: &str, value: u64) -> Result<()> {
        let slot = match outcome {
            "e_up" => &mut self.e_up,
            "e_down" => &mut self.e_down,
            "l_up" => &mut self.l_up,
            "l_down" => &mut self.l_down,
            "mid_x_plus" => &mut self.mid_x_plus,
            "mid_x_minus" => &mut self.mid_x_minus,
            "mid_y_plus" => &mut self.mid_y_plus,
            "mid_y_minus" => &mut self.mid_y_minus,
            other => {
                return Err(Error::DegenerateData(format!("unknown outcome '{other}'")));
            }
        };
        *slot = value;
        Ok(())
    }
}

/// X-form density matrix from Z counts and equatorial contrasts.
///
/// The inner coherence is Re ρ_{e↓,l↑} = (M_x − M_y)/4 with zero imaginary
/// part, shrunk if needed to √(ρ_{e↓}ρ_{l↑}) so the result stays positive.
pub fn density_from_counts(counts: &CoincidenceCounts, m_x: f64, m_y: f64) -> Result<JointDensity> {
    let n = counts.z_total();
    if n == 0 {
        return Err(Error::DegenerateData("all Z-basis counts are zero".into()));
    }
    let nf = n as f64;
    let p = [
        counts.e_up as f64 / nf,
        counts.e_down as f64 / nf,
        counts.l_up as f64 / nf,
        counts.l_down as f64 / nf,
    ];
    let bound = (p[1] * p[2]).sqrt();
    let coherence = (0.25 * (m_x - m_y)).clamp(-bound, bound);
    let mut m = CMatrix4::zeros();
    for (k, pk) in p.iter().enumerate() {
        m[(k, k)] = Complex64::new(*pk, 0.0);
    }
    let a = joint_index(TimeBin::Early, Spin::Down);
    let b = joint_index(TimeBin::Late, Spin::Up);
    m[(a, b)] = Complex64::new(coherence, 0.0);
    m[(b, a)] = Complex64::new(coherence, 0.0);
    JointDensity::new(m, true)
}

/// Bootstrap estimate of the concurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    /// Concurrence of the measured counts themselves.
    pub point: f64,
    pub mean: f64,
    pub std: f64,
    /// Resamples that produced a valid state.
    pub n_used: usize,
}

fn poisson(mean: u64, rng: &mut ChaCha8Rng) -> u64 {
    if mean == 0 {
        return 0;
    }
    Poisson::new(mean as f64).expect("positive mean").sample(rng) as u64
}

fn resample(c: &CoincidenceCounts, rng: &mut ChaCha8Rng) -> CoincidenceCounts {
    CoincidenceCounts {
        e_up: poisson(c.e_up, rng),
        e_down: poisson(c.e_down, rng),
        l_up: poisson(c.l_up, rng),
        l_down: poisson(c.l_down, rng),
        mid_x_plus: poisson(c.mid_x_plus, rng),
        mid_x_minus: poisson(c.mid_x_minus, rng),
        mid_y_plus: poisson(c.mid_y_plus, rng),
        mid_y_minus: poisson(c.mid_y_minus, rng),
    }
}

fn counts_concurrence(c: &CoincidenceCounts, contrasts: Option<(f64, f64)>) -> Result<f64> {
    let (mx, my) = match c.equatorial_contrasts().or(contrasts) {
        Some(v) => v,
        None => {
            return Err(Error::DegenerateData(
                "no equatorial counts and no contrasts supplied".into(),
            ))
        }
    };
    concurrence(&density_from_counts(c, mx, my)?)
}

/// Poisson-bootstrap mean and standard deviation of the concurrence.
///
/// Equatorial contrasts come from the middle-window counts when present,
/// otherwise from `contrasts`, which are then held fixed. Resample k draws
/// from ChaCha8 seeded with `seed` on stream k, so results do not depend on
/// how resamples are scheduled across threads.
pub fn bootstrap_concurrence(
    counts: &CoincidenceCounts,
    contrasts: Option<(f64, f64)>,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapEstimate> {
    if n_resamples < 100 {
        return Err(Error::invalid(
            "n_resamples",
            n_resamples as f64,
            "at least 100 resamples required",
        ));
    }
    let point = counts_concurrence(counts, contrasts)?;
    let samples: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .filter_map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            counts_concurrence(&resample(counts, &mut rng), contrasts).ok()
        })
        .collect();
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateData("too few valid bootstrap resamples".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(BootstrapEstimate {
        point,
        mean,
        std: var.sqrt(),
        n_used: n,
    })
}

/// Perturbative fidelity budget alongside the full simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityBudget {
    /// 1 − γ_d/Γ − Γ²/(4Δ_h²).
    pub dephasing_off_resonant: f64,
    /// Ideal-mirror gate with rotation errors and readout.
    pub spin_flip_readout: f64,
    /// ½[1 + exp(−2n̄(P_{ω₁}+P_{ω₂}))].
    pub driving_dephasing: f64,
    pub product: f64,
    /// Heralded Bell fidelity of the full simulation.
    pub exact: f64,
    /// exact − product.
    pub discrepancy: f64,
    /// Conditional fidelity from the overlap integrals with dephasing.
    pub conditional: f64,
    /// Trace of the heralded state of the full simulation.
    pub success_prob: f64,
    /// Closed-form success probability.
    pub success_prob_closed_form: f64,
    pub contrasts: Contrasts,
}

/// Composes the multiplicative budget and runs the full gate for comparison.
///
/// Disabled channels contribute a factor of one.
pub fn fidelity_budget(
    emitter: &EmitterParams,
    pulse: &PulseParams,
    channels: &ChannelConfig,
    theta_p: f64,
) -> Result<FidelityBudget> {
    let e = if channels.enable_pure_dephasing {
        *emitter
    } else {
        EmitterParams {
            gamma_dephase: 0.0,
            ..*emitter
        }
    };
    let dephasing_off_resonant = conditional_fidelity_perturbative(&e);

    let rotation_only = ChannelConfig {
        enable_pure_dephasing: false,
        enable_driving_dephasing: false,
        amplitudes: AmplitudeSource::ideal(),
        echo: None,
        ..*channels
    };
    let fixed = run_gate(&e, pulse, &rotation_only, theta_p)?;
    let spin_flip_readout = bell_fidelity(&fixed.rho_heralded, BellTarget::PhiMinus, theta_p)?;

    let driving_dephasing = if channels.enable_driving_dephasing {
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
    let product = dephasing_off_resonant * spin_flip_readout * driving_dephasing;

    let full = run_gate(&e, pulse, channels, theta_p)?;
    let exact = bell_fidelity(&full.rho_heralded, BellTarget::PhiMinus, theta_p)?;
    let contrasts = contrasts_from_state(&full.rho_heralded)?;
    let conditional = conditional_fidelity(&e, pulse)?;
    let sp = success_probability(&e, pulse)?;
    Ok(FidelityBudget {
        dephasing_off_resonant,
        spin_flip_readout,
        driving_dephasing,
        product,
        exact,
        discrepancy: exact - product,
        conditional,
        success_prob: full.success_prob,
        success_prob_closed_form: sp.closed_form,
        contrasts,
    })
}
