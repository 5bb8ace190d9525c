//! Saturation-curve fitting, photon-number bookkeeping and extraction of
//! the pure dephasing rate from visibility data.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{EmitterParams, PulseParams};

const MAX_ITERATIONS: usize = 500;

/// One point of a saturation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    /// Excitation power in nW.
    pub power: f64,
    /// Gated counts.
    pub counts: f64,
}

/// How the scale freedom of the saturation model is fixed.
///
/// I = b₃b₁P/(1+b₂b₁P) depends only on b₁b₃ and b₁b₂, so (b₁k, b₂/k, b₃/k)
/// fit equally well. The data determine two combinations; the gauge picks
/// the third.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SaturationGauge {
    /// Keep ln b₁ − ln b₂ − ln b₃ at its value for the initial guess
    /// (b₂ = 1, b₃ = max I, b₁ = 1/P_half).
    #[default]
    FromInitialGuess,
    /// Pin b₂ to a known value.
    FixedB2(f64),
}

/// Result of a saturation fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    /// ns⁻²/nW.
    pub b1: f64,
    pub b2: f64,
    /// Counts scale.
    pub b3: f64,
    /// Covariance of (b₁, b₂, b₃); rank two because of the gauge freedom.
    pub covariance: [[f64; 3]; 3],
    /// √(Σ residual²), in counts.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl SaturationFit {
    /// Model intensity at power `p`.
    pub fn intensity(&self, p: f64) -> f64 {
        self.b3 * self.b1 * p / (1.0 + self.b2 * self.b1 * p)
    }

    /// b₁b₂, the gauge-independent saturation scale (1/nW).
    pub fn saturation_scale(&self) -> f64 {
        self.b1 * self.b2
    }

    /// b₃/b₂, the gauge-independent high-power asymptote.
    pub fn asymptote(&self) -> f64 {
        self.b3 / self.b2
    }
}

fn half_max_power(points: &[SaturationPoint]) -> f64 {
    let mut sorted: Vec<SaturationPoint> = points.to_vec();
    sorted.sort_by(|a, b| a.power.total_cmp(&b.power));
    let max = sorted.iter().map(|p| p.counts).fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * max;
    let mut prev: Option<SaturationPoint> = None;
    for p in &sorted {
        if p.counts >= half {
            return match prev {
                Some(q) if p.counts > q.counts => {
                    q.power + (half - q.counts) / (p.counts - q.counts) * (p.power - q.power)
                }
                _ => p.power,
            };
        }
        prev = Some(*p);
    }
    sorted.last().map(|p| p.power).unwrap_or(1.0)
}

/// Sum of squared residuals and the Jacobian-based normal equations for
/// the identifiable parameters (ln A, ln B) with A = b₁b₃, B = b₁b₂.
fn normal_equations(points: &[SaturationPoint], u: f64, v: f64) -> (f64, Matrix2<f64>, Vector2<f64>) {
    let (a, b) = (u.exp(), v.exp());
    let mut jtj = Matrix2::zeros();
    let mut jtr = Vector2::zeros();
    let mut ssr = 0.0;
    for p in points {
        let model = a * p.power / (1.0 + b * p.power);
        let r = model - p.counts;
        let j = Vector2::new(model, -model * b * p.power / (1.0 + b * p.power));
        jtj += j * j.transpose();
        jtr += j * r;
        ssr += r * r;
    }
    (ssr, jtj, jtr)
}

fn cost(points: &[SaturationPoint], u: f64, v: f64) -> f64 {
    let (a, b) = (u.exp(), v.exp());
    points
        .iter()
        .map(|p| (a * p.power / (1.0 + b * p.power) - p.counts).powi(2))
        .sum()
}

/// Least-squares fit of I = b₃b₁P/(1+b₂b₁P).
///
/// Damped Gauss–Newton on the log of the two identifiable combinations,
/// with analytic derivatives; the gauge then fixes (b₁, b₂, b₃).
pub fn fit_saturation(points: &[SaturationPoint], gauge: SaturationGauge) -> Result<SaturationFit> {
    if points.len() < 4 {
        return Err(Error::DegenerateData(format!(
            "saturation fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    for (i, p) in points.iter().enumerate() {
        if !p.power.is_finite() || p.power < 0.0 || !p.counts.is_finite() {
            return Err(Error::DegenerateData(format!(
                "point {i}: power {} and counts {} must be finite with power >= 0",
                p.power, p.counts
            )));
        }
    }
    let p0 = points[0].power;
    if points.iter().all(|p| p.power == p0) {
        return Err(Error::DegenerateData("all points share the same power".into()));
    }
    let max = points.iter().map(|p| p.counts).fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return Err(Error::DegenerateData("no positive counts".into()));
    }

    let (b1_0, b2_0, b3_0) = {
        let b2 = 1.0;
        (1.0 / (half_max_power(points) * b2), b2, max)
    };
    let mut u = (b1_0 * b3_0).ln();
    let mut v = (b1_0 * b2_0).ln();
    let mut lambda = 1e-3;
    let mut current = cost(points, u, v);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (_, jtj, jtr) = normal_equations(points, u, v);
        if jtr.norm() <= 1e-14 * (1.0 + current) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * lambda;
            let step = match damped.try_inverse() {
                Some(inv) => -(inv * jtr),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial = cost(points, u + step[0], v + step[1]);
            if trial.is_finite() && trial <= current {
                let reduction = current - trial;
                u += step[0];
                v += step[1];
                current = trial;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if step.norm() < 1e-12 || reduction <= 1e-15 * current.max(1e-300) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: at a minimum to machine precision.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let (a_ln, b_ln) = (u, v);
    let (x, y, z, map) = match gauge {
        SaturationGauge::FromInitialGuess => {
            let g = b1_0.ln() - b2_0.ln() - b3_0.ln();
            let x = (g + a_ln + b_ln) / 3.0;
            let m = Matrix3x2::new(1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0);
            (x, b_ln - x, a_ln - x, m)
        }
        SaturationGauge::FixedB2(b2) => {
            if !(b2 > 0.0 && b2.is_finite()) {
                return Err(Error::invalid("b2", b2, "pinned b2 must be positive"));
            }
            let y = b2.ln();
            let x = b_ln - y;
            let m = Matrix3x2::new(0.0, 1.0, 0.0, 0.0, 1.0, -1.0);
            (x, y, a_ln - x, m)
        }
    };
    let (b1, b2, b3) = (x.exp(), y.exp(), z.exp());
    if !converged {
        return Err(Error::FitNotConverged {
            iterations,
            last: [b1, b2, b3],
        });
    }

    let (ssr, jtj, _) = normal_equations(points, u, v);
    let dof = points.len().saturating_sub(2).max(1) as f64;
    let cov_log = jtj.try_inverse().unwrap_or_else(Matrix2::zeros) * (ssr / dof);
    let jac = Matrix3::from_diagonal(&nalgebra::Vector3::new(b1, b2, b3)) * map;
    let cov = jac * cov_log * jac.transpose();
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = cov[(i, j)];
        }
    }
    Ok(SaturationFit {
        b1,
        b2,
        b3,
        covariance,
        residual_norm: ssr.sqrt(),
        iterations,
    })
}

/// Photon flux and mean photon number derived from saturation data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonFlux {
    /// Saturation parameter S = b₁b₂P.
    pub s_param: f64,
    /// Critical photon number n_c = (1 + 2γ_d/Γ)/(4β²).
    pub n_crit: f64,
    /// Photon flux per lifetime n_F = S·n_c.
    pub n_flux: f64,
    /// Mean photon number per pulse n̄ = n_F·T_p·Γ.
    pub n_bar: f64,
    /// n̄ per nW assuming 10⁻² transmission to the detector.
    pub scale_per_nw: f64,
}

/// n_c = (1 + 2γ_d/Γ)/(4β²) for β-factor `beta`.
pub fn critical_photon_number(gamma_dephase: f64, gamma: f64, beta: f64) -> f64 {
    (1.0 + 2.0 * gamma_dephase / gamma) / (4.0 * beta * beta)
}

/// n̄ = S·n_c·T_p·Γ.
pub fn mean_photon_number_from(s_param: f64, n_crit: f64, t_pulse: f64, gamma: f64) -> f64 {
    s_param * n_crit * t_pulse * gamma
}

/// Photon numbers at excitation power `power` (nW) for saturation scale b₁b₂.
pub fn mean_photon_number(
    b1: f64,
    b2: f64,
    emitter: &EmitterParams,
    pulse: &PulseParams,
    power: f64,
) -> Result<PhotonFlux> {
    if !power.is_finite() || power < 0.0 {
        return Err(Error::invalid("power", power, "must be >= 0"));
    }
    let gamma = emitter.gamma_total_deph();
    if pulse.t_pulse * gamma < 2.0 {
        log::warn!(
            "photon-number model assumes T_p >> 1/Gamma; T_p*Gamma = {}",
            pulse.t_pulse * gamma
        );
    }
    let s_param = b1 * b2 * power;
    let n_crit = critical_photon_number(emitter.gamma_dephase, gamma, emitter.beta_factor);
    let n_flux = s_param * n_crit;
    Ok(PhotonFlux {
        s_param,
        n_crit,
        n_flux,
        n_bar: mean_photon_number_from(s_param, n_crit, pulse.t_pulse, gamma),
        scale_per_nw: 1e-2 * b1 * b2 * n_crit * pulse.t_pulse * gamma / 2.0,
    })
}

/// One visibility measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    pub n_bar: f64,
    pub visibility: f64,
    /// Standard error; when every point has one, the fit is weighted.
    pub error: Option<f64>,
}

/// Straight-line fit of visibility against n̄ and the implied dephasing rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingEstimate {
    pub gamma_d: f64,
    pub gamma_d_std: f64,
    pub intercept: f64,
    pub intercept_std: f64,
    pub slope: f64,
    pub slope_std: f64,
}

/// Fits V = V₀ + s·n̄ and returns γ_d = Γ(1−V₀)/2.
///
/// Ordinary least squares, or inverse-variance weighted when every point
/// carries an error. The intercept error propagates to γ_d by Γ/2.
pub fn extract_dephasing(points: &[VisibilityPoint], gamma: f64) -> Result<DephasingEstimate> {
    if points.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "line fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let weighted = points.iter().all(|p| p.error.is_some());
    let mut xtx = Matrix2::zeros();
    let mut xty = Vector2::zeros();
    for p in points {
        let w = match p.error {
            Some(e) if weighted => {
                if !(e > 0.0) {
                    return Err(Error::DegenerateData(format!(
                        "visibility error must be positive, got {e}"
                    )));
                }
                1.0 / (e * e)
            }
            _ => 1.0,
        };
        let x = Vector2::new(1.0, p.n_bar);
        xtx += x * x.transpose() * w;
        xty += x * (w * p.visibility);
    }
    let det = xtx.determinant();
    if det.abs() <= 1e-12 * xtx.norm_squared().max(1e-300) {
        return Err(Error::DegenerateData("singular design matrix (all n_bar equal)".into()));
    }
    let inv = xtx.try_inverse().ok_or_else(|| {
        Error::DegenerateData("singular design matrix (all n_bar equal)".into())
    })?;
    let beta = inv * xty;
    let cov = if weighted {
        inv
    } else {
        let ssr: f64 = points
            .iter()
            .map(|p| (p.visibility - beta[0] - beta[1] * p.n_bar).powi(2))
            .sum();
        let dof = points.len() as f64 - 2.0;
        if dof > 0.0 {
            inv * (ssr / dof)
        } else {
            Matrix2::zeros()
        }
    };
    let intercept_std = cov[(0, 0)].max(0.0).sqrt();
    Ok(DephasingEstimate {
        gamma_d: 0.5 * gamma * (1.0 - beta[0]),
        gamma_d_std: 0.5 * gamma * intercept_std,
        intercept: beta[0],
        intercept_std,
        slope: beta[1],
        slope_std: cov[(1, 1)].max(0.0).sqrt(),
    })
}
