//! Acceptance checks for the reference numbers of the gate model.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spingate_core::calibration::{
    critical_photon_number, extract_dephasing, mean_photon_number_from, VisibilityPoint,
};
use spingate_core::metrics::{
    bell_fidelity, bootstrap_concurrence, concurrence, conditional_fidelity,
    conditional_fidelity_formula, contrasts_from_state, dephasing_from_visibility,
    fidelity_budget, fidelity_from_contrasts, photon_visibility, success_probability,
    success_probability_closed_form, BellTarget, CoincidenceCounts, Contrasts, DephasingTerm,
};
use spingate_core::protocol::{
    dephasing_jump_probability_for, driving_dephasing_fidelity,
    rotation_fidelity_total, rotation_noise, run_gate, scattering_success, AmplitudeSource,
    BinAmplitudes, ChannelConfig, DepolarizingModel, GateEvolution,
};
use spingate_core::scattering::{coefficients_at, lineshape, overlap_integrals, OverlapMethod};
use spingate_core::state::{min_eigenvalue, pure_4, CMatrix4, JointDensity, TimeBin};
use spingate_core::{EmitterParams, PulseParams, RotationPulse};

const GAMMA: f64 = 2.48;
const GAMMA_D: f64 = 0.092;
const CYCLICITY: f64 = 14.7;

fn delta_h() -> f64 {
    2.0 * PI * 7.3
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!(
            "[{}] {id:>3} {name}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }

    fn run<F>(&mut self, id: &str, name: &str, check: F)
    where
        F: FnOnce() -> Result<(bool, String), String>,
    {
        let start = Instant::now();
        match check() {
            Ok((ok, detail)) => self.line(
                id,
                name,
                ok,
                format!("{detail} ({:.2}s)", start.elapsed().as_secs_f64()),
            ),
            Err(e) => self.line(id, name, false, format!("error: {e}")),
        }
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn conditional_formula() -> Result<(bool, String), String> {
    // Mirror with no other imperfection than pure dephasing, probed
    // monochromatically.
    let emitter = EmitterParams {
        gamma_dephase: GAMMA_D,
        ..EmitterParams::ideal(GAMMA - 2.0 * GAMMA_D, delta_h())
    };
    let pulse = PulseParams::from_bandwidth(1e-6 * GAMMA, 0.0, 0.0, 0.0);
    let o = overlap_integrals(&emitter, &pulse, OverlapMethod::Quadrature).map_err(err)?;
    let p = dephasing_jump_probability_for(&emitter) * o.i_lineshape;
    let f = conditional_fidelity_formula(&o, Some(DephasingTerm::balanced(p))).map_err(err)?;
    let full = conditional_fidelity(&EmitterParams::reference(), &PulseParams::reference())
        .map_err(err)?;
    Ok((
        within(100.0 * f, 96.2, 0.2),
        format!(
            "F_cond = {:.3}% (target 96.2 +/- 0.2); with reference pulse and losses {:.3}%",
            100.0 * f,
            100.0 * full
        ),
    ))
}

fn pi_rotation() -> Result<(bool, String), String> {
    let pulse = RotationPulse::pi(7.0);
    let mut e = EmitterParams::reference();
    let a = rotation_fidelity_total(&pulse, &e).map_err(err)?;
    e.t2_star = 21.4;
    let b = rotation_fidelity_total(&pulse, &e).map_err(err)?;
    Ok((
        within(100.0 * a, 91.6, 0.1) && within(100.0 * b, 91.2, 0.1),
        format!(
            "F_pi = {:.3}% at T2*=23.2 (target 91.6), {:.3}% at T2*=21.4 (target 91.2)",
            100.0 * a,
            100.0 * b
        ),
    ))
}

fn spin_flip_gate(readout: bool) -> Result<f64, String> {
    let mut ch = ChannelConfig::none();
    ch.enable_spin_flip = true;
    ch.enable_readout_error = readout;
    ch.amplitudes = AmplitudeSource::ideal();
    let out = run_gate(
        &EmitterParams::reference(),
        &PulseParams::reference(),
        &ch,
        0.0,
    )
    .map_err(err)?;
    bell_fidelity(&out.rho_heralded, BellTarget::PhiMinus, 0.0).map_err(err)
}

fn spin_flip_only() -> Result<(bool, String), String> {
    let f = spin_flip_gate(false)?;
    Ok((
        within(100.0 * f, 82.94, 0.05),
        format!("F_kappa = {:.4}% (target 82.94 +/- 0.05)", 100.0 * f),
    ))
}

fn spin_flip_readout() -> Result<(bool, String), String> {
    let f = spin_flip_gate(true)?;
    Ok((
        within(100.0 * f, 80.24, 0.05),
        format!("F_kappa,R = {:.4}% (target 80.24 +/- 0.05)", 100.0 * f),
    ))
}

fn driving_dephasing() -> Result<(bool, String), String> {
    let p = scattering_success(GAMMA, 0.05, 0.05, CYCLICITY);
    let infid = 1.0 - driving_dephasing_fidelity(0.0732, p);
    Ok((
        within(100.0 * infid, 6.34, 0.05),
        format!("1 - F_nbar = {:.4}% (target 6.34 +/- 0.05)", 100.0 * infid),
    ))
}

fn overall_budget() -> Result<(bool, String), String> {
    let b = fidelity_budget(
        &EmitterParams::reference(),
        &PulseParams::reference(),
        &ChannelConfig::reference(),
        0.0,
    )
    .map_err(err)?;
    let gap = 100.0 * (b.exact - b.product).abs();
    Ok((
        within(100.0 * b.product, 72.3, 0.3) && gap < 1.5,
        format!(
            "product = {:.3}% (target 72.3 +/- 0.3), exact = {:.3}%, gap = {:.3} pp (< 1.5)",
            100.0 * b.product,
            100.0 * b.exact,
            gap
        ),
    ))
}

fn success_closed_form() -> Result<(bool, String), String> {
    let pulse = PulseParams::reference();
    let p = success_probability_closed_form(
        GAMMA,
        GAMMA_D,
        0.05,
        pulse.sigma_o,
        pulse.sigma_e,
        delta_h(),
        CYCLICITY,
    );
    Ok((
        within(100.0 * p, 33.3, 0.3),
        format!("P_s = {:.3}% (target 33.3 +/- 0.3)", 100.0 * p),
    ))
}

fn visibility() -> Result<(bool, String), String> {
    let e = EmitterParams::reference();
    let v = photon_visibility(&e, &PulseParams::reference()).map_err(err)?;
    let back = dephasing_from_visibility(v.linear, GAMMA);
    // Straight-line extraction from a synthetic n-bar series.
    let points: Vec<VisibilityPoint> = [0.0, 0.05, 0.1, 0.2]
        .iter()
        .map(|&n| VisibilityPoint {
            n_bar: n,
            visibility: v.linear - 0.5 * n,
            error: Some(0.01),
        })
        .collect();
    let fit = extract_dephasing(&points, GAMMA).map_err(err)?;
    Ok((
        within(v.linear, 0.926, 0.001) && within(back, 0.092, 0.001) && within(fit.gamma_d, 0.092, 0.001),
        format!(
            "V_p = {:.5} (exact spectral {:.5}), gamma_d from V_p = {:.5}, from line fit = {:.5}",
            v.linear, v.exact, back, fit.gamma_d
        ),
    ))
}

fn photon_number() -> Result<(bool, String), String> {
    let n = mean_photon_number_from(0.0496, 0.2976, 2.0, GAMMA);
    let nc = critical_photon_number(GAMMA_D, GAMMA, 0.95);
    Ok((
        within(n, 0.0732, 0.0002) && within(nc, 0.2976, 0.0005),
        format!("n_bar = {n:.5} (target 0.0732), n_c = {nc:.5} (target 0.2976)"),
    ))
}

fn contrast_fidelity() -> Result<(bool, String), String> {
    let c = Contrasts::from_pz(0.907, -0.588, 0.573).map_err(err)?;
    let f = fidelity_from_contrasts(&c);
    Ok((
        within(f, 0.7438, 0.0001),
        format!("F_Bell = {f:.5} (target 0.7438 +/- 0.0001)"),
    ))
}

fn random_density(rng: &mut ChaCha8Rng) -> JointDensity {
    let g = CMatrix4::from_fn(|_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = g * g.adjoint();
    let tr = m.trace().re;
    JointDensity::new(m / Complex64::new(tr, 0.0), true).expect("valid random state")
}

fn random_emitter(rng: &mut ChaCha8Rng) -> EmitterParams {
    let (g, gd, c) = (rng.gen_range(0.5..5.0), rng.gen_range(0.0..0.2), rng.gen_range(2.0..50.0));
    let rad = g - 2.0 * gd;
    let l1 = rng.gen_range(0.0..0.9) * rad * c / (c + 1.0);
    let l2 = rng.gen_range(0.0..0.9) * rad / (c + 1.0);
    let e = EmitterParams {
        kappa_flip: rng.gen_range(0.0..0.1),
        t2_star: rng.gen_range(10.0..100.0),
        ..EmitterParams::from_linewidth(g, gd, l1, l2, c, rng.gen_range(5.0..60.0))
    };
    e.validate().expect("valid random emitter");
    e
}

fn channel_invariants() -> Result<(bool, String), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    let mut worst_eig: f64 = 0.0;
    let draws = 1000;
    for _ in 0..draws {
        let emitter = random_emitter(&mut rng);
        let rho = random_density(&mut rng);
        let mut g = GateEvolution::from_state(&rho, DepolarizingModel::TracePreserving);

        let half = RotationPulse::half_pi(rng.gen_range(1.0..5.0));
        let pi = RotationPulse::pi(rng.gen_range(2.0..10.0));
        let noise_half = rotation_noise(&half, &emitter).map_err(err)?;
        let noise_pi = rotation_noise(&pi, &emitter).map_err(err)?;

        let mut check = |g: &GateEvolution, expect: Option<f64>, bound: f64| {
            let tr = g.trace();
            let eig = min_eigenvalue(g.matrix());
            worst_eig = worst_eig.min(eig);
            let trace_ok = match expect {
                Some(t) => (tr - t).abs() < 1e-12,
                None => tr <= bound + 1e-12,
            };
            if !trace_ok || eig < -1e-12 {
                violations += 1;
            }
            tr
        };

        g.rotate(&half, Some(noise_half));
        check(&g, Some(1.0), 1.0);
        let delta = rng.gen_range(-3.0..3.0) * emitter.gamma_total_deph();
        let a = coefficients_at(&emitter, delta);
        let inj = dephasing_jump_probability_for(&emitter) * lineshape(&emitter, delta);
        g.scatter(TimeBin::Early, BinAmplitudes::new(a.r1, a.r1_off), inj)
            .map_err(err)?;
        let t1 = check(&g, None, 1.0);
        g.rotate(&pi, Some(noise_pi));
        check(&g, Some(t1), t1);
        g.scatter(TimeBin::Late, BinAmplitudes::new(a.r1, a.r1_off), inj)
            .map_err(err)?;
        let t2 = check(&g, None, t1);
        g.rotate(&half, Some(noise_half));
        check(&g, Some(t2), t2);
        g.phase_damp(rng.gen_range(0.0..1.0));
        check(&g, Some(t2), t2);
        g.readout(rng.gen_range(0.5..1.0));
        check(&g, Some(t2), t2);
    }
    Ok((
        violations == 0,
        format!("{violations} violations over {draws} draws (min eigenvalue {worst_eig:.2e})"),
    ))
}

fn convergence_order() -> Result<(bool, String), String> {
    let e = EmitterParams::ideal(GAMMA, delta_h());
    let ladder = [0.05, 0.025, 0.0125, 0.00625];
    let mut residuals = Vec::new();
    for s in ladder {
        let pulse = PulseParams::from_bandwidth(s * GAMMA, 0.0, 0.0, 0.0);
        let q = overlap_integrals(&e, &pulse, OverlapMethod::Quadrature).map_err(err)?;
        let p = overlap_integrals(&e, &pulse, OverlapMethod::Perturbative).map_err(err)?;
        residuals.push((q.i_res - p.i_res).abs());
    }
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((
        min >= 3.8,
        format!("observed orders {orders:.3?} (min {min:.3}, need >= 3.8)"),
    ))
}

fn fidelity_identity() -> Result<(bool, String), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let mut p: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let bound = (p[1] * p[2]).sqrt();
        let c = Complex64::from_polar(rng.gen_range(0.0..1.0) * bound, rng.gen_range(0.0..2.0 * PI));
        let mut m = CMatrix4::zeros();
        for k in 0..4 {
            m[(k, k)] = Complex64::new(p[k], 0.0);
        }
        m[(1, 2)] = c;
        m[(2, 1)] = c.conj();
        let rho = JointDensity::new(m, true).map_err(err)?;
        let via = fidelity_from_contrasts(&contrasts_from_state(&rho).map_err(err)?);
        let direct = bell_fidelity(&rho, BellTarget::PhiMinus, 0.0).map_err(err)?;
        worst = worst.max((via - direct).abs());
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.2e} over 500 X-form states")))
}

fn werner_curve() -> Result<(bool, String), String> {
    let phi = pure_4(&BellTarget::PhiMinus.vector(0.0));
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let p = k as f64 / 49.0;
        let m = phi * Complex64::new(p, 0.0) + CMatrix4::identity() * Complex64::new((1.0 - p) / 4.0, 0.0);
        let c = concurrence(&JointDensity::new(m, true).map_err(err)?).map_err(err)?;
        worst = worst.max((c - (0.0f64).max((3.0 * p - 1.0) / 2.0)).abs());
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.2e} over 50 Werner states")))
}

fn bootstrap_scaling() -> Result<(bool, String), String> {
    let probs = [0.05, 0.45, 0.45, 0.05];
    let (mx, my) = (-0.6, 0.6);
    let mut scaled = Vec::new();
    let mut detail = Vec::new();
    for (k, n) in [1e3, 1e4, 1e5].iter().enumerate() {
        let half = |m: f64| ((n * (1.0 + m) / 2.0).round() as u64, (n * (1.0 - m) / 2.0).round() as u64);
        let (xp, xm) = half(mx);
        let (yp, ym) = half(my);
        let counts = CoincidenceCounts {
            e_up: (n * probs[0]) as u64,
            e_down: (n * probs[1]) as u64,
            l_up: (n * probs[2]) as u64,
            l_down: (n * probs[3]) as u64,
            mid_x_plus: xp,
            mid_x_minus: xm,
            mid_y_plus: yp,
            mid_y_minus: ym,
        };
        let est = bootstrap_concurrence(&counts, None, 4000, 100 + k as u64).map_err(err)?;
        scaled.push(est.std * n.sqrt());
        detail.push(format!("N={n:.0}: C={:.4} std={:.2e}", est.point, est.std));
    }
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = max / min - 1.0;
    Ok((
        spread <= 0.15,
        format!("{}; std*sqrt(N) spread {:.1}% (<= 15%)", detail.join(", "), 100.0 * spread),
    ))
}

fn heralding_immunity() -> Result<(bool, String), String> {
    let e = EmitterParams::reference();
    let base = PulseParams::reference();
    let f0 = conditional_fidelity(&e, &base).map_err(err)?;
    let p0 = success_probability(&e, &base).map_err(err)?.integral;
    let mut ok = true;
    let mut detail = format!("F0 = {:.4}%, P_s0 = {:.4}%", 100.0 * f0, 100.0 * p0);
    for sign in [-1.0, 1.0] {
        let pulse = PulseParams {
            detuning: sign * base.sigma_e,
            ..base
        };
        let f = conditional_fidelity(&e, &pulse).map_err(err)?;
        let p = success_probability(&e, &pulse).map_err(err)?.integral;
        ok &= 100.0 * (f - f0).abs() < 0.1 && p < p0;
        detail.push_str(&format!(
            "; detuning {:+.2}: dF = {:+.4} pp, P_s = {:.4}%",
            pulse.detuning,
            100.0 * (f - f0),
            100.0 * p
        ));
    }
    Ok((ok, detail))
}

fn main() {
    let mut r = Report { failures: 0 };
    r.run("1", "conditional fidelity", conditional_formula);
    r.run("2", "pi-rotation fidelity", pi_rotation);
    r.run("3", "spin-flip gate fidelity", spin_flip_only);
    r.run("4", "spin-flip + readout fidelity", spin_flip_readout);
    r.run("5", "driving dephasing infidelity", driving_dephasing);
    r.run("6", "overall fidelity budget", overall_budget);
    r.run("7", "success probability", success_closed_form);
    r.run("8", "photon visibility", visibility);
    r.run("9", "photon number", photon_number);
    r.run("10", "measured-contrast fidelity", contrast_fidelity);
    r.run("11a", "channel CP/trace invariants", channel_invariants);
    r.run("11b", "overlap convergence order", convergence_order);
    r.run("11c", "fidelity identity", fidelity_identity);
    r.run("11d", "Werner concurrence", werner_curve);
    r.run("11e", "bootstrap 1/sqrt(N) scaling", bootstrap_scaling);
    r.run("12", "heralding immunity", heralding_immunity);
    println!(
        "acceptance: {} failure(s)",
        r.failures
    );
    if r.failures > 0 {
        std::process::exit(1);
    }
}
