//! Subcommand implementations: thin dispatchers over the core library.

use std::path::Path;

use rayon::prelude::*;
use spingate_core::calibration::{
    extract_dephasing, fit_saturation, mean_photon_number, SaturationGauge,
};
use spingate_core::metrics::{
    bootstrap_concurrence, dephasing_from_visibility, fidelity_budget, photon_visibility,
};
use spingate_core::run_gate;

use crate::config::{ConfigFile, ModelConfig};
use crate::data;
use crate::error::CliError;
use crate::report::{
    fmt_num, ChannelFactor, ConcurrenceReport, Provenance, Rendered, RunReport,
    SaturationReport, SweepReport, SweepRow, VisibilityReport,
};

fn row(key: &str, value: f64) -> (String, String) {
    (key.to_string(), fmt_num(value))
}

pub fn budget_report(cfg: &ConfigFile, model: &ModelConfig, prov: Provenance) -> Result<RunReport, CliError> {
    let b = fidelity_budget(&model.emitter, &model.pulse, &model.channels, model.theta_p)?;
    let outcome = run_gate(&model.emitter, &model.pulse, &model.channels, model.theta_p)?;
    Ok(RunReport {
        inputs: cfg.clone(),
        channel_multipliers: outcome
            .budget
            .iter()
            .map(|(channel, multiplier)| ChannelFactor {
                channel: channel.clone(),
                multiplier: *multiplier,
            })
            .collect(),
        conditional_fidelity: b.conditional,
        overall_fidelity: b.exact,
        success_prob: b.success_prob,
        concurrence: None,
        budget: b,
        provenance: prov,
    })
}

pub fn budget(cfg: &ConfigFile, text: &str, seed: Option<u64>) -> Result<Rendered, CliError> {
    let model = cfg.resolve()?;
    let report = budget_report(cfg, &model, Provenance::new(Some(text), None, seed))?;
    let b = &report.budget;
    let mut table = vec![
        row("dephasing_off_resonant", b.dephasing_off_resonant),
        row("spin_flip_readout", b.spin_flip_readout),
        row("driving_dephasing", b.driving_dephasing),
        row("product", b.product),
        row("exact", b.exact),
        row("discrepancy", b.discrepancy),
        row("conditional_fidelity", b.conditional),
        row("success_prob", b.success_prob),
        row("success_prob_closed_form", b.success_prob_closed_form),
        row("m_x", b.contrasts.m_x),
        row("m_y", b.contrasts.m_y),
        row("m_z", b.contrasts.m_z),
    ];
    for f in &report.channel_multipliers {
        table.push(row(&format!("channel.{}", f.channel), f.multiplier));
    }
    Ok(Rendered::key_value(&report, table))
}

/// Evenly spaced grid; a zero-length range gives a single point.
pub fn grid(from: f64, to: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if !from.is_finite() || !to.is_finite() {
        return Err(CliError::Config("sweep bounds must be finite".into()));
    }
    if steps == 0 {
        return Err(CliError::Config("--steps must be at least 1".into()));
    }
    if from == to || steps == 1 {
        return Ok(vec![from]);
    }
    let h = (to - from) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i == steps - 1 { to } else { from + h * i as f64 })
        .collect())
}

fn sweep_point(cfg: &ConfigFile, param: &str, index: usize, value: f64) -> Result<SweepRow, CliError> {
    let model = cfg.with_field(param, value)?.resolve()?;
    let b = fidelity_budget(&model.emitter, &model.pulse, &model.channels, model.theta_p)?;
    let v = photon_visibility(&model.emitter, &model.pulse)?;
    Ok(SweepRow {
        index,
        value,
        fidelity_exact: b.exact,
        fidelity_product: b.product,
        conditional_fidelity: b.conditional,
        success_prob: b.success_prob,
        visibility: v.exact,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    cfg: &ConfigFile,
    text: &str,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    jobs: Option<usize>,
    seed: Option<u64>,
) -> Result<Rendered, CliError> {
    // Reject unknown paths before doing any work.
    cfg.with_field(param, from)?.resolve()?;
    let points = grid(from, to, steps)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, &v)| sweep_point(cfg, param, i, v))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let report = SweepReport {
        inputs: cfg.clone(),
        param: param.to_string(),
        rows,
        provenance: Provenance::new(Some(text), None, seed),
    };
    let table = report
        .rows
        .iter()
        .map(|r| {
            (
                format!("{param}={}", fmt_num(r.value)),
                format!(
                    "F={} F_product={} F_cond={} P_s={} V={}",
                    fmt_num(r.fidelity_exact),
                    fmt_num(r.fidelity_product),
                    fmt_num(r.conditional_fidelity),
                    fmt_num(r.success_prob),
                    fmt_num(r.visibility)
                ),
            )
        })
        .collect();
    Ok(Rendered {
        json: crate::report::to_json(&report),
        table,
        csv_header: SweepRow::HEADER.iter().map(|s| s.to_string()).collect(),
        csv_rows: report.rows.iter().map(SweepRow::cells).collect(),
    })
}

pub fn visibility(
    cfg: &ConfigFile,
    text: &str,
    data_path: Option<&Path>,
    seed: Option<u64>,
) -> Result<Rendered, CliError> {
    let model = cfg.resolve()?;
    let v = photon_visibility(&model.emitter, &model.pulse)?;
    let gamma = model.emitter.gamma_total_deph();
    let (fit, data_bytes) = match data_path {
        Some(p) => {
            let points = data::read_visibility(p)?;
            (Some(extract_dephasing(&points, gamma)?), Some(std::fs::read(p)?))
        }
        None => (None, None),
    };
    let report = VisibilityReport {
        inputs: cfg.clone(),
        visibility_exact: v.exact,
        visibility_linear: v.linear,
        gamma_d_from_linear: dephasing_from_visibility(v.linear, gamma),
        fit,
        provenance: Provenance::new(Some(text), data_bytes.as_deref(), seed),
    };
    let mut table = vec![
        row("visibility_linear", report.visibility_linear),
        row("visibility_exact", report.visibility_exact),
        row("gamma_d_from_linear", report.gamma_d_from_linear),
    ];
    if let Some(f) = &report.fit {
        table.extend([
            row("fit.intercept", f.intercept),
            row("fit.intercept_std", f.intercept_std),
            row("fit.slope", f.slope),
            row("fit.slope_std", f.slope_std),
            row("fit.gamma_d", f.gamma_d),
            row("fit.gamma_d_std", f.gamma_d_std),
        ]);
    }
    Ok(Rendered::key_value(&report, table))
}

pub fn saturation(
    data_path: &Path,
    b2: Option<f64>,
    photon: Option<(f64, &ConfigFile, &str)>,
    seed: Option<u64>,
) -> Result<Rendered, CliError> {
    let (up, down) = data::read_saturation(data_path)?;
    let gauge = match b2 {
        Some(v) => SaturationGauge::FixedB2(v),
        None => SaturationGauge::FromInitialGuess,
    };
    let fit = fit_saturation(&up, gauge)?;
    let (power_nw, photon_flux, text) = match photon {
        Some((power, cfg, text)) => {
            let model = cfg.resolve()?;
            let flux = mean_photon_number(fit.b1, fit.b2, &model.emitter, &model.pulse, power)?;
            (Some(power), Some(flux), Some(text))
        }
        None => (None, None, None),
    };
    let bytes = std::fs::read(data_path)?;
    let report = SaturationReport {
        fit,
        points_used: up.len(),
        background_points: down.len(),
        power_nw,
        photon_flux,
        provenance: Provenance::new(text, Some(&bytes), seed),
    };
    let mut table = vec![
        row("b1", fit.b1),
        row("b2", fit.b2),
        row("b3", fit.b3),
        row("b1_b2", fit.saturation_scale()),
        row("b3_over_b2", fit.asymptote()),
        row("residual_norm", fit.residual_norm),
        ("points_used".into(), up.len().to_string()),
    ];
    if let Some(f) = &report.photon_flux {
        table.extend([
            row("s_param", f.s_param),
            row("n_crit", f.n_crit),
            row("n_flux", f.n_flux),
            row("n_bar", f.n_bar),
            row("scale_per_nw", f.scale_per_nw),
        ]);
    }
    Ok(Rendered::key_value(&report, table))
}

pub fn concurrence(
    counts_path: &Path,
    contrasts: Option<(f64, f64)>,
    resamples: usize,
    seed: u64,
) -> Result<Rendered, CliError> {
    let counts = data::read_counts(counts_path)?;
    let (m_x, m_y) = counts.equatorial_contrasts().or(contrasts).ok_or_else(|| {
        CliError::Data("counts have no middle-window rows; pass --mx and --my".into())
    })?;
    let est = bootstrap_concurrence(&counts, Some((m_x, m_y)), resamples, seed)?;
    let bytes = std::fs::read(counts_path)?;
    let report = ConcurrenceReport {
        m_x,
        m_y,
        z_total: counts.z_total(),
        bootstrap: est,
        provenance: Provenance::new(None, Some(&bytes), Some(seed)),
    };
    let table = vec![
        row("concurrence", est.point),
        row("bootstrap_mean", est.mean),
        row("bootstrap_std", est.std),
        ("resamples_used".into(), est.n_used.to_string()),
        row("m_x", m_x),
        row("m_y", m_y),
    ];
    Ok(Rendered::key_value(&report, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_report_round_trips() {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ideal.toml")).unwrap();
        let cfg = ConfigFile::parse(&text).unwrap();
        let model = cfg.resolve().unwrap();
        let report = budget_report(&cfg, &model, Provenance::new(Some(&text), None, Some(5))).unwrap();
        let back: RunReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(back, report);
        assert!((0.0..=1.0).contains(&report.overall_fidelity));
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(grid(0.0, 0.03, 4).unwrap(), vec![0.0, 0.01, 0.02, 0.03]);
        assert_eq!(grid(0.5, 0.5, 10).unwrap(), vec![0.5]);
        assert!(grid(0.0, 1.0, 0).is_err());
        let g = grid(1.0, 0.0, 5).unwrap();
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }
}
