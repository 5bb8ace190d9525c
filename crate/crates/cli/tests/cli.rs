//! Runs the `spingate` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spingate"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let out = run(&all);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn num(v: &Value, path: &[&str]) -> f64 {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    cur.as_f64().unwrap_or_else(|| panic!("{path:?} missing in {v}"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn reference_budget_rows() {
    let v = json(&["budget"]);
    let b = &v["budget"];
    assert!((num(b, &["dephasing_off_resonant"]) - 0.962).abs() < 5e-4);
    assert!((num(b, &["spin_flip_readout"]) - 0.8024).abs() < 5e-4);
    assert!((num(b, &["driving_dephasing"]) - 0.9366).abs() < 5e-4);
    assert!((num(b, &["product"]) - 0.723).abs() < 3e-3);
    assert!(num(b, &["discrepancy"]).abs() < 0.015);
    let f = num(&v, &["overall_fidelity"]);
    assert!((0.0..=1.0).contains(&f));
}

#[test]
fn ideal_budget_is_perfect() {
    let cfg = configs().join("ideal.toml");
    let v = json(&["budget", "--config", cfg.to_str().unwrap()]);
    for key in ["dephasing_off_resonant", "spin_flip_readout", "driving_dephasing", "product", "exact"] {
        assert!((num(&v["budget"], &[key]) - 1.0).abs() < 1e-12, "{key}");
    }
    assert!((num(&v, &["success_prob"]) - 0.5).abs() < 1e-12);
}

fn strip_timestamp(s: &[u8]) -> String {
    String::from_utf8_lossy(s)
        .lines()
        .filter(|l| !l.contains("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn reports_are_deterministic() {
    let a = run(&["budget", "--json", "--seed", "7"]);
    let b = run(&["budget", "--json", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(strip_timestamp(&a.stdout), strip_timestamp(&b.stdout));

    let dir = tempfile::tempdir().unwrap();
    let counts = write(
        dir.path(),
        "counts.csv",
        "outcome,counts\ne_up,40\ne_down,430\nl_up,410\nl_down,60\nmid_x_plus,120\nmid_x_minus,380\nmid_y_plus,370\nmid_y_minus,130\n",
    );
    let c = counts.to_str().unwrap();
    let x = run(&["concurrence", "--counts", c, "--seed", "3", "--resamples", "2000", "--json", "--jobs", "1"]);
    let y = run(&["concurrence", "--counts", c, "--seed", "3", "--resamples", "2000", "--json", "--jobs", "4"]);
    assert!(x.status.success(), "{}", String::from_utf8_lossy(&x.stderr));
    assert_eq!(strip_timestamp(&x.stdout), strip_timestamp(&y.stdout));
}

#[test]
fn echoed_inputs_reparse_to_same_report() {
    let v = json(&["budget"]);
    let inputs: toml::Value = serde_json::from_value(v["inputs"].clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "echo.toml", &toml::to_string(&inputs).unwrap());
    let w = json(&["budget", "--config", cfg.to_str().unwrap()]);
    assert_eq!(v["inputs"], w["inputs"]);
    assert_eq!(v["budget"], w["budget"]);
}

fn sweep_fidelities(cfg: &Path, from: &str, to: &str) -> Vec<f64> {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--param",
        "emitter.kappa_flip",
        "--from",
        from,
        "--to",
        to,
        "--steps",
        "2",
        "--csv",
        csv_path.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "fidelity_exact").unwrap();
    reader
        .records()
        .map(|r| r.unwrap()[col].parse().unwrap())
        .collect()
}

#[test]
fn spin_flip_sweep_reproduces_reference_points() {
    // Spin flips alone at the measured rate.
    let f = sweep_fidelities(&configs().join("spin_flip_only.toml"), "0.0", "0.021");
    assert_eq!(f.len(), 2);
    assert!((f[1] - 0.8294).abs() < 5e-4, "{}", f[1]);
    assert!(f[0] > f[1]);

    // Ten times slower spin flips, with readout error included.
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("spin_flip_only.toml")).unwrap();
    let cfg = write(dir.path(), "sfr.toml", &text.replace("readout_error = false", "readout_error = true"));
    let f = sweep_fidelities(&cfg, "0.0021", "0.021");
    assert!((f[0] - 0.9316).abs() < 5e-4, "{}", f[0]);
    assert!((f[1] - 0.8024).abs() < 5e-4, "{}", f[1]);
}

#[test]
fn zero_length_sweep_matches_budget() {
    let cfg = configs().join("spin_flip_only.toml");
    let c = cfg.to_str().unwrap();
    let s = json(&["sweep", "--config", c, "--param", "emitter.kappa_flip", "--from", "0.021", "--to", "0.021", "--steps", "5"]);
    let rows = s["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    let b = json(&["budget", "--config", c]);
    assert_eq!(rows[0]["fidelity_exact"], b["budget"]["exact"]);
}

#[test]
fn sweep_rows_follow_grid_order() {
    let cfg = configs().join("ideal.toml");
    let s = json(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--param", "pulse.sigma_o", "--from", "0.05", "--to", "0.5",
        "--steps", "6", "--jobs", "3",
    ]);
    let rows = s["rows"].as_array().unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] < w[1]));
    let idx: Vec<u64> = rows.iter().map(|r| r["index"].as_u64().unwrap()).collect();
    assert_eq!(idx, (0..6).collect::<Vec<_>>());
}

#[test]
fn visibility_and_dephasing_fit() {
    let v = json(&["visibility"]);
    assert!((num(&v, &["visibility_linear"]) - 0.926).abs() < 1e-3);
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "vis.csv",
        "n_bar,visibility,visibility_err\n0.0,0.926,0.004\n0.05,0.90,0.004\n0.1,0.874,0.004\n",
    );
    let v = json(&["visibility", "--data", data.to_str().unwrap()]);
    assert!((num(&v, &["fit", "gamma_d"]) - 0.09176).abs() < 1e-6);
    let s = num(&v, &["fit", "intercept_std"]);
    assert!((num(&v, &["fit", "gamma_d_std"]) - 2.48 / 2.0 * s).abs() < 1e-9);
}

#[test]
fn saturation_fit_with_pinned_b2() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("power_nw,counts,spin_state\n");
    for p in [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let i = 7.7e4 * 0.64 * p / (1.0 + 1.03 * 0.64 * p);
        body.push_str(&format!("{p},{i},up\n{p},{},down\n", 0.02 * i));
    }
    let data = write(dir.path(), "sat.csv", &body);
    let cfg = configs().join("reference.toml");
    let v = json(&[
        "saturation", "--data", data.to_str().unwrap(), "--b2", "1.03", "--power", "0.0753", "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!((num(&v, &["fit", "b1"]) - 0.64).abs() < 1e-6);
    assert!((num(&v, &["fit", "b2"]) - 1.03).abs() < 1e-12);
    assert!((num(&v, &["fit", "b3"]) / 7.7e4 - 1.0).abs() < 1e-6);
    assert_eq!(v["background_points"].as_u64(), Some(9));
    // S = b1 b2 P = 0.0496 at 0.0753 nW.
    assert!((num(&v, &["photon_flux", "n_bar"]) - 0.0732).abs() < 2e-4);
}

#[test]
fn bell_counts_give_unit_concurrence() {
    let dir = tempfile::tempdir().unwrap();
    let counts = write(
        dir.path(),
        "bell.csv",
        "outcome,counts\ne_up,0\ne_down,5000\nl_up,5000\nl_down,0\nmid_x_plus,0\nmid_x_minus,5000\nmid_y_plus,5000\nmid_y_minus,0\n",
    );
    let v = json(&["concurrence", "--counts", counts.to_str().unwrap(), "--resamples", "500"]);
    assert!((num(&v, &["bootstrap", "point"]) - 1.0).abs() < 1e-12);
    assert!(num(&v, &["bootstrap", "mean"]) > 0.99);
    assert!(num(&v, &["bootstrap", "std"]) < 0.01);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("reference.toml")).unwrap();
    let bad = write(dir.path(), "bad.toml", &text.replace("[readout]", "[readout]\nunknown_key = 1"));
    let out = run(&["budget", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_key"));

    let out = run(&["sweep", "--param", "emitter.nope", "--from", "0", "--to", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["budget", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(2));

    let malformed = write(dir.path(), "m.csv", "outcome,counts\ne_up,12\ne_down,abc\n");
    let out = run(&["concurrence", "--counts", malformed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    let flat = write(dir.path(), "flat.csv", "power_nw,counts\n1,1\n1,2\n1,3\n1,4\n");
    let out = run(&["saturation", "--data", flat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    let out = run(&["budget", "--steps"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_output_for_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("ideal.toml");
    let path = dir.path().join("budget.csv");
    let out = run(&["budget", "--config", cfg.to_str().unwrap(), "--csv", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("quantity,value\n"));
    assert!(text.contains("product,1\n"));
}
