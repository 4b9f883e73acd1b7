use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::{json, Value};

use coupled_cavity::cli::{run_command, ColumnData, Command as Sub, ResultBundle, RunOptions};
use coupled_cavity::config::{emit_config, parse_config};

fn cavsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, config: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn single_decay(kappa_i: f64, kappa_e: f64) -> Value {
    json!({
        "system": "direct",
        "units": "rad_per_s",
        "cavities": [{"omega": 10.0, "kappa_i": kappa_i, "kappa_e": kappa_e}],
        "initial_state": {"amplitudes": [[1.0, 0.0]]},
        "protocol": "free_decay"
    })
}

fn cable_pair() -> Value {
    json!([
        {"omega": 10.0, "kappa_i": 0.8, "kappa_e": 0.2, "gamma": 0.2},
        {"omega": 10.0, "kappa_i": 0.6, "kappa_e": 0.2, "gamma": 0.2}
    ])
}

#[test]
fn simulate_single_cavity_photon_number_is_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "decay.json", &single_decay(0.7, 0.3));
    let out = cavsim(&["--config", &config, "simulate"]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header, ["time_s", "re_a1", "im_a1", "n1"]);
    assert_eq!(rows.len(), 2000);
    for row in rows {
        let t: f64 = row[0].parse().unwrap();
        let n: f64 = row[3].parse().unwrap();
        assert!((n - (-t).exp()).abs() < 1e-12);
    }
}

#[test]
fn simulate_validate_reports_propagator_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "decay.json", &single_decay(0.5, 0.5));
    let out = cavsim(&["--config", &config, "--validate", "--format", "json", "simulate"]);
    let bundle = stdout_json(&out);
    let dev = bundle["metadata"]["extras"]["validation_max_relative_deviation"].as_f64().unwrap();
    assert!(dev < 1e-8, "{dev}");
}

#[test]
fn zeta_subcommand_prints_the_tunneling_phase() {
    let out = cavsim(&["zeta", "--theta", "0.1pi", "--gamma0l0", "0.02"]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let col = header.iter().position(|h| h == "zeta_over_pi").unwrap();
    let zeta: f64 = rows[0][col].parse().unwrap();
    assert!((zeta - 1.4902).abs() < 5e-4, "{zeta}");
}

#[test]
fn eigen_on_a_symmetric_resonant_pair_splits_by_twice_the_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let g = 0.35;
    let config = json!({
        "system": "direct",
        "units": "rad_per_s",
        "cavities": [
            {"omega": 10.0, "kappa_i": 0.3, "kappa_e": 0.1},
            {"omega": 10.0, "kappa_i": 0.3, "kappa_e": 0.1}
        ],
        "coupling": {"type": "direct", "g": g},
        "initial_state": {"alpha": 1.0},
        "protocol": "free_decay"
    });
    let path = write_config(dir.path(), "pair.json", &config);
    let bundle = stdout_json(&cavsim(&["--config", &path, "--format", "json", "eigen"]));
    let splitting = bundle["metadata"]["extras"]["splitting"].as_f64().unwrap();
    assert!((splitting - 2.0 * g).abs() < 1e-12, "{splitting}");
}

#[test]
fn chain_reports_lifetimes_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "system": "chain",
        "units": "rad_per_s",
        "chain": {
            "n": 2, "g": 0.2, "kappa_i": 1.0, "kappa_e_first": 0.2, "kappa_e_last": 0.2,
            "omega": 10.0, "n_values": [2, 3, 4, 5]
        },
        "drive": {"port": 0},
        "protocol": "steady_decay"
    });
    let path = write_config(dir.path(), "chain.json", &config);
    let bundle = stdout_json(&cavsim(&["--config", &path, "--format", "json", "chain"]));
    let bundle: ResultBundle = serde_json::from_value(bundle).unwrap();
    let table = bundle.table("chain").unwrap();
    let names: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["N", "t1e", "q_equiv"]);
    let Some(ColumnData::Numbers(t)) = table.column("t1e") else { panic!("t1e is numeric") };
    assert!(t.windows(2).all(|w| w[1].unwrap() > w[0].unwrap()));
    assert!(bundle.metadata.extras.contains_key("fit"));
}

#[test]
fn identical_configs_give_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "system": "cable",
        "units": "rad_per_s",
        "cavities": cable_pair(),
        "coupling": {"type": "cable", "theta": "0.1pi", "gamma0l0": 0.02},
        "initial_state": {"alpha": 1.0},
        "protocol": "free_decay",
        "sweep": {"axes": [{"param": "delta_phi", "start": 0, "stop": "2pi", "points": 16}]},
        "time_grid": {"t_max": 8.0, "samples": 500}
    });
    let path = write_config(dir.path(), "sweep.json", &config);
    let outputs: Vec<Vec<u8>> = ["1", "2"]
        .iter()
        .map(|threads| {
            let target = dir.path().join(format!("run{threads}.csv"));
            let out = cavsim(&["--config", &path, "--threads", threads, "--out", target.to_str().unwrap(), "sweep"]);
            assert!(out.status.success());
            std::fs::read(target).unwrap()
        })
        .collect();
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
    assert!(dir.path().join("run1.meta.json").exists());
}

#[test]
fn singular_sweep_point_becomes_an_error_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "system": "cable",
        "units": "rad_per_s",
        "cavities": cable_pair(),
        "coupling": {"type": "cable", "theta": "0.1pi", "gamma0l0": 0.0},
        "initial_state": {"alpha": 1.0, "delta_phi": "1.5pi"},
        "protocol": "free_decay",
        "sweep": {"axes": [{"param": "theta", "values": [0.0, "0.25pi", "0.5pi"]}]},
        "time_grid": {"t_max": 8.0, "samples": 500}
    });
    let path = write_config(dir.path(), "singular.json", &config);
    let out = cavsim(&["--config", &path, "sweep"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let error = header.iter().position(|h| h == "error").unwrap();
    let life = header.iter().position(|h| h == "t1e_cavity2").unwrap();
    assert_eq!(rows.len(), 3);
    assert!(!rows[0][error].is_empty());
    assert!(rows[0][life].is_empty());
    for row in &rows[1..] {
        assert!(row[error].is_empty());
        assert!(row[life].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn failures_exit_nonzero_with_one_json_line_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = single_decay(0.5, 0.5);
    config["colour"] = json!("blue");
    let path = write_config(dir.path(), "bad.json", &config);
    let out = cavsim(&["--config", &path, "simulate"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    let err: Value = serde_json::from_str(lines[0]).unwrap();
    assert!(err["code"].is_string());
    assert!(err["message"].as_str().unwrap().contains("colour"));
    assert!(err["context"].is_object());
}

#[test]
fn missing_config_file_is_reported() {
    let out = cavsim(&["--config", "/nonexistent/config.json", "simulate"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert!(err["code"].is_string());
}

#[test]
fn metadata_echoes_the_resolved_config() {
    let config = parse_config(&single_decay(0.5, 0.5).to_string()).unwrap();
    let bundle = run_command(&config, Sub::Simulate, RunOptions::default()).unwrap();
    let text = serde_json::to_string(&bundle).unwrap();
    let back: ResultBundle = serde_json::from_str(&text).unwrap();
    let echoed = back.metadata.config.unwrap();
    assert_eq!(echoed, config);
    assert_eq!(echoed.time_grid.unwrap().samples, 2000);
}

fn arbitrary_config() -> impl Strategy<Value = Value> {
    let rate = || 0.01..5.0f64;
    let units = prop_oneof![Just("rad_per_s"), Just("hz_angular"), Just("hz_cyclic")];
    (
        units,
        (1.0..20.0f64, rate(), rate(), rate()),
        (1.0..20.0f64, rate(), rate(), rate()),
        prop::bool::ANY,
        (0.05..1.95f64, 0.0..2.0f64, 0.0..3.0f64),
        prop_oneof![Just(0usize), Just(1), Just(2)],
        (1usize..40, 1usize..5000),
    )
        .prop_map(|(units, c1, c2, cable, (theta, gamma0l0, g), protocol, (points, samples))| {
            let cavity = |(omega, ki, ke, gamma): (f64, f64, f64, f64)| {
                if cable {
                    json!({"omega": omega, "kappa_i": ki, "kappa_e": ke, "gamma": gamma})
                } else {
                    json!({"omega": omega, "kappa_i": ki, "kappa_e": ke})
                }
            };
            let mut config = json!({
                "system": if cable { "cable" } else { "direct" },
                "units": units,
                "cavities": [cavity(c1), cavity(c2)],
                "coupling": if cable {
                    json!({"type": "cable", "theta": format!("{theta}pi"), "gamma0l0": gamma0l0})
                } else {
                    json!({"type": "direct", "g": g})
                },
                "time_grid": {"t_max": 5.0, "samples": samples + 1},
            });
            match protocol {
                0 => {
                    config["protocol"] = json!("free_decay");
                    config["initial_state"] = json!({"alpha": 1.0});
                    config["sweep"] = json!({"axes": [{"param": "delta_phi", "start": 0, "stop": "2pi", "points": points}]});
                }
                1 => {
                    config["protocol"] = json!("steady_decay");
                    config["drive"] = json!({"port": 0, "amplitude": [0.5, 0.25]});
                }
                _ => {
                    config["protocol"] = json!("driven");
                    config["drive"] = json!({"port": 1});
                    config["output"] = json!({"path": "out.json", "format": "json"});
                }
            }
            config
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn emitted_config_parses_back_identically(raw in arbitrary_config()) {
        let config = parse_config(&raw.to_string()).unwrap();
        let emitted = emit_config(&config);
        let again = parse_config(&emitted).unwrap();
        prop_assert_eq!(&again, &config);
        prop_assert_eq!(emit_config(&again), emitted);
    }
}
