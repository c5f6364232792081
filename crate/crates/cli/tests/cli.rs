use std::path::Path;
use std::process::{Command, Output};

fn qlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlink")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error record");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

const SWAP: &str = "[gate]\ntarget = \"swap\"\ndt_ns = 0.02\n\n[sweep]\ntrajectory_points = 50\n";

#[test]
fn dynamics_transfers_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWAP);
    let out_dir = dir.path().join("out");
    let out = qlink(&["dynamics", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    for key in ["gate", "duration_ns", "loss", "leakage", "fidelity", "params", "runtime_s"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(summary["gate"], "swap");
    assert!((summary["duration_ns"].as_f64().unwrap() - 35.005).abs() < 1e-2);
    assert!(summary["params"]["final_pop_q2"].as_f64().unwrap() >= 0.99);

    let csv = std::fs::read_to_string(out_dir.join("dynamics.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time_ns,pop_q1,pop_q2,pop_m1,pop_m2,pop_m3,leak_total");
    assert_eq!(lines.count(), 51);
}

#[test]
fn identical_runs_give_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWAP);
    let read = |name: &str| {
        let d = dir.path().join(name);
        let out = qlink(&["dynamics", "--config", &config, "--out", d.to_str().unwrap(), "--seed", "5"]);
        assert!(out.status.success());
        std::fs::read(d.join("dynamics.csv")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn config_errors_are_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[gate]\ntarget = \"swap\"\nfoo = 1\n", "gate.foo", Some(3)),
        ("[device]\nfsr_ghz = 0.4\n[gate]\ntarget = \"swap\"\n", "device.fsr_ghz", Some(2)),
        ("[gate]\ntarget = \"swap\"\n[noise]\nmode_t1_us = -3.0\n", "noise.mode_t1_us", Some(4)),
    ];
    for (text, key, line) in cases {
        let config = write_config(dir.path(), text);
        let out = qlink(&["dynamics", "--config", &config, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        let record = stderr_json(&out);
        assert_eq!(record["error"]["kind"], "config");
        assert_eq!(record["error"]["key"], key, "{record}");
        assert_eq!(record["error"]["line"].as_u64().map(|l| l as usize), line);
    }
}

#[test]
fn missing_gate_section_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[device]\nfsr_mhz = 100.0\n");
    let out = qlink(&["dynamics", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["error"]["message"].as_str().unwrap().contains("gate"));
}

#[test]
fn scenario_without_its_section_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWAP.replace("[sweep]\ntrajectory_points = 50\n", "").as_str());
    let out = qlink(&["fsr-sweep", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["key"], "sweep");
}

#[test]
fn unknown_scenario_and_missing_file() {
    let out = qlink(&["teleport", "--config", "nowhere.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
    let out = qlink(&["dynamics", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");
}

#[test]
fn error_rate_reports_split_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[gate]\ntarget = \"swap\"\nexpansion = \"first_order\"\ndetuning_mhz = [-0.26, -0.26]\ndt_ns = 0.02\n\n[sweep]\nrepetitions = 10\n\n[output]\nformats = [\"json\"]\n";
    let config = write_config(dir.path(), text);
    let out_dir = dir.path().join("out");
    let out = qlink(&["error-rate", "--config", &config, "--out", out_dir.to_str().unwrap(), "--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.join("error_rate.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let eps = &summary["params"]["epsilon"];
    assert!(eps["total"].as_f64().unwrap() < 1e-3, "{eps}");
    assert_eq!(eps["dissipation"].as_f64().unwrap(), 0.0);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let c = qlink_cli::config::parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = qlink_cli::config::parse_config(&qlink_cli::config::serialize_config(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        seen += 1;
    }
    assert!(seen >= 7);
}
