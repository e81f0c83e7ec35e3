// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fbra_core::cli::{run_to_dir, sweep_with, CliError, EXIT_CONFIG, EXIT_RUNTIME};
use fbra_core::netsim::{Scenario, Topology};
use fbra_core::types::SimTime;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn fbra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbra"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_conf(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.conf");
    fs::write(&p, text).unwrap();
    p
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

const SHORT: &str = "topology = single_var_link\nbottleneck_delay_ms = 50\nduration_s = 20\n";

#[test]
fn run_writes_versioned_outputs() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), SHORT);
    let out = tmp.path().join("out");
    let o = fbra(&["run", "--scenario", conf.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("# fbra-trace v1\n"));
    assert!(trace.contains("SEND_RTP"));
    let ts = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(ts.starts_with('#'));
    assert_eq!(ts.lines().filter(|l| l.contains(",rtp0,")).count(), 20);
    let table = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("rtp0,")));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], "fbra-summary v1");
    assert!(json["rtp"][0]["goodput_bps"].as_f64().unwrap() > 0.0);
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), SHORT);
    let dirs = ["a", "b"].map(|d| tmp.path().join(d));
    for d in &dirs {
        let o = fbra(&["run", "--scenario", conf.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert!(o.status.success());
    }
    for f in ["trace.csv", "summary.json", "timeseries.csv"] {
        assert_eq!(sha(&dirs[0].join(f)), sha(&dirs[1].join(f)), "{f}");
    }
}

#[test]
fn rerun_overwrites_outputs() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), SHORT);
    let out = tmp.path().join("out");
    let args = |d: &str| {
        vec![
            "run".to_owned(),
            "--scenario".into(),
            conf.to_str().unwrap().into(),
            "--out".into(),
            out.to_str().unwrap().into(),
            "--duration".into(),
            d.into(),
        ]
    };
    let run = |d: &str| {
        let a = args(d);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        assert!(fbra(&a).status.success());
        fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    let long = run("10");
    let short = run("2");
    assert!(short.len() < long.len());
    assert_eq!(short.matches("# fbra-trace v1").count(), 1);
}

#[test]
fn missing_topology_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), "seed = 4\n");
    let o = fbra(&["run", "--scenario", conf.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&o.stderr).contains("topology"));
}

#[test]
fn bad_overrides_and_flags_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), SHORT);
    let c = conf.to_str().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    for args in [
        vec!["run", "--scenario", c, "--out", o, "--fec-interval-min", "1"],
        vec!["run", "--scenario", c, "--out", o, "--fec-interval-max", "15"],
        vec!["run", "--scenario", c, "--out", o, "--duration", "-3"],
        vec!["run", "--scenario", c],
        vec!["sweep", "--scenario", c, "--out", o, "--seeds", "0"],
        vec!["explode"],
    ] {
        let r = fbra(&args);
        assert_eq!(r.status.code(), Some(EXIT_CONFIG), "{args:?}");
    }
    let missing = tmp.path().join("nope.conf");
    let r = fbra(&["run", "--scenario", missing.to_str().unwrap(), "--out", o]);
    assert_eq!(r.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn help_exits_cleanly() {
    let o = fbra(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("sweep"));
}

#[test]
fn sweep_writes_per_seed_dirs_and_aggregate() {
    let tmp = TempDir::new().unwrap();
    let conf = write_conf(tmp.path(), SHORT);
    let out = tmp.path().join("sw");
    let o = fbra(&["sweep", "--scenario", conf.to_str().unwrap(), "--seeds", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for k in 1..=3 {
        assert!(out.join(format!("seed-{k}/trace.csv")).exists());
    }
    let agg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["seeds"], serde_json::json!([1, 2, 3]));
    assert_eq!(agg["metrics"]["rtp0.goodput_bps"]["n"], 3);
    assert_eq!(agg["failed_seeds"], serde_json::json!([]));
}

#[test]
fn single_seed_sweep_has_zero_spread() {
    let tmp = TempDir::new().unwrap();
    let s = Scenario::preset(Topology::SingleVarLink, 50).with_duration(SimTime::from_secs(10));
    let agg = sweep_with(&s, 1, tmp.path(), run_to_dir).unwrap();
    assert!(!agg.metrics.is_empty());
    assert!(agg.metrics.values().all(|st| st.std == 0.0 && st.n == 1));
}

#[test]
fn failing_seed_keeps_the_others() {
    let tmp = TempDir::new().unwrap();
    let s = Scenario::preset(Topology::SingleVarLink, 50).with_duration(SimTime::from_secs(5));
    let err = sweep_with(&s, 4, tmp.path(), |sc, dir| {
        if sc.seed == 3 {
            Err(CliError::Runtime("injected".into()))
        } else {
            run_to_dir(sc, dir)
        }
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), EXIT_RUNTIME);
    assert!(err.to_string().contains("injected"));
    for k in [1, 2, 4] {
        assert!(tmp.path().join(format!("seed-{k}/summary.json")).exists());
    }
    let agg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["failed_seeds"], serde_json::json!([3]));
    assert_eq!(agg["seeds"], serde_json::json!([1, 2, 4]));
}
