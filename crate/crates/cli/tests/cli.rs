use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn dklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dklab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn small_config() -> Value {
    json!({
        "seed": 5,
        "simulate": {
            "model": {"n_particles": 16, "t_horizon": 0.1, "burn_in": 0.05},
            "vfp": {"n_q": 32, "n_p": 64},
            "snapshot_every": 5
        },
        "spde": {"model": {"t_horizon": 0.05, "n_noise": 1000.0}, "snapshot_every": 10},
        "studies": {
            "mollifier": {"eps_ladder": [0.2, 0.1, 0.05], "min_grid": 1024},
            "interaction": {"eps_ladder": [0.4, 0.3, 0.2], "replicas": 3},
            "kernel": {}
        }
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The single run directory `<out>/<kind>/<timestamp>`.
fn run_dir(out: &Path, kind: &str) -> PathBuf {
    let mut dirs: Vec<_> = fs::read_dir(out.join(kind))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    dirs.pop().expect("a run directory")
}

#[test]
fn study_writes_artifacts_with_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let out = tmp.path().join("out");
    let o = dklab(&["study", "mollifier", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = run_dir(&out, "mollifier");
    for f in ["raw.csv", "report.json", "config.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let config: Value = serde_json::from_str(&fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    for doc in [&report, &config] {
        assert_eq!(doc["seed"], json!(5));
        assert_eq!(doc["code_version"], json!(env!("CARGO_PKG_VERSION")));
        assert_eq!(doc["content_sha256"].as_str().unwrap().len(), 64);
        // resolved config carries defaults that were not in the file
        assert_eq!(doc["config"]["anchors"], json!(64));
    }
    assert_eq!(report["report"]["verdict"], json!("pass"));

    let csv = fs::read_to_string(dir.join("raw.csv")).unwrap();
    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "function,epsilon,error,bound");
    let row = lines.next().unwrap();
    for field in row.split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
    let meta = csv.lines().next().unwrap();
    assert!(meta.contains("seed=5") && meta.contains(report["content_sha256"].as_str().unwrap()));
}

#[test]
fn reruns_are_byte_identical_and_independent_of_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let mut bodies = Vec::new();
    for (i, jobs) in ["1", "1", "3"].iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = dklab(&[
            "study",
            "interaction",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let dir = run_dir(&out, "interaction");
        bodies.push((
            fs::read(dir.join("raw.csv")).unwrap(),
            fs::read(dir.join("report.json")).unwrap(),
            fs::read(dir.join("config.json")).unwrap(),
        ));
    }
    assert!(bodies[0] == bodies[1], "rerun differs");
    assert!(bodies[0] == bodies[2], "thread count changes output");
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let out = tmp.path().join("out");
    let o = dklab(&[
        "study", "interaction", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "42",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(run_dir(&out, "interaction").join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], json!(42));
}

#[test]
fn failing_verdict_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let out = tmp.path().join("out");
    let o = dklab(&["study", "kernel", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    // artifacts are still written
    assert!(run_dir(&out, "kernel").join("report.json").is_file());
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    let cases = [
        (json!({"seed": 1, "bogus": true}), "unknown field"),
        (json!({"studies": {"kernel": {"eps_ladder": [0.2, 0.1], "typo": 1}}}), "unknown field"),
        (json!({"studies": {"nonesuch": {}}}), "unknown study"),
        (json!({"spde": {"model": {"delta": 0.5}}}), "0 < delta < c1 <= min rho0"),
    ];
    for (v, needle) in cases {
        let cfg = write_config(tmp.path(), &v);
        let o = dklab(&["spde", "--config", cfg.to_str().unwrap(), "--out", out_s]);
        assert_eq!(o.status.code(), Some(1), "{v}");
        assert!(stderr(&o).contains(needle), "{v}: {}", stderr(&o));
    }
    let missing = dklab(&["study", "kernel", "--config", "/nonexistent/dklab.json", "--out", out_s]);
    assert_eq!(missing.status.code(), Some(1));
    let no_config = dklab(&["study", "kernel", "--out", out_s]);
    assert_eq!(no_config.status.code(), Some(1));
    let cfg = write_config(tmp.path(), &small_config());
    let unknown = dklab(&["study", "nonesuch", "--config", cfg.to_str().unwrap(), "--out", out_s]);
    assert_eq!(unknown.status.code(), Some(1));
    let bad_flag = dklab(&["study", "kernel", "--seed", "minus-one"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    let zero_jobs = dklab(&["study", "kernel", "--config", cfg.to_str().unwrap(), "--jobs", "0", "--out", out_s]);
    assert_eq!(zero_jobs.status.code(), Some(1));
    assert!(!out.exists(), "no artifacts on config errors");
}

#[test]
fn simulate_and_spde_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let out = tmp.path().join("out");
    for (cmd, header) in [
        ("simulate", "replica,t,i,q,p,q_meanfield,p_meanfield"),
        ("spde", "t,x,rho,j"),
    ] {
        let o = dklab(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        let csv = fs::read_to_string(run_dir(&out, cmd).join("raw.csv")).unwrap();
        let first = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(first, header);
        assert!(csv.lines().filter(|l| !l.starts_with('#')).count() > 2);
    }
}

#[test]
fn report_summarises_latest_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let empty = dklab(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(stderr(&empty).contains("no studies found"));

    let cfg = write_config(tmp.path(), &small_config());
    for name in ["mollifier", "kernel"] {
        dklab(&["study", name, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    }
    let o = dklab(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let text = summary.to_string();
    assert!(text.contains("mollifier") && text.contains("kernel"));
    assert!(text.contains("\"fail\"") && text.contains("\"pass\""));
}
