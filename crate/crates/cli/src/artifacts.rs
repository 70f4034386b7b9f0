use std::path::{Path, PathBuf};

use dklab_core::studies::Table;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Everything needed to write one run directory.
pub struct Artifact<'a> {
    /// Directory name under the output root (study name or command).
    pub kind: &'a str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a Value,
    pub table: &'a Table,
    pub body: &'a Value,
    pub runtime_seconds: Option<f64>,
}

/// Fixed 17-significant-digit rendering.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_data(table: &Table) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| fmt_num(*v)))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

pub fn content_hash(table: &Table, body: &Value) -> Result<String, CliError> {
    let mut h = Sha256::new();
    h.update(csv_data(table)?);
    h.update(serde_json::to_vec(body).expect("json body"));
    Ok(format!("{:x}", h.finalize()))
}

fn fresh_dir(root: &Path) -> Result<PathBuf, CliError> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let mut dir = root.join(&stamp);
    let mut k = 1;
    while dir.exists() {
        dir = root.join(format!("{stamp}-{k}"));
        k += 1;
    }
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Write `raw.csv`, `report.json` and `config.json` into
/// `<out>/<kind>/<timestamp>/` and return that directory.
pub fn write(out: &Path, a: &Artifact) -> Result<(PathBuf, String), CliError> {
    let hash = content_hash(a.table, a.body)?;
    let dir = fresh_dir(&out.join(a.kind))?;
    let version = dklab_core::VERSION;

    let mut csv = format!(
        "# dklab {version} command={} seed={} content_sha256={hash}\n# config={}\n",
        a.command,
        a.seed,
        serde_json::to_string(a.config).expect("json config")
    )
    .into_bytes();
    csv.extend(csv_data(a.table)?);
    std::fs::write(dir.join("raw.csv"), csv)?;

    let meta = |extra: Option<(&str, &Value)>| {
        let mut v = json!({
            "code_version": version,
            "command": a.command,
            "seed": a.seed,
            "content_sha256": hash,
            "config": a.config,
        });
        if let Some((k, x)) = extra {
            v[k] = x.clone();
        }
        v
    };
    let pretty = |v: &Value| {
        let mut s = serde_json::to_string_pretty(v).expect("json");
        s.push('\n');
        s
    };
    std::fs::write(dir.join("report.json"), pretty(&meta(Some(("report", a.body)))))?;
    std::fs::write(dir.join("config.json"), pretty(&meta(None)))?;
    if let Some(rt) = a.runtime_seconds {
        std::fs::write(dir.join("timing.json"), pretty(&json!({ "runtime_seconds": rt })))?;
    }
    Ok((dir, hash))
}
