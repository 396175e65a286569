//! Result files: JSON with an embedded manifest, or CSV with the manifest as
//! leading `# ` comment lines.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

static STARTED: OnceLock<Instant> = OnceLock::new();

/// Marks the start of the invocation for the manifest's wall time.
pub fn start_clock() {
    STARTED.get_or_init(Instant::now);
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<String>,
    pub seeds: Vec<u64>,
    pub algorithm: Option<String>,
    pub ordering: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: &'static str,
    pub wall_time_ms: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            scenario: None,
            seeds: Vec::new(),
            algorithm: None,
            ordering: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_time_ms: 0.0,
        }
    }

    pub fn scenario(mut self, path: &Path) -> Self {
        self.scenario = Some(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: Option<&PathBuf>) {
        if let Some(p) = path {
            self.outputs.push(p.display().to_string());
        }
    }

    fn stamp(&mut self) {
        if let Some(t) = STARTED.get() {
            self.wall_time_ms = t.elapsed().as_secs_f64() * 1e3;
        }
    }
}

/// Writes to `path`, or to stdout when absent.
fn write_bytes(path: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// `{"manifest": ..., "result": ...}`
pub fn emit_json(path: Option<&PathBuf>, manifest: &mut RunManifest, result: &impl Serialize) -> Result<()> {
    manifest.stamp();
    let doc = json!({ "manifest": manifest, "result": result });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// `value` with the manifest merged in as a top-level `manifest` key.
pub fn emit_json_merged(path: Option<&PathBuf>, manifest: &mut RunManifest, value: &impl Serialize) -> Result<()> {
    manifest.stamp();
    let mut doc = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut doc {
        map.insert("manifest".to_string(), serde_json::to_value(&*manifest)?);
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn emit_csv(path: Option<&PathBuf>, manifest: &mut RunManifest, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    manifest.stamp();
    let mut buf = Vec::new();
    let manifest_value = serde_json::to_value(&*manifest)?;
    if let Value::Object(map) = manifest_value {
        for (key, value) in map {
            writeln!(buf, "# {key}: {value}")?;
        }
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    write_bytes(path, &buf)
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}
