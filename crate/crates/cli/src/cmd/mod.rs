pub mod gm;
pub mod report;
pub mod select;
pub mod simulate;
pub mod sweep;

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use gmprune::io::{load_embeddings, CsvOptions, Format};
use gmprune::EmbeddingSet;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub fn load_input(cfg: &RunConfig) -> Result<EmbeddingSet> {
    let path = cfg.require_input()?;
    Ok(load_embeddings(
        path,
        Format::from_path(path),
        CsvOptions {
            labels: cfg.csv_labels,
        },
    )?)
}

/// Serializes `payload` with the run configuration under `config`.
pub fn with_config<T: Serialize>(payload: &T, cfg: &RunConfig) -> Result<Value> {
    let mut v = serde_json::to_value(payload)?;
    let obj = v.as_object_mut().context("payload must be a JSON object")?;
    obj.insert("config".into(), serde_json::to_value(cfg)?);
    Ok(v)
}

pub fn to_json_text(v: &Value) -> Result<String> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    Ok(text)
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

pub fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}
