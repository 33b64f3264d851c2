//! The run configuration echoed into every output artifact.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use gmprune::corruption::{CorruptionSpec, ToyGmm};
use gmprune::select::{Method, SelectorConfig};
use gmprune::GmConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub methods: Vec<Method>,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub breakdown: bool,
    pub psis: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub format: OutputFormat,
    pub csv_labels: bool,
    pub gm: GmConfig,
    pub selector: Option<SelectorConfig>,
    pub corruption: Option<CorruptionSpec>,
    pub toy: Option<ToyGmm>,
    pub sweep: Option<SweepGrid>,
    pub eps_ref: Option<PathBuf>,
    pub emit_subset: Option<PathBuf>,
    pub selection: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl RunConfig {
    /// Applies `--config`: keys present in the file replace the flag values.
    /// A prior output artifact is accepted too; its embedded `config` is used.
    pub fn apply_override(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        let mut file: Value =
            serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
        if let Some(inner) = file.get_mut("config").filter(|c| c.is_object()) {
            file = inner.take();
        }
        if !file.is_object() {
            bail!("{} must hold a JSON object", path.display());
        }
        let mut merged = serde_json::to_value(&self)?;
        merge(&mut merged, file);
        let out: RunConfig = serde_json::from_value(merged)
            .with_context(|| format!("invalid configuration in {}", path.display()))?;
        if out.command != self.command {
            bail!(
                "configuration is for command {:?}, not {:?}",
                out.command,
                self.command
            );
        }
        Ok(out)
    }

    pub fn require_input(&self) -> Result<&Path> {
        self.input.as_deref().context("--input is required")
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}
