use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use gmprune::gm::{absolute_gap, geometric_median, GmConfig};
use gmprune::metrics::MetricsReport;
use gmprune::Flag;
use serde::Serialize;

use super::{emit, load_input, to_json_text, with_config};
use crate::config::{OutputFormat, RunConfig};

#[derive(Args)]
pub struct ReportArgs {
    /// A `select` output.
    #[arg(long)]
    selection: Option<PathBuf>,
}

impl ReportArgs {
    pub fn fill(&self, cfg: &mut RunConfig) {
        cfg.selection = self.selection.clone();
    }
}

#[derive(Serialize)]
struct ReportOutput {
    method: Option<String>,
    flags_present: bool,
    #[serde(flatten)]
    metrics: MetricsReport,
}

fn read_selection(path: &std::path::Path) -> Result<(Vec<usize>, Option<String>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let indices = v
        .get("indices")
        .and_then(|i| i.as_array())
        .with_context(|| format!("{} has no \"indices\" array", path.display()))?
        .iter()
        .map(|i| i.as_u64().map(|x| x as usize).context("indices must be non-negative integers"))
        .collect::<Result<Vec<_>>>()?;
    let method = v.get("method").and_then(|m| m.as_str()).map(str::to_string);
    Ok((indices, method))
}

fn csv_body(out: &ReportOutput) -> String {
    let m = &out.metrics;
    let mut rows: Vec<(String, String)> = vec![
        ("method".into(), out.method.clone().unwrap_or_default()),
        ("flags_present".into(), out.flags_present.to_string()),
        ("k".into(), m.k.to_string()),
        ("subset_mean_error".into(), format!("{:?}", m.subset_mean_error)),
        ("theorem_rhs".into(), format!("{:?}", m.theorem_rhs)),
        (
            "theorem_rhs_variance_normalized".into(),
            format!("{:?}", m.theorem_rhs_variance_normalized),
        ),
        ("bound_satisfied".into(), m.bound_satisfied.to_string()),
        ("epsilon_abs".into(), format!("{:?}", m.epsilon_abs)),
    ];
    if let Some(p) = m.clean_precision {
        rows.push(("clean_precision".into(), format!("{p:?}")));
    }
    if let Some(f) = &m.slope_fit {
        rows.push(("slope_fit.slope".into(), format!("{:?}", f.slope)));
        rows.push(("slope_fit.intercept".into(), format!("{:?}", f.intercept)));
        rows.push(("slope_fit.r_squared".into(), format!("{:?}", f.r_squared)));
    }
    for e in &m.per_k {
        rows.push((format!("per_k.{}", e.k), format!("{:?}", e.error)));
    }
    let mut s = String::from("field,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

pub fn run(cfg: &RunConfig) -> Result<u8> {
    let mut set = load_input(cfg)?;
    let sel_path = cfg.selection.as_deref().context("--selection is required")?;
    let (indices, method) = read_selection(sel_path)?;

    let flags_present = set.flags().is_some();
    if !flags_present {
        eprintln!("warning: input has no clean/corrupt flags; treating every row as clean and omitting clean_precision");
        let n = set.n();
        set = set.with_flags(vec![Flag::Clean; n])?;
    }
    let gm = geometric_median(&set, &cfg.gm)?;
    let oracle = geometric_median(&set, &GmConfig::oracle())?;
    let eps = absolute_gap(&gm, oracle.objective);
    let mut metrics = MetricsReport::evaluate(&set, &indices, eps)?;
    if !flags_present {
        metrics.clean_precision = None;
    }
    let out = ReportOutput {
        method,
        flags_present,
        metrics,
    };

    let m = &out.metrics;
    say!("{:<34}{}", "method", out.method.as_deref().unwrap_or("?"));
    say!("{:<34}{}", "k", m.k);
    say!("{:<34}{:.6e}", "|mu_S - mu_G|^2", m.subset_mean_error);
    say!("{:<34}{:.6e}", "bound (as printed)", m.theorem_rhs);
    say!("{:<34}{:.6e}", "bound (variance-normalized)", m.theorem_rhs_variance_normalized);
    say!("{:<34}{}", "bound satisfied", m.bound_satisfied);
    say!("{:<34}{:.3e}", "epsilon (absolute)", m.epsilon_abs);
    match m.clean_precision {
        Some(p) => say!("{:<34}{:.4}", "clean precision", p),
        None => say!("{:<34}-", "clean precision"),
    }
    if let Some(f) = &m.slope_fit {
        say!("{:<34}{:+.4} (r2 {:.4})", "log-log slope", f.slope, f.r_squared);
    }

    let text = match cfg.format {
        OutputFormat::Json => to_json_text(&with_config(&out, cfg)?)?,
        OutputFormat::Csv => csv_body(&out),
    };
    if let Some(path) = cfg.out.as_deref() {
        emit(Some(path), &text)?;
    }
    Ok(0)
}
