use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use gmprune::gm::{absolute_gap, epsilon_estimate, geometric_median, GmConfig, GmResult};
use serde::Serialize;

use super::{emit, load_input, to_json_text, with_config};
use crate::config::RunConfig;

#[derive(Args)]
pub struct GmArgs {
    /// A previous `gm` output whose objective is the reference for the
    /// epsilon estimate.
    #[arg(long)]
    eps_ref: Option<PathBuf>,
    /// Use the high-budget reference settings.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl GmArgs {
    pub fn fill(&self, cfg: &mut RunConfig) {
        if self.oracle {
            cfg.gm = GmConfig::oracle();
        }
        if let Some(m) = self.max_iters {
            cfg.gm.max_iters = m;
        }
        cfg.eps_ref = self.eps_ref.clone();
    }
}

#[derive(Serialize)]
struct GmOutput {
    point: Vec<f64>,
    objective: f64,
    iters: usize,
    converged: bool,
    final_step: f64,
    grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    absolute_gap: Option<f64>,
}

fn reference_objective(path: &std::path::Path) -> Result<f64> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    v.get("objective")
        .and_then(|o| o.as_f64())
        .with_context(|| format!("{} has no numeric \"objective\"", path.display()))
}

pub fn run(cfg: &RunConfig) -> Result<u8> {
    let set = load_input(cfg)?;
    let result: GmResult = geometric_median(&set, &cfg.gm)?;
    let mut out = GmOutput {
        point: result.point.clone(),
        objective: result.objective,
        iters: result.iters,
        converged: result.converged,
        final_step: result.final_step,
        grad_norm: result.grad_norm,
        reference_objective: None,
        epsilon: None,
        absolute_gap: None,
    };
    if let Some(path) = &cfg.eps_ref {
        let reference = reference_objective(path)?;
        out.reference_objective = Some(reference);
        out.epsilon = Some(epsilon_estimate(&result, reference)?);
        out.absolute_gap = Some(absolute_gap(&result, reference));
    }
    emit(cfg.out.as_deref(), &to_json_text(&with_config(&out, cfg)?)?)?;
    if cfg.out.is_some() {
        say!(
            "geometric median after {} iterations (objective {:.12e}){}",
            result.iters,
            result.objective,
            if result.converged { "" } else { ", NOT converged" }
        );
    }
    if result.converged {
        Ok(0)
    } else {
        eprintln!("warning: iteration cap {} reached before convergence", cfg.gm.max_iters);
        Ok(2)
    }
}
