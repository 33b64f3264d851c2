use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use gmprune::io::{save_embeddings, Format};
use gmprune::select::{select, Method, Replacement, SelectorConfig, ThetaInit};

use super::{emit, load_input, parse_floats, to_json_text, with_config};
use crate::config::RunConfig;

#[derive(Args)]
pub struct SelectArgs {
    /// gm-match, mean-herd, random, easy, hard or moderate.
    #[arg(long, default_value = "gm-match", value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    k: Option<usize>,
    /// without or with.
    #[arg(long, default_value = "without", value_parser = parse_replacement)]
    replacement: Replacement,
    /// gm-point, zero, or a comma-separated vector.
    #[arg(long, default_value = "gm-point", value_parser = parse_theta0)]
    theta0: ThetaInit,
    #[arg(long)]
    group_by_labels: bool,
    /// L2-normalize rows before selecting.
    #[arg(long)]
    normalize: bool,
    /// Also write the selected rows; `.csv` gives text, anything else binary.
    #[arg(long)]
    emit_subset: Option<PathBuf>,
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: gmprune::Error| e.to_string())
}

pub fn parse_replacement(s: &str) -> Result<Replacement, String> {
    match s {
        "without" => Ok(Replacement::Without),
        "with" => Ok(Replacement::With),
        _ => Err(format!("expected \"with\" or \"without\", got {s:?}")),
    }
}

fn parse_theta0(s: &str) -> Result<ThetaInit, String> {
    match s {
        "gm-point" => Ok(ThetaInit::GmPoint),
        "zero" => Ok(ThetaInit::Zero),
        _ => parse_floats(s).map(ThetaInit::Given),
    }
}

impl SelectArgs {
    pub fn fill(&self, cfg: &mut RunConfig) -> Result<()> {
        cfg.selector = Some(SelectorConfig {
            method: self.method,
            k: self.k.unwrap_or(0),
            replacement: self.replacement,
            theta0: self.theta0.clone(),
            group_by_labels: self.group_by_labels,
            seed: cfg.seed,
            normalize: self.normalize,
        });
        cfg.emit_subset = self.emit_subset.clone();
        Ok(())
    }
}

pub fn run(cfg: &RunConfig) -> Result<u8> {
    let sel_cfg = cfg
        .selector
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("select needs a selector configuration"))?;
    let set = load_input(cfg)?;
    let result = select(&set, sel_cfg, &cfg.gm)?;
    emit(cfg.out.as_deref(), &to_json_text(&with_config(&result, cfg)?)?)?;
    if let Some(path) = &cfg.emit_subset {
        save_embeddings(&set.subset_rows(&result.indices)?, path, Format::from_path(path))?;
    }
    if cfg.out.is_some() {
        say!(
            "{} selected {} rows; final residual {:.6e}",
            result.method,
            result.indices.len(),
            result.residual_trace.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(0)
}
