use anyhow::{bail, Result};
use clap::Args;
use gmprune::corruption::{alpha_from_psi, inject, CorruptionMode, CorruptionSpec, ToyGmm};
use gmprune::io::{save_embeddings, Format};
use gmprune::{EmbeddingSet, Flag};
use serde::Serialize;

use super::{emit, load_input, parse_floats, to_json_text, with_config};
use crate::config::RunConfig;

#[derive(Args)]
pub struct SimulateArgs {
    /// Number of toy samples.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Fraction of rows to corrupt, in [0, 0.5).
    #[arg(long, default_value_t = 0.2)]
    psi: f64,
    /// gaussian-cluster, point-at-magnitude, mean-hijack or label-flip.
    /// Without this (and without --input) the toy adversarial cluster is used.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<CorruptionMode>,
    #[arg(long, value_parser = parse_floats)]
    cluster_mean: Option<Vec<f64>>,
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long, value_parser = parse_floats)]
    target: Option<Vec<f64>>,
    #[arg(long)]
    num_classes: Option<u32>,
}

fn parse_mode(s: &str) -> Result<CorruptionMode, String> {
    match s {
        "gaussian-cluster" => Ok(CorruptionMode::GaussianCluster),
        "point-at-magnitude" => Ok(CorruptionMode::PointAtMagnitude),
        "mean-hijack" => Ok(CorruptionMode::MeanHijack),
        "label-flip" => Ok(CorruptionMode::LabelFlip),
        _ => Err(format!("unknown corruption mode {s:?}")),
    }
}

impl SimulateArgs {
    pub fn fill(&self, cfg: &mut RunConfig) -> Result<()> {
        let toy = ToyGmm {
            n: self.n,
            psi: self.psi,
            seed: cfg.seed,
            ..ToyGmm::default()
        };
        if self.mode.is_some() || cfg.input.is_some() {
            let mode = self.mode.unwrap_or(CorruptionMode::GaussianCluster);
            let mut spec = CorruptionSpec::new(self.psi, mode, cfg.seed);
            if mode == CorruptionMode::GaussianCluster {
                spec.cluster_mean = Some(self.cluster_mean.clone().unwrap_or_else(|| toy.adv_mean.clone()));
                spec.cluster_cov = Some(toy.adv_cov.clone());
            }
            spec.magnitude = self.magnitude;
            spec.target = self.target.clone();
            spec.num_classes = self.num_classes;
            cfg.corruption = Some(spec);
        }
        if cfg.input.is_none() {
            cfg.toy = Some(toy);
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    n: usize,
    d: usize,
    n_corrupt: usize,
    alpha: f64,
}

pub fn run(cfg: &RunConfig) -> Result<u8> {
    let set = match (&cfg.toy, &cfg.corruption) {
        (Some(toy), None) => {
            alpha_from_psi(toy.psi)?;
            toy.generate()?
        }
        (Some(toy), Some(spec)) => inject(&toy.clean()?, spec)?,
        (None, Some(spec)) => {
            let base = load_input(cfg)?;
            inject(&base, spec)?
        }
        (None, None) => bail!("simulate needs either the toy settings or a corruption spec"),
    };
    let Some(out) = cfg.out.as_deref() else {
        bail!("--out is required");
    };
    save_embeddings(&set, out, Format::from_path(out))?;
    let summary = summarize(&set)?;
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".json");
    emit(
        Some(std::path::Path::new(&sidecar)),
        &to_json_text(&with_config(&summary, cfg)?)?,
    )?;
    say!(
        "wrote {} rows ({} corrupt) to {}",
        summary.n,
        summary.n_corrupt,
        out.display()
    );
    Ok(0)
}

fn summarize(set: &EmbeddingSet) -> Result<SimulateSummary> {
    let n_corrupt = set.indices_with_flag(Flag::Corrupt)?.len();
    Ok(SimulateSummary {
        n: set.n(),
        d: set.d(),
        n_corrupt,
        alpha: n_corrupt as f64 / (set.n() - n_corrupt) as f64,
    })
}
