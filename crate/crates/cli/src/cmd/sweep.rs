use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use gmprune::corruption::ToyGmm;
use gmprune::metrics::{breakdown_csv, breakdown_sweep, clean_precision, loglog_slope, Estimator, SlopeFit};
use gmprune::select::{select, Method, Replacement, SelectorConfig};
use gmprune::EmbeddingSet;
use rayon::prelude::*;
use serde::Serialize;

use super::select::{parse_method, parse_replacement};
use super::{emit, load_input, to_json_text, with_config};
use crate::config::{RunConfig, SweepGrid};

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "gm-match,random", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256,512")]
    ks: Vec<usize>,
    /// Number of seeds, counting up from --seed.
    #[arg(long, default_value_t = 8)]
    seeds: u64,
    /// Run the estimator breakdown table instead of the selection grid.
    #[arg(long)]
    breakdown: bool,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.45")]
    psis: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1e3,1e6,1e9")]
    mags: Vec<f64>,
    /// Toy sample count when no --input is given.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Toy corruption fraction when no --input is given.
    #[arg(long, default_value_t = 0.2)]
    psi: f64,
    /// Selection replacement mode: without or with.
    #[arg(long, default_value = "without", value_parser = parse_replacement)]
    replacement: Replacement,
    /// Slope summary JSON; defaults to the --out path with a .json extension.
    #[arg(long)]
    summary: Option<PathBuf>,
}

impl SweepArgs {
    pub fn fill(&self, cfg: &mut RunConfig) {
        cfg.sweep = Some(SweepGrid {
            methods: self.methods.clone(),
            ks: self.ks.clone(),
            seeds: (0..self.seeds).map(|s| cfg.seed.wrapping_add(s)).collect(),
            breakdown: self.breakdown,
            psis: self.psis.clone(),
            magnitudes: self.mags.clone(),
        });
        cfg.selector = Some(SelectorConfig::new(Method::GmMatch, 1).with_replacement(self.replacement));
        if cfg.input.is_none() {
            cfg.toy = Some(ToyGmm {
                n: self.n,
                psi: self.psi,
                ..ToyGmm::default()
            });
        }
        cfg.summary = self.summary.clone();
    }
}

#[derive(Clone, Debug, Serialize)]
struct Cell {
    method: Method,
    k: usize,
    seed: u64,
    /// Distance from the subset mean to the selector's target.
    residual: f64,
    /// Distance from the subset mean to the clean mean.
    clean_error: Option<f64>,
    clean_precision: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Fit {
    method: Method,
    metric: &'static str,
    points: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct SelectionSummary {
    cells: usize,
    fits: Vec<Fit>,
}

#[derive(Serialize)]
struct BreakdownSummary {
    rows: Vec<gmprune::metrics::BreakdownRow>,
}

fn dataset(cfg: &RunConfig, seed: u64) -> Result<EmbeddingSet> {
    match &cfg.toy {
        Some(toy) => Ok(ToyGmm { seed, ..toy.clone() }.generate()?),
        None => load_input(cfg),
    }
}

fn summary_path(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.summary
        .clone()
        .or_else(|| cfg.out.as_ref().map(|o| o.with_extension("json")))
}

pub fn run(cfg: &RunConfig) -> Result<u8> {
    let Some(grid) = &cfg.sweep else {
        bail!("sweep needs a grid configuration");
    };
    if cfg.out.is_none() {
        bail!("--out is required");
    }
    if grid.breakdown {
        return run_breakdown(cfg, grid);
    }
    if grid.methods.is_empty() || grid.ks.is_empty() || grid.seeds.is_empty() {
        bail!("sweep grids must be non-empty");
    }
    let base = cfg.selector.clone().unwrap_or_else(|| SelectorConfig::new(Method::GmMatch, 1));

    let mut jobs = Vec::new();
    for &seed in &grid.seeds {
        for &method in &grid.methods {
            for &k in &grid.ks {
                jobs.push((seed, method, k));
            }
        }
    }
    let sets: Vec<EmbeddingSet> = grid
        .seeds
        .iter()
        .map(|&s| dataset(cfg, s))
        .collect::<Result<_>>()?;
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(seed, method, k)| {
            let set = &sets[grid.seeds.iter().position(|&s| s == seed).expect("seed in grid")];
            let sel_cfg = SelectorConfig {
                method,
                k,
                seed,
                ..base.clone()
            };
            let r = select(set, &sel_cfg, &cfg.gm)?;
            let clean_mean = set.clean_mean().ok();
            let clean_error = match &clean_mean {
                Some(mu) => Some(gmprune::vecops::dist(&set.mean_of(&r.indices)?, mu)),
                None => None,
            };
            Ok(Cell {
                method,
                k,
                seed,
                residual: *r.residual_trace.last().expect("k >= 1"),
                clean_error,
                clean_precision: clean_precision(&r.indices, set.flags()).ok(),
            })
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from("method,k,seed,residual,clean_error,clean_precision\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for c in &cells {
        csv.push_str(&format!(
            "{},{},{},{:?},{},{}\n",
            c.method,
            c.k,
            c.seed,
            c.residual,
            opt(c.clean_error),
            opt(c.clean_precision)
        ));
    }
    emit(cfg.out.as_deref(), &csv)?;

    let mut fits = Vec::new();
    for &method in &grid.methods {
        for metric in ["residual", "clean_error"] {
            let mut by_k: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            for c in cells.iter().filter(|c| c.method == method) {
                let v = if metric == "residual" { Some(c.residual) } else { c.clean_error };
                if let Some(v) = v {
                    let e = by_k.entry(c.k).or_insert((0.0, 0));
                    e.0 += v;
                    e.1 += 1;
                }
            }
            if by_k.is_empty() {
                continue;
            }
            let points: Vec<(usize, f64)> = by_k.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
            let xy: Vec<(f64, f64)> = points.iter().map(|&(k, e)| (k as f64, e)).collect();
            let (fit, error) = match loglog_slope(&xy) {
                Ok(f) => (Some(f), None),
                Err(e) => {
                    eprintln!("warning: {method} {metric} slope: {e} [{}]", e.code());
                    (None, Some(format!("{}: {e}", e.code())))
                }
            };
            if let Some(f) = &fit {
                say!(
                    "{method:>10} {metric:<12} slope {:+.4}  r2 {:.4}",
                    f.slope, f.r_squared
                );
            }
            fits.push(Fit {
                method,
                metric,
                points,
                fit,
                error,
            });
        }
    }
    let summary = SelectionSummary {
        cells: cells.len(),
        fits,
    };
    emit(summary_path(cfg).as_deref(), &to_json_text(&with_config(&summary, cfg)?)?)?;
    Ok(0)
}

fn run_breakdown(cfg: &RunConfig, grid: &SweepGrid) -> Result<u8> {
    if grid.psis.is_empty() || grid.magnitudes.is_empty() {
        bail!("breakdown grids must be non-empty");
    }
    let clean = match &cfg.toy {
        Some(toy) => toy.clean()?,
        None => {
            let set = load_input(cfg)?;
            let n = set.n();
            set.without_flags().with_flags(vec![gmprune::Flag::Clean; n])?
        }
    };
    let rows = breakdown_sweep(
        &clean,
        &grid.psis,
        &grid.magnitudes,
        &[Estimator::Mean, Estimator::Gm],
        cfg.seed,
        &cfg.gm,
    )?;
    emit(cfg.out.as_deref(), &breakdown_csv(&rows))?;
    for r in &rows {
        say!(
            "psi {:<5} M {:<8e} {:<4} error {:.6e}",
            r.psi,
            r.magnitude,
            r.estimator.name(),
            r.error
        );
    }
    let summary = BreakdownSummary { rows };
    emit(summary_path(cfg).as_deref(), &to_json_text(&with_config(&summary, cfg)?)?)?;
    Ok(0)
}
