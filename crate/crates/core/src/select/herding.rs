//! Herding-style greedy moment matching.
//!
//! Starting from `theta_0`, repeat `k` times:
//!
//! ```text
//! x_{t+1}     = argmax_{x in D} <theta_t, x>
//! theta_{t+1} = theta_t + (target - x_{t+1})
//! ```
//!
//! Without replacement the chosen row leaves `D`. Summing the updates gives
//! `target - mean(S_t) = (theta_t - theta_0) / t` for every `t`.

use crate::data::EmbeddingSet;
use crate::error::{check_dim, Result};
use crate::gm::GmResult;
use crate::par;
use crate::vecops;

use super::{prefix_residuals, Method, Replacement, SelectionResult, SelectorConfig, ThetaInit};

/// Full state of one herding run.
#[derive(Clone, Debug, PartialEq)]
pub struct HerdingRun {
    pub indices: Vec<usize>,
    /// `theta_t` for `t = 0..=k`.
    pub thetas: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl HerdingRun {
    pub fn theta_norms(&self) -> Vec<f64> {
        self.thetas.iter().map(|t| vecops::norm(t)).collect()
    }

    /// Largest deviation from the identity
    /// `target - mean(S_t) = (theta_t - theta_0) / t` over all `t`.
    pub fn residual_identity_gap(&self, set: &EmbeddingSet) -> f64 {
        let mut sum = vec![0.0; set.d()];
        let theta0 = &self.thetas[0];
        let mut worst = 0.0f64;
        for (t, &i) in self.indices.iter().enumerate() {
            vecops::add_assign(&mut sum, set.row(i));
            let steps = (t + 1) as f64;
            let gap: f64 = (0..set.d())
                .map(|j| {
                    let lhs = self.target[j] - sum[j] / steps;
                    let rhs = (self.thetas[t + 1][j] - theta0[j]) / steps;
                    (lhs - rhs).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            worst = worst.max(gap);
        }
        worst
    }
}

/// Greedy herding towards `target`.
pub fn herd(set: &EmbeddingSet, target: &[f64], cfg: &SelectorConfig) -> Result<HerdingRun> {
    check_dim(set.d(), target.len())?;
    cfg.check_k(set.n())?;
    let mut theta = match &cfg.theta0 {
        ThetaInit::GmPoint => target.to_vec(),
        ThetaInit::Zero => vec![0.0; set.d()],
        ThetaInit::Given(v) => {
            check_dim(set.d(), v.len())?;
            v.clone()
        }
    };

    let without = cfg.replacement == Replacement::Without;
    let mut available = vec![true; set.n()];
    let mut indices = Vec::with_capacity(cfg.k);
    let mut thetas = Vec::with_capacity(cfg.k + 1);
    thetas.push(theta.clone());

    for _ in 0..cfg.k {
        let scores = par::map_rows(set, |_, x| vecops::dot(&theta, x));
        let mask = if without { Some(&available[..]) } else { None };
        let pick = par::argmax(&scores, mask).expect("k checked against n");
        if without {
            available[pick] = false;
        }
        indices.push(pick);
        for ((th, g), x) in theta.iter_mut().zip(target).zip(set.row(pick)) {
            *th += g - x;
        }
        thetas.push(theta.clone());
    }

    Ok(HerdingRun {
        indices,
        thetas,
        target: target.to_vec(),
    })
}

fn into_result(set: &EmbeddingSet, run: HerdingRun, cfg: &SelectorConfig, method: Method) -> SelectionResult {
    SelectionResult {
        method,
        k: cfg.k,
        residual_trace: prefix_residuals(set, &run.indices, &run.target),
        theta_norm_trace: run.theta_norms(),
        indices: run.indices,
        target: run.target,
        clean_residual_trace: None,
        groups: None,
        config: cfg.clone(),
        seed: cfg.seed,
    }
}

/// GM matching: herding with the (approximate) geometric median of `set`
/// as the target moment. `gm` must have been computed on `set`.
pub fn gm_matching(set: &EmbeddingSet, gm: &GmResult, cfg: &SelectorConfig) -> Result<SelectionResult> {
    let run = herd(set, &gm.point, cfg)?;
    Ok(into_result(set, run, cfg, Method::GmMatch))
}

/// Classical herding towards the empirical mean.
pub fn mean_herding(set: &EmbeddingSet, cfg: &SelectorConfig) -> Result<SelectionResult> {
    let run = herd(set, &set.mean(), cfg)?;
    Ok(into_result(set, run, cfg, Method::MeanHerd))
}
