use crate::data::EmbeddingSet;
use crate::error::Result;
use crate::rng::Rng;

use super::{prefix_residuals, Method, Replacement, SelectionResult, SelectorConfig};

/// Uniform sampling with `Rng::new(cfg.seed)`. The residual trace is
/// reported against the empirical mean.
pub fn random_select(set: &EmbeddingSet, cfg: &SelectorConfig) -> Result<SelectionResult> {
    cfg.check_k(set.n())?;
    let mut rng = Rng::new(cfg.seed);
    let indices = match cfg.replacement {
        Replacement::Without => rng.sample_indices(set.n(), cfg.k),
        Replacement::With => (0..cfg.k).map(|_| rng.below(set.n())).collect(),
    };
    let target = set.mean();
    Ok(SelectionResult {
        method: Method::Random,
        k: cfg.k,
        residual_trace: prefix_residuals(set, &indices, &target),
        theta_norm_trace: Vec::new(),
        indices,
        target,
        clean_residual_trace: None,
        groups: None,
        config: cfg.clone(),
        seed: cfg.seed,
    })
}
