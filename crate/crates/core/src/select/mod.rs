//! Subset selection strategies.
//!
//! [`select`] is the entry point: it applies optional L2 normalization and
//! per-label grouping, computes the geometric median when the method needs
//! it, and dispatches to the individual selectors.

mod group;
mod herding;
mod random;
mod scores;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingSet;
use crate::error::{Error, Result};
use crate::gm::{geometric_median, GmConfig};
use crate::vecops;

pub use group::{largest_remainder_quotas, per_group_select};
pub use herding::{gm_matching, herd, mean_herding, HerdingRun};
pub use random::random_select;
pub use scores::{distance_scores, score_baseline, score_select, ScoreMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GmMatch,
    MeanHerd,
    Random,
    Easy,
    Hard,
    Moderate,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::GmMatch,
        Method::MeanHerd,
        Method::Random,
        Method::Easy,
        Method::Hard,
        Method::Moderate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GmMatch => "gm-match",
            Method::MeanHerd => "mean-herd",
            Method::Random => "random",
            Method::Easy => "easy",
            Method::Hard => "hard",
            Method::Moderate => "moderate",
        }
    }

    pub fn is_herding(self) -> bool {
        matches!(self, Method::GmMatch | Method::MeanHerd)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replacement {
    #[default]
    Without,
    With,
}

/// Initial herding state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaInit {
    /// The matched target: the geometric median for GM matching, the
    /// empirical mean for mean herding.
    #[default]
    GmPoint,
    Zero,
    Given(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub method: Method,
    pub k: usize,
    #[serde(default)]
    pub replacement: Replacement,
    #[serde(default)]
    pub theta0: ThetaInit,
    #[serde(default)]
    pub group_by_labels: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub normalize: bool,
}

impl SelectorConfig {
    pub fn new(method: Method, k: usize) -> Self {
        Self {
            method,
            k,
            replacement: Replacement::Without,
            theta0: ThetaInit::GmPoint,
            group_by_labels: false,
            seed: 0,
            normalize: false,
        }
    }

    pub fn with_replacement(mut self, replacement: Replacement) -> Self {
        self.replacement = replacement;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn check_k(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::ZeroK);
        }
        let bounded = !(self.method.is_herding() || self.method == Method::Random)
            || self.replacement == Replacement::Without;
        if bounded && self.k > n {
            return Err(Error::KTooLarge {
                k: self.k,
                available: n,
            });
        }
        Ok(())
    }
}

/// Per-group breakdown of a grouped selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSelection {
    pub label: u32,
    pub size: usize,
    pub quota: usize,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub k: usize,
    /// Selected row indices in selection order.
    pub indices: Vec<usize>,
    /// The vector the selection is matched (or reported) against.
    pub target: Vec<f64>,
    /// `|target - mean(first t selections)|` for `t = 1..=k`.
    pub residual_trace: Vec<f64>,
    /// `|theta_t|` for `t = 0..=k`; empty for non-herding methods.
    pub theta_norm_trace: Vec<f64>,
    /// `|mu_clean - mean(first t selections)|` when the input carries flags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_residual_trace: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<GroupSelection>>,
    pub config: SelectorConfig,
    pub seed: u64,
}

/// `|target - mean(indices[..t])|` for every prefix length `t >= 1`.
pub fn prefix_residuals(set: &EmbeddingSet, indices: &[usize], target: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; set.d()];
    indices
        .iter()
        .enumerate()
        .map(|(t, &i)| {
            vecops::add_assign(&mut sum, set.row(i));
            let inv = 1.0 / (t + 1) as f64;
            target
                .iter()
                .zip(&sum)
                .map(|(g, s)| (g - s * inv).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Runs the configured selector on `set`.
///
/// The geometric median for [`Method::GmMatch`] is computed with `gm_cfg`
/// on the (normalized, per-group) data the selector actually sees.
pub fn select(set: &EmbeddingSet, cfg: &SelectorConfig, gm_cfg: &GmConfig) -> Result<SelectionResult> {
    let work: Cow<EmbeddingSet> = if cfg.normalize {
        Cow::Owned(set.l2_normalized())
    } else {
        Cow::Borrowed(set)
    };
    let mut result = if cfg.group_by_labels {
        per_group_select(&work, cfg, |sub, c| select_flat(sub, c, gm_cfg))?
    } else {
        select_flat(&work, cfg, gm_cfg)?
    };
    result.config = cfg.clone();
    if let Ok(mu_clean) = work.clean_mean() {
        result.clean_residual_trace = Some(prefix_residuals(&work, &result.indices, &mu_clean));
    }
    Ok(result)
}

fn select_flat(set: &EmbeddingSet, cfg: &SelectorConfig, gm_cfg: &GmConfig) -> Result<SelectionResult> {
    match cfg.method {
        Method::GmMatch => {
            cfg.check_k(set.n())?;
            let gm = geometric_median(set, gm_cfg)?;
            gm_matching(set, &gm, cfg)
        }
        Method::MeanHerd => mean_herding(set, cfg),
        Method::Random => random_select(set, cfg),
        Method::Easy => score_baseline(set, cfg, ScoreMode::Easy),
        Method::Hard => score_baseline(set, cfg, ScoreMode::Hard),
        Method::Moderate => score_baseline(set, cfg, ScoreMode::Moderate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Flag;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("herding".parse::<Method>().is_err());
    }

    #[test]
    fn k_validation() {
        let set = EmbeddingSet::from_rows(&[[0.0], [1.0]]).unwrap();
        let gm = GmConfig::default();
        for m in Method::ALL {
            assert!(matches!(
                select(&set, &SelectorConfig::new(m, 3), &gm),
                Err(Error::KTooLarge { k: 3, available: 2 })
            ));
            assert!(select(&set, &SelectorConfig::new(m, 0), &gm).is_err());
        }
        let with = SelectorConfig::new(Method::GmMatch, 5).with_replacement(Replacement::With);
        assert_eq!(select(&set, &with, &gm).unwrap().indices.len(), 5);
    }

    #[test]
    fn clean_trace_recorded_with_flags() {
        let set = EmbeddingSet::from_rows(&[[0.0], [1.0], [10.0]])
            .unwrap()
            .with_flags(vec![Flag::Clean, Flag::Clean, Flag::Corrupt])
            .unwrap();
        let r = select(&set, &SelectorConfig::new(Method::Easy, 2), &GmConfig::default()).unwrap();
        let trace = r.clean_residual_trace.unwrap();
        assert_eq!(trace.len(), 2);
        let plain = EmbeddingSet::from_rows(&[[0.0], [1.0]]).unwrap();
        let r = select(&plain, &SelectorConfig::new(Method::Easy, 1), &GmConfig::default()).unwrap();
        assert!(r.clean_residual_trace.is_none());
    }

    #[test]
    fn normalization_changes_working_data() {
        let set = EmbeddingSet::from_rows(&[[10.0, 0.0], [0.0, 1.0], [0.0, -2.0]]).unwrap();
        let mut cfg = SelectorConfig::new(Method::MeanHerd, 3);
        cfg.normalize = true;
        let r = select(&set, &cfg, &GmConfig::default()).unwrap();
        // the normalized rows are (1,0), (0,1), (0,-1)
        assert!((r.target[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.target[1].abs() < 1e-15);
    }

    #[test]
    fn prefix_residuals_by_hand() {
        let set = EmbeddingSet::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let r = prefix_residuals(&set, &[1, 0], &[1.0, 0.0]);
        assert_eq!(r, vec![1.0, 0.0]);
    }
}
