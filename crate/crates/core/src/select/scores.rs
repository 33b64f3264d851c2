//! Distance-to-centroid baselines.

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingSet;
use crate::error::{check_dim, Error, Result};
use crate::par;
use crate::vecops;

use super::{prefix_residuals, Method, SelectionResult, SelectorConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScoreMode {
    /// Closest to the centroid.
    Easy,
    /// Farthest from the centroid.
    Hard,
    /// Distance closest to the median distance.
    Moderate,
}

impl ScoreMode {
    fn method(self) -> Method {
        match self {
            ScoreMode::Easy => Method::Easy,
            ScoreMode::Hard => Method::Hard,
            ScoreMode::Moderate => Method::Moderate,
        }
    }
}

/// `|x_i - centroid|^2` for every row.
pub fn distance_scores(set: &EmbeddingSet, centroid: &[f64]) -> Result<Vec<f64>> {
    check_dim(set.d(), centroid.len())?;
    Ok(par::map_rows(set, |_, x| vecops::dist_sq(x, centroid)))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Picks `k` indices by score. Ties go to the lower index; the result is in
/// rank order.
pub fn score_select(scores: &[f64], k: usize, mode: ScoreMode) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if k > scores.len() {
        return Err(Error::KTooLarge {
            k,
            available: scores.len(),
        });
    }
    let keys: Vec<f64> = match mode {
        ScoreMode::Easy => scores.to_vec(),
        ScoreMode::Hard => scores.iter().map(|s| -s).collect(),
        ScoreMode::Moderate => {
            let dist: Vec<f64> = scores.iter().map(|s| s.sqrt()).collect();
            let med = median(&dist);
            dist.iter().map(|r| (r - med).abs()).collect()
        }
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Scores every row against the empirical mean of `set` and selects by
/// `mode`. The residual trace is reported against that mean.
pub fn score_baseline(set: &EmbeddingSet, cfg: &SelectorConfig, mode: ScoreMode) -> Result<SelectionResult> {
    cfg.check_k(set.n())?;
    let centroid = set.mean();
    let scores = distance_scores(set, &centroid)?;
    let indices = score_select(&scores, cfg.k, mode)?;
    Ok(SelectionResult {
        method: mode.method(),
        k: cfg.k,
        residual_trace: prefix_residuals(set, &indices, &centroid),
        theta_norm_trace: Vec::new(),
        indices,
        target: centroid,
        clean_residual_trace: None,
        groups: None,
        config: cfg.clone(),
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_by_hand() {
        let set = EmbeddingSet::from_rows(&[[3.0, 4.0], [1.0, 1.0]]).unwrap();
        assert_eq!(distance_scores(&set, &[0.0, 0.0]).unwrap(), vec![25.0, 2.0]);
        assert_eq!(distance_scores(&set, &[1.0, 1.0]).unwrap()[1], 0.0);
        assert!(distance_scores(&set, &[0.0]).is_err());
    }

    #[test]
    fn modes_on_three_scores() {
        let s = [0.1, 0.5, 0.9];
        assert_eq!(score_select(&s, 1, ScoreMode::Easy).unwrap(), vec![0]);
        assert_eq!(score_select(&s, 1, ScoreMode::Hard).unwrap(), vec![2]);
        assert_eq!(score_select(&s, 1, ScoreMode::Moderate).unwrap(), vec![1]);
    }

    #[test]
    fn ties_and_exhaustion() {
        let s = [2.0; 4];
        for mode in [ScoreMode::Easy, ScoreMode::Hard, ScoreMode::Moderate] {
            assert_eq!(score_select(&s, 2, mode).unwrap(), vec![0, 1]);
            let mut all = score_select(&[0.3, 0.1, 0.7], 3, mode).unwrap();
            all.sort_unstable();
            assert_eq!(all, vec![0, 1, 2]);
        }
        assert!(matches!(
            score_select(&s, 5, ScoreMode::Easy),
            Err(Error::KTooLarge { k: 5, available: 4 })
        ));
    }

    #[test]
    fn moderate_compares_distances_not_squares() {
        // distances 0, 1, 2, 3, 10: median distance 2
        let s = [0.0, 1.0, 4.0, 9.0, 100.0];
        assert_eq!(score_select(&s, 3, ScoreMode::Moderate).unwrap(), vec![2, 1, 3]);
    }

    #[test]
    fn baseline_uses_empirical_centroid() {
        let set = EmbeddingSet::from_rows(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
        let r = score_baseline(&set, &SelectorConfig::new(Method::Hard, 1), ScoreMode::Hard).unwrap();
        assert_eq!(r.target, vec![3.25]);
        assert_eq!(r.indices, vec![3]);
        assert_eq!(r.method, Method::Hard);
    }
}
