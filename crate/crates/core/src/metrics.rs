//! Evaluation: subset-mean error, the convergence bound, log-log slope fits,
//! clean precision and breakdown sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corruption::{inject, CorruptionSpec};
use crate::data::{EmbeddingSet, Flag};
use crate::error::{check_dim, Error, Result};
use crate::gm::{geometric_median, GmConfig};
use crate::vecops;

/// `|mean(S) - mu_g|^2`.
pub fn subset_mean_error(set: &EmbeddingSet, indices: &[usize], mu_g: &[f64]) -> Result<f64> {
    check_dim(set.d(), mu_g.len())?;
    Ok(vecops::dist_sq(&set.mean_of(indices)?, mu_g))
}

/// The bound terms for one corrupted set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    pub n_clean: usize,
    pub n_corrupt: usize,
    /// `sum_{x clean} |x - mu_G|^2`.
    pub clean_scatter: f64,
    pub epsilon_abs: f64,
    /// `8 G / (G - B)^2 * scatter + 2 eps^2 / (G - B)^2`.
    pub rhs: f64,
    /// As `rhs` with the scatter divided by `G`.
    pub rhs_variance_normalized: f64,
}

pub fn theorem_bound_terms(set: &EmbeddingSet, epsilon_abs: f64) -> Result<TheoremBound> {
    if !(epsilon_abs >= 0.0 && epsilon_abs.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be finite and non-negative, got {epsilon_abs}"
        )));
    }
    let clean = set.indices_with_flag(Flag::Clean)?;
    let g = clean.len();
    let b = set.n() - g;
    if g <= b {
        return Err(Error::MajorityCorrupt { clean: g, corrupt: b });
    }
    let mu_g = set.mean_of(&clean)?;
    let scatter: f64 = clean.iter().map(|&i| vecops::dist_sq(set.row(i), &mu_g)).sum();
    let gap = (g - b) as f64;
    let denom = gap * gap;
    let eps_term = 2.0 * epsilon_abs * epsilon_abs / denom;
    Ok(TheoremBound {
        n_clean: g,
        n_corrupt: b,
        clean_scatter: scatter,
        epsilon_abs,
        rhs: 8.0 * g as f64 / denom * scatter + eps_term,
        rhs_variance_normalized: 8.0 / denom * scatter + eps_term,
    })
}

/// Right-hand side of the subset-mean convergence bound, with `mu_G` the
/// mean of the CLEAN rows.
pub fn theorem_bound(set: &EmbeddingSet, epsilon_abs: f64) -> Result<f64> {
    Ok(theorem_bound_terms(set, epsilon_abs)?.rhs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination. A constant series fits exactly and
    /// reports 1.
    pub r_squared: f64,
}

/// Least-squares line through `(ln k, ln error)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    for &(k, e) in points {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::InvalidConfig(format!("k must be >= 1, got {k}")));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::NonPositiveError(e));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("all k values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fraction of `indices` that point at CLEAN rows, duplicates counted.
pub fn clean_precision(indices: &[usize], flags: Option<&[Flag]>) -> Result<f64> {
    let flags = flags.ok_or(Error::MissingFlags)?;
    if indices.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut clean = 0usize;
    for &i in indices {
        match flags.get(i) {
            Some(Flag::Clean) => clean += 1,
            Some(Flag::Corrupt) => {}
            None => return Err(Error::IndexOutOfRange { index: i, n: flags.len() }),
        }
    }
    Ok(clean as f64 / indices.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Estimator {
    Mean,
    Gm,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mean => "MEAN",
            Estimator::Gm => "GM",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub psi: f64,
    pub magnitude: f64,
    pub estimator: Estimator,
    /// `|estimate - mu_G|`.
    pub error: f64,
    /// Solver convergence for GM rows; always true for MEAN.
    pub converged: bool,
}

/// For every `(psi, M)` pair, replaces `floor(psi n)` rows of `set_clean`
/// with `M e_1` (same seed, hence the same rows, for every `M`) and measures
/// each estimator against the mean of the remaining clean rows. Rows are
/// sorted by `(psi, M, estimator)`.
pub fn breakdown_sweep(
    set_clean: &EmbeddingSet,
    psis: &[f64],
    magnitudes: &[f64],
    estimators: &[Estimator],
    seed: u64,
    gm_cfg: &GmConfig,
) -> Result<Vec<BreakdownRow>> {
    if let Some(&m) = magnitudes.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidConfig(format!("magnitude must be positive, got {m}")));
    }
    let mut cells = Vec::new();
    for &psi in psis {
        for &m in magnitudes {
            cells.push((psi, m));
        }
    }
    let per_cell: Vec<Result<Vec<BreakdownRow>>> = cells
        .par_iter()
        .map(|&(psi, magnitude)| {
            let spec = CorruptionSpec::point_at_magnitude(psi, magnitude, seed);
            let corrupted = inject(set_clean, &spec)?;
            let mu_g = corrupted.clean_mean()?;
            let mut rows = Vec::with_capacity(estimators.len());
            for &estimator in estimators {
                let (estimate, converged) = match estimator {
                    Estimator::Mean => (corrupted.mean(), true),
                    Estimator::Gm => {
                        let r = geometric_median(&corrupted, gm_cfg)?;
                        (r.point, r.converged)
                    }
                };
                rows.push(BreakdownRow {
                    psi,
                    magnitude,
                    estimator,
                    error: vecops::dist(&estimate, &mu_g),
                    converged,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for cell in per_cell {
        rows.extend(cell?);
    }
    rows.sort_by(|a, b| {
        a.psi
            .total_cmp(&b.psi)
            .then(a.magnitude.total_cmp(&b.magnitude))
            .then(a.estimator.cmp(&b.estimator))
    });
    Ok(rows)
}

pub fn breakdown_csv(rows: &[BreakdownRow]) -> String {
    let mut out = String::from("psi,magnitude,estimator,error,converged\n");
    for r in rows {
        out.push_str(&format!(
            "{:?},{:?},{},{:?},{}\n",
            r.psi,
            r.magnitude,
            r.estimator.name(),
            r.error,
            r.converged
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KError {
    pub k: usize,
    /// `|mean(first k selections) - mu_G|^2`.
    pub error: f64,
}

/// Evaluation of one selection on a flagged set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k: usize,
    pub subset_mean_error: f64,
    pub theorem_rhs: f64,
    pub theorem_rhs_variance_normalized: f64,
    pub bound_satisfied: bool,
    pub epsilon_abs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_precision: Option<f64>,
    /// Errors at the power-of-two prefixes of the selection, plus `k`.
    pub per_k: Vec<KError>,
    /// Log-log fit of `per_k`; absent with fewer than three usable points.
    pub slope_fit: Option<SlopeFit>,
}

impl MetricsReport {
    pub fn evaluate(set: &EmbeddingSet, indices: &[usize], epsilon_abs: f64) -> Result<Self> {
        let mu_g = set.clean_mean()?;
        let bound = theorem_bound_terms(set, epsilon_abs)?;
        let full_error = subset_mean_error(set, indices, &mu_g)?;
        let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2))
            .take_while(|&k| k < indices.len())
            .collect();
        ks.push(indices.len());
        let per_k = ks
            .into_iter()
            .map(|k| {
                Ok(KError {
                    k,
                    error: subset_mean_error(set, &indices[..k], &mu_g)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let points: Vec<(f64, f64)> = per_k
            .iter()
            .filter(|e| e.error > 0.0)
            .map(|e| (e.k as f64, e.error))
            .collect();
        Ok(Self {
            k: indices.len(),
            subset_mean_error: full_error,
            theorem_rhs: bound.rhs,
            theorem_rhs_variance_normalized: bound.rhs_variance_normalized,
            bound_satisfied: full_error <= bound.rhs,
            epsilon_abs,
            clean_precision: Some(clean_precision(indices, set.flags())?),
            per_k,
            slope_fit: loglog_slope(&points).ok(),
        })
    }

    pub fn per_k_csv(&self) -> String {
        let mut out = String::from("k,subset_mean_error\n");
        for e in &self.per_k {
            out.push_str(&format!("{},{:?}\n", e.k, e.error));
        }
        out
    }
}
