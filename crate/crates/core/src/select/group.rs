use std::collections::BTreeMap;

use crate::data::EmbeddingSet;
use crate::error::{Error, Result};

use super::{GroupSelection, Replacement, SelectionResult, SelectorConfig};

/// Splits `k` proportionally to `sizes` by largest remainder. Equal
/// remainders favour the earlier group.
pub fn largest_remainder_quotas(sizes: &[usize], k: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| k * s / total).collect();
    let left = k - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&g| (std::cmp::Reverse(k * sizes[g] % total), g));
    for &g in order.iter().take(left) {
        quotas[g] += 1;
    }
    quotas
}

/// Runs `inner` on each label group with its quota of `cfg.k`.
///
/// Groups are visited in ascending label order. Group `g` (by position) gets
/// seed `cfg.seed + g`. Indices, residual traces and theta traces are
/// concatenated in group order; the reported target is the quota-weighted
/// mean of the group targets.
pub fn per_group_select<F>(set: &EmbeddingSet, cfg: &SelectorConfig, inner: F) -> Result<SelectionResult>
where
    F: Fn(&EmbeddingSet, &SelectorConfig) -> Result<SelectionResult>,
{
    let labels = set.labels().ok_or(Error::MissingLabels)?;
    if cfg.k == 0 {
        return Err(Error::ZeroK);
    }
    let without = cfg.replacement == Replacement::Without;
    if without && cfg.k > set.n() {
        return Err(Error::KTooLarge {
            k: cfg.k,
            available: set.n(),
        });
    }

    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let quotas = largest_remainder_quotas(&sizes, cfg.k);
    for ((&label, members), &quota) in groups.iter().zip(&quotas) {
        if without && quota > members.len() {
            return Err(Error::GroupSmallerThanQuota {
                label,
                size: members.len(),
                quota,
            });
        }
    }

    let d = set.d();
    let mut out = SelectionResult {
        method: cfg.method,
        k: cfg.k,
        indices: Vec::with_capacity(cfg.k),
        target: vec![0.0; d],
        residual_trace: Vec::with_capacity(cfg.k),
        theta_norm_trace: Vec::new(),
        clean_residual_trace: None,
        groups: Some(Vec::with_capacity(groups.len())),
        config: cfg.clone(),
        seed: cfg.seed,
    };
    for (g, ((&label, members), &quota)) in groups.iter().zip(&quotas).enumerate() {
        let mut summary = GroupSelection {
            label,
            size: members.len(),
            quota,
            target: Vec::new(),
        };
        if quota > 0 {
            let sub = set.subset_rows(members)?;
            let mut sub_cfg = cfg.clone();
            sub_cfg.k = quota;
            sub_cfg.group_by_labels = false;
            sub_cfg.seed = cfg.seed.wrapping_add(g as u64);
            let r = inner(&sub, &sub_cfg)?;
            out.indices.extend(r.indices.iter().map(|&i| members[i]));
            out.residual_trace.extend(r.residual_trace);
            out.theta_norm_trace.extend(r.theta_norm_trace);
            let w = quota as f64 / cfg.k as f64;
            for (t, v) in out.target.iter_mut().zip(&r.target) {
                *t += w * v;
            }
            summary.target = r.target;
        }
        out.groups.as_mut().expect("initialized above").push(summary);
    }
    Ok(out)
}
