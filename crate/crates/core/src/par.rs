//! Deterministic data parallelism.
//!
//! Per-row work may be spread across threads, but every reduction happens
//! sequentially in row order afterwards, so results are bitwise identical
//! for any thread count.

use rayon::prelude::*;

use crate::data::EmbeddingSet;

/// Below this many scalars the work runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

pub fn map_rows<T, F>(set: &EmbeddingSet, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &[f64]) -> T + Sync + Send,
{
    if set.n() * set.d() < PAR_THRESHOLD {
        set.rows().enumerate().map(|(i, r)| f(i, r)).collect()
    } else {
        set.data()
            .par_chunks_exact(set.d())
            .enumerate()
            .map(|(i, r)| f(i, r))
            .collect()
    }
}

/// Index of the largest value, skipping entries masked off in `available`.
/// Ties go to the lowest index.
pub fn argmax(values: &[f64], available: Option<&[bool]>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if available.is_some_and(|a| !a[i]) {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0], None), Some(1));
        assert_eq!(
            argmax(&[1.0, 3.0, 3.0, 2.0], Some(&[true, false, true, true])),
            Some(2)
        );
        assert_eq!(argmax(&[1.0], Some(&[false])), None);
    }

    #[test]
    fn large_map_matches_sequential() {
        let n = 40_000;
        let data: Vec<f64> = (0..n * 2).map(|i| (i as f64).sin()).collect();
        let set = EmbeddingSet::new(data, n, 2).unwrap();
        let par = map_rows(&set, |_, r| r[0] * r[1]);
        let seq: Vec<f64> = set.rows().map(|r| r[0] * r[1]).collect();
        assert_eq!(par, seq);
    }
}
