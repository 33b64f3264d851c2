//! Geometric median (Fermat-Weber point) by Weiszfeld iteration.
//!
//! The plain Weiszfeld map is undefined when the iterate lands on a data
//! row. Rows within `anchor_eps` of the iterate are treated as coincident
//! and the Vardi-Zhang modified step is applied: with `eta` coincident rows
//! and `R = sum over the others of (x_i - z) / |x_i - z|`, the anchor is
//! optimal when `|R| <= eta`; otherwise the iterate moves off it by the
//! Weiszfeld step damped by `1 - eta / |R|`.
//!
//! Accuracy is not certified a priori. [`epsilon_estimate`] compares a
//! result against a high-budget reference run ([`GmConfig::oracle`]).

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingSet;
use crate::error::{check_dim, Error, Result};
use crate::par;
use crate::vecops;

/// Stalled iterations tolerated before giving up.
pub const STALL_ITERS: usize = 50;

const ANCHOR_CHECK_EVERY: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GmInit {
    CoordinateMedian,
    Mean,
    GivenPoint(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmConfig {
    /// Stop once both the last move and the estimated distance to the
    /// limit are below `step_tol * scale`.
    pub step_tol: f64,
    /// Stall guard: stop after `STALL_ITERS` iterations whose relative
    /// objective decrease is at most this value while the step failed to
    /// shrink.
    pub obj_tol: f64,
    pub max_iters: usize,
    pub init: GmInit,
    /// Coincidence radius for anchor handling, relative to `scale`.
    pub anchor_eps: f64,
}

impl Default for GmConfig {
    fn default() -> Self {
        Self {
            step_tol: 1e-10,
            obj_tol: 1e-12,
            max_iters: 10_000,
            init: GmInit::CoordinateMedian,
            anchor_eps: 1e-12,
        }
    }
}

impl GmConfig {
    /// High-budget settings used to produce reference objectives.
    pub fn oracle() -> Self {
        Self {
            step_tol: 1e-14,
            obj_tol: 1e-14,
            max_iters: 1_000_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.step_tol) || !positive(self.obj_tol) || !positive(self.anchor_eps) {
            return Err(Error::InvalidConfig("GM tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmResult {
    pub point: Vec<f64>,
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
    pub final_step: f64,
    pub grad_norm: f64,
    pub config: GmConfig,
    pub seed_context: Option<u64>,
}

/// `rho(z) = sum_i |z - x_i|`.
pub fn fermat_weber_objective(z: &[f64], set: &EmbeddingSet) -> Result<f64> {
    check_dim(set.d(), z.len())?;
    Ok(objective(z, set))
}

fn objective(z: &[f64], set: &EmbeddingSet) -> f64 {
    par::map_rows(set, |_, x| vecops::dist(z, x)).into_iter().sum()
}

/// Column-wise lower median.
pub fn coordinate_median(set: &EmbeddingSet) -> Vec<f64> {
    let mid = (set.n() - 1) / 2;
    let mut col = Vec::with_capacity(set.n());
    (0..set.d())
        .map(|j| {
            col.clear();
            col.extend(set.rows().map(|r| r[j]));
            let (_, m, _) = col.select_nth_unstable_by(mid, f64::total_cmp);
            *m
        })
        .collect()
}

/// Scale used to make stopping and anchor tolerances unit-free: the median
/// distance from `center` to the rows, falling back to the largest column
/// range when at least half the rows sit on `center`.
fn robust_scale(set: &EmbeddingSet, center: &[f64]) -> f64 {
    let mut dists = par::map_rows(set, |_, x| vecops::dist(center, x));
    let mid = (dists.len() - 1) / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        set.data_scale()
    }
}

struct Step {
    next: Vec<f64>,
    /// The iterate sits on an anchor that satisfies the optimality test.
    optimal_anchor: bool,
    /// Norm of the (sub)gradient surrogate at the input point.
    grad_norm: f64,
}

fn step(z: &[f64], set: &EmbeddingSet, anchor_radius: f64) -> Step {
    let d = set.d();
    let dists = par::map_rows(set, |_, x| vecops::dist(z, x));

    // Anchor: the nearest coincident row, if any.
    let mut anchor: Option<usize> = None;
    let mut eta = 0usize;
    for (i, &r) in dists.iter().enumerate() {
        if r < anchor_radius {
            eta += 1;
            if anchor.is_none_or(|a| r < dists[a]) {
                anchor = Some(i);
            }
        }
    }
    let base: Vec<f64> = match anchor {
        Some(a) => set.row(a).to_vec(),
        None => z.to_vec(),
    };

    let mut weighted = vec![0.0; d];
    let mut weight_sum = 0.0;
    let mut pull = vec![0.0; d];
    for (i, x) in set.rows().enumerate() {
        let r = dists[i];
        if r < anchor_radius {
            continue;
        }
        let r = if anchor.is_some() {
            vecops::dist(&base, x)
        } else {
            r
        };
        if r == 0.0 {
            continue;
        }
        let w = 1.0 / r;
        vecops::axpy(&mut weighted, w, x);
        weight_sum += w;
        for ((p, xi), bi) in pull.iter_mut().zip(x).zip(&base) {
            *p += (xi - bi) * w;
        }
    }
    let pull_norm = vecops::norm(&pull);

    if weight_sum == 0.0 {
        // Every row coincides with the anchor.
        return Step {
            next: base,
            optimal_anchor: true,
            grad_norm: 0.0,
        };
    }
    vecops::scale(&mut weighted, 1.0 / weight_sum);

    if anchor.is_none() {
        return Step {
            next: weighted,
            optimal_anchor: false,
            grad_norm: pull_norm,
        };
    }

    let eta = eta as f64;
    if pull_norm <= eta {
        return Step {
            next: base,
            optimal_anchor: true,
            grad_norm: 0.0,
        };
    }
    let damp = 1.0 - eta / pull_norm;
    let next = base
        .iter()
        .zip(&weighted)
        .map(|(b, t)| b + damp * (t - b))
        .collect();
    Step {
        next,
        optimal_anchor: false,
        grad_norm: pull_norm - eta,
    }
}

fn optimal_nearest_row(z: &[f64], set: &EmbeddingSet, anchor_radius: f64) -> Option<Vec<f64>> {
    let nearest = set
        .rows()
        .min_by(|a, b| vecops::dist_sq(a, z).total_cmp(&vecops::dist_sq(b, z)))?;
    let s = step(nearest, set, anchor_radius);
    s.optimal_anchor.then_some(s.next)
}

/// One Weiszfeld update from `z`, with anchor-aware handling when `z` lies
/// within `anchor_eps` (absolute) of a data row.
pub fn weiszfeld_step(z: &[f64], set: &EmbeddingSet, anchor_eps: f64) -> Result<Vec<f64>> {
    check_dim(set.d(), z.len())?;
    Ok(step(z, set, anchor_eps).next)
}

pub fn geometric_median(set: &EmbeddingSet, cfg: &GmConfig) -> Result<GmResult> {
    geometric_median_traced(set, cfg).map(|(r, _)| r)
}

/// Like [`geometric_median`], also returning the objective value after
/// every iteration (starting with the initial point).
pub fn geometric_median_traced(
    set: &EmbeddingSet,
    cfg: &GmConfig,
) -> Result<(GmResult, Vec<f64>)> {
    cfg.validate()?;
    let init = match &cfg.init {
        GmInit::CoordinateMedian => coordinate_median(set),
        GmInit::Mean => set.mean(),
        GmInit::GivenPoint(p) => {
            check_dim(set.d(), p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig("initial point is not finite".into()));
            }
            p.clone()
        }
    };

    let scale = robust_scale(set, &init);
    let finish = |point: Vec<f64>, objective, iters, converged, final_step, grad_norm| GmResult {
        point,
        objective,
        iters,
        converged,
        final_step,
        grad_norm,
        config: cfg.clone(),
        seed_context: None,
    };
    if scale == 0.0 {
        // All rows identical.
        let point = set.row(0).to_vec();
        return Ok((finish(point, 0.0, 0, true, 0.0, 0.0), vec![0.0]));
    }

    let anchor_radius = cfg.anchor_eps * scale;
    let step_limit = cfg.step_tol * scale;

    let mut z = init;
    let mut f = objective(&z, set);
    let mut trace = vec![f];
    let mut converged = false;
    let mut final_step = f64::INFINITY;
    let mut stalled = 0;
    let mut iters = 0;

    while iters < cfg.max_iters {
        iters += 1;
        let s = step(&z, set, anchor_radius);
        let prev_step = final_step;
        final_step = vecops::dist(&s.next, &z);
        let f_new = objective(&s.next, set);
        trace.push(f_new);
        let rel_decrease = (f - f_new) / f.max(f64::MIN_POSITIVE);
        z = s.next;
        f = f_new;
        if s.optimal_anchor {
            converged = true;
            break;
        }
        // Linear convergence at rate r leaves about step * r / (1 - r) to go.
        let ratio = final_step / prev_step;
        let remaining = if ratio < 1.0 {
            final_step * ratio / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        if final_step <= step_limit && remaining <= step_limit {
            converged = true;
            break;
        }
        if rel_decrease <= cfg.obj_tol && ratio >= 1.0 {
            stalled += 1;
            if stalled >= STALL_ITERS {
                converged = true;
                break;
            }
        }
        if iters % ANCHOR_CHECK_EVERY == 0 {
            if let Some(row) = optimal_nearest_row(&z, set, anchor_radius) {
                if row != z {
                    f = objective(&row, set);
                    z = row;
                }
                converged = true;
                break;
            }
        }
    }

    // Weiszfeld only approaches an optimal data row slowly; if the nearest
    // row passes the anchor optimality test, it is the exact answer.
    if let Some(row) = optimal_nearest_row(&z, set, anchor_radius) {
        if row != z {
            f = objective(&row, set);
            z = row;
        }
    }
    let grad_norm = step(&z, set, anchor_radius).grad_norm;

    Ok((finish(z, f, iters, converged, final_step, grad_norm), trace))
}

/// Relative accuracy estimate `objective / reference - 1`.
pub fn epsilon_estimate(result: &GmResult, reference_objective: f64) -> Result<f64> {
    if !(reference_objective > 0.0) {
        return Err(Error::NonPositiveReference(reference_objective));
    }
    Ok(result.objective / reference_objective - 1.0)
}

/// Absolute objective gap `objective - reference`, floored at zero.
pub fn absolute_gap(result: &GmResult, reference_objective: f64) -> f64 {
    (result.objective - reference_objective).max(0.0)
}

/// Radius of the largest disc around `point` contained in the convex hull
/// of the rows. Only defined for `d = 2`; zero when `point` is outside the
/// hull or the hull is degenerate.
pub fn interiority_radius(point: &[f64], set: &EmbeddingSet) -> Option<f64> {
    if set.d() != 2 || point.len() != 2 {
        return None;
    }
    let hull = convex_hull(set);
    if hull.len() < 3 {
        return Some(0.0);
    }
    let mut radius = f64::INFINITY;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let edge = [b[0] - a[0], b[1] - a[1]];
        let len = (edge[0] * edge[0] + edge[1] * edge[1]).sqrt();
        // Counter-clockwise hull: interior is on the left of each edge.
        let signed = (edge[0] * (point[1] - a[1]) - edge[1] * (point[0] - a[0])) / len;
        if signed < 0.0 {
            return Some(0.0);
        }
        radius = radius.min(signed);
    }
    Some(radius)
}

/// Andrew's monotone chain, counter-clockwise, collinear points dropped.
fn convex_hull(set: &EmbeddingSet) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = set.rows().map(|r| [r[0], r[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set1d(v: &[f64]) -> EmbeddingSet {
        EmbeddingSet::new(v.to_vec(), v.len(), 1).unwrap()
    }

    #[test]
    fn objective_examples() {
        let one = EmbeddingSet::from_rows(&[[1.5, -2.0]]).unwrap();
        assert_eq!(fermat_weber_objective(&[1.5, -2.0], &one).unwrap(), 0.0);
        let two = EmbeddingSet::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(fermat_weber_objective(&[0.0, 0.0], &two).unwrap(), 5.0);
        assert_eq!(fermat_weber_objective(&[2.0], &set1d(&[1.0, 2.0, 100.0])).unwrap(), 99.0);
        assert!(matches!(
            fermat_weber_objective(&[0.0], &two),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn weiszfeld_step_by_hand() {
        // (0/5 + 1/4 + 10/5) / (1/5 + 1/4 + 1/5) = 2.25 / 0.65
        let z = weiszfeld_step(&[5.0], &set1d(&[0.0, 1.0, 10.0]), 1e-12).unwrap();
        assert!((z[0] - 2.25 / 0.65).abs() < 1e-12);
        assert!((z[0] - 3.4615).abs() < 1e-4);
    }

    #[test]
    fn step_onto_identical_points() {
        let set = EmbeddingSet::from_rows(&[[2.0, 3.0]; 4]).unwrap();
        let z = weiszfeld_step(&[-1.0, 7.0], &set, 1e-12).unwrap();
        assert!(vecops::dist(&z, &[2.0, 3.0]) < 1e-14);
    }

    #[test]
    fn optimal_anchor_is_kept() {
        let set = set1d(&[1.0, 2.0, 100.0]);
        assert_eq!(weiszfeld_step(&[2.0], &set, 1e-9).unwrap(), vec![2.0]);
        assert_eq!(weiszfeld_step(&[2.0 + 1e-12], &set, 1e-9).unwrap(), vec![2.0]);
    }

    #[test]
    fn non_optimal_anchor_moves_downhill() {
        // Row (0,0) is not optimal: three rows pull to the right.
        let set = EmbeddingSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, -1.0]])
            .unwrap();
        let z = weiszfeld_step(&[0.0, 0.0], &set, 1e-12).unwrap();
        assert!(z[0] > 0.0);
        assert!(
            fermat_weber_objective(&z, &set).unwrap()
                < fermat_weber_objective(&[0.0, 0.0], &set).unwrap()
        );
    }

    #[test]
    fn descent_away_from_anchors() {
        let set = EmbeddingSet::from_rows(&[[0.0, 0.0], [4.0, 1.0], [1.0, 3.0], [-2.0, 5.0]])
            .unwrap();
        let mut z = vec![10.0, -10.0];
        let mut f = fermat_weber_objective(&z, &set).unwrap();
        for _ in 0..50 {
            z = weiszfeld_step(&z, &set, 1e-12).unwrap();
            let g = fermat_weber_objective(&z, &set).unwrap();
            assert!(g <= f + 1e-12);
            f = g;
        }
    }

    #[test]
    fn symmetric_cross_and_line() {
        let cross = EmbeddingSet::from_rows(&[[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]])
            .unwrap();
        let r = geometric_median(&cross, &GmConfig::default()).unwrap();
        assert!(vecops::norm(&r.point) < 1e-9);
        assert!(r.converged);

        let r = geometric_median(&set1d(&[1.0, 2.0, 100.0]), &GmConfig::default()).unwrap();
        assert!((r.point[0] - 2.0).abs() < 1e-9);
        assert_eq!(r.objective, 99.0);
    }

    #[test]
    fn mean_init_still_finds_median() {
        let cfg = GmConfig {
            init: GmInit::Mean,
            ..GmConfig::default()
        };
        let r = geometric_median(&set1d(&[1.0, 2.0, 100.0]), &cfg).unwrap();
        assert!((r.point[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn identical_rows_short_circuit() {
        let set = EmbeddingSet::from_rows(&[[1.0, 1.0]; 3]).unwrap();
        let r = geometric_median(&set, &GmConfig::default()).unwrap();
        assert_eq!(r.point, vec![1.0, 1.0]);
        assert_eq!(r.objective, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let set = EmbeddingSet::from_rows(&[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [7.0, 7.0]])
            .unwrap();
        let cfg = GmConfig {
            max_iters: 1,
            init: GmInit::GivenPoint(vec![100.0, 100.0]),
            ..GmConfig::default()
        };
        let r = geometric_median(&set, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iters, 1);
        assert!(r.objective < fermat_weber_objective(&[100.0, 100.0], &set).unwrap());
    }

    #[test]
    fn result_invariants() {
        let set = EmbeddingSet::from_rows(&[[0.3, 2.0], [5.0, -1.0], [2.2, 2.2], [1.0, 0.0], [4.0, 4.0]])
            .unwrap();
        let r = geometric_median(&set, &GmConfig::default()).unwrap();
        let rho = fermat_weber_objective(&r.point, &set).unwrap();
        assert!((r.objective - rho).abs() <= 1e-12 * rho);
        for j in 0..2 {
            let lo = set.rows().map(|x| x[j]).fold(f64::INFINITY, f64::min);
            let hi = set.rows().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= r.point[j] && r.point[j] <= hi);
        }
    }

    #[test]
    fn coordinate_median_examples() {
        assert_eq!(coordinate_median(&set1d(&[1.0, 2.0, 100.0])), vec![2.0]);
        let s = EmbeddingSet::from_rows(&[[0.0, 5.0], [1.0, 4.0], [2.0, 3.0], [3.0, 2.0]]).unwrap();
        assert_eq!(coordinate_median(&s), vec![1.0, 3.0]);
        let one = EmbeddingSet::from_rows(&[[7.0, -1.0]]).unwrap();
        assert_eq!(coordinate_median(&one), vec![7.0, -1.0]);
    }

    #[test]
    fn epsilon_examples() {
        let set = set1d(&[1.0, 2.0, 100.0]);
        let mut r = geometric_median(&set, &GmConfig::default()).unwrap();
        assert_eq!(epsilon_estimate(&r, r.objective).unwrap(), 0.0);
        r.objective = 101.0;
        assert!((epsilon_estimate(&r, 100.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(absolute_gap(&r, 100.0), 1.0);
        assert!(matches!(epsilon_estimate(&r, 0.0), Err(Error::NonPositiveReference(_))));
        assert!(matches!(epsilon_estimate(&r, f64::NAN), Err(Error::NonPositiveReference(_))));
    }

    #[test]
    fn config_validation() {
        let bad = GmConfig {
            step_tol: 0.0,
            ..GmConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GmConfig {
            max_iters: 0,
            ..GmConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(GmConfig::oracle().validate().is_ok());
    }

    #[test]
    fn interiority_radius_of_square_center() {
        let sq = EmbeddingSet::from_rows(&[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0], [1.0, 1.0]])
            .unwrap();
        assert!((interiority_radius(&[1.0, 1.0], &sq).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(interiority_radius(&[3.0, 1.0], &sq), Some(0.0));
        assert_eq!(interiority_radius(&[1.0], &set1d(&[1.0])), None);
    }
}
