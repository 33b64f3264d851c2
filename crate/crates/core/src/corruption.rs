//! Adversarial corruption of embedding sets.
//!
//! An adversary inspects all `n` samples and replaces `floor(psi * n)` of
//! them; the corrupt-to-clean ratio is `alpha = psi / (1 - psi)`. Replaced
//! rows are flagged [`Flag::Corrupt`], the rest [`Flag::Clean`].

use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingSet, Flag};
use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;
use crate::vecops;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CorruptionMode {
    /// Replace rows with draws from `N(cluster_mean, cluster_cov)`.
    #[serde(alias = "gaussian-cluster")]
    GaussianCluster,
    /// Replace rows with `magnitude * e_1`.
    #[serde(alias = "point-at-magnitude")]
    PointAtMagnitude,
    /// Replace rows with one repeated point chosen so that the mean of the
    /// whole set becomes `target`.
    #[serde(alias = "mean-hijack")]
    MeanHijack,
    /// Resample labels uniformly among the other classes; features untouched.
    #[serde(alias = "label-flip")]
    LabelFlip,
}

/// Corruption configuration. Mode-specific parameters are optional fields
/// and are checked by [`CorruptionSpec::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub psi: f64,
    pub mode: CorruptionMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<u32>,
}

impl CorruptionSpec {
    pub fn new(psi: f64, mode: CorruptionMode, seed: u64) -> Self {
        Self {
            psi,
            mode,
            seed,
            cluster_mean: None,
            cluster_cov: None,
            magnitude: None,
            target: None,
            num_classes: None,
        }
    }

    pub fn gaussian_cluster(psi: f64, mean: Vec<f64>, cov: Vec<Vec<f64>>, seed: u64) -> Self {
        Self {
            cluster_mean: Some(mean),
            cluster_cov: Some(cov),
            ..Self::new(psi, CorruptionMode::GaussianCluster, seed)
        }
    }

    pub fn point_at_magnitude(psi: f64, magnitude: f64, seed: u64) -> Self {
        Self {
            magnitude: Some(magnitude),
            ..Self::new(psi, CorruptionMode::PointAtMagnitude, seed)
        }
    }

    pub fn alpha(&self) -> Result<f64> {
        alpha_from_psi(self.psi)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        alpha_from_psi(self.psi)?;
        let missing = |what: &str| Error::InvalidConfig(format!("{:?} needs {what}", self.mode));
        match self.mode {
            CorruptionMode::GaussianCluster => {
                let mean = self.cluster_mean.as_ref().ok_or_else(|| missing("cluster_mean"))?;
                let cov = self.cluster_cov.as_ref().ok_or_else(|| missing("cluster_cov"))?;
                check_dim(d, mean.len())?;
                check_dim(d, cov.len())?;
                for row in cov {
                    check_dim(d, row.len())?;
                }
            }
            CorruptionMode::PointAtMagnitude => {
                let m = self.magnitude.ok_or_else(|| missing("magnitude"))?;
                if !m.is_finite() {
                    return Err(Error::InvalidConfig("magnitude must be finite".into()));
                }
            }
            CorruptionMode::MeanHijack => {
                let t = self.target.as_ref().ok_or_else(|| missing("target"))?;
                check_dim(d, t.len())?;
            }
            CorruptionMode::LabelFlip => {
                if self.num_classes.is_some_and(|c| c < 2) {
                    return Err(Error::InvalidConfig("label flip needs at least 2 classes".into()));
                }
            }
        }
        Ok(())
    }
}

/// `alpha = psi / (1 - psi)` for `psi` in `[0, 0.5)`.
pub fn alpha_from_psi(psi: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&psi) {
        return Err(Error::PsiOutOfRange(psi));
    }
    Ok(psi / (1.0 - psi))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = cov.len();
    let tol = 1e-12 * cov.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..d {
        check_dim(d, cov[i].len())?;
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > tol {
                return Err(Error::CovNotSpd);
            }
        }
    }
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let pivot = cov[i][i] - s;
                if !(pivot > 0.0) || !pivot.is_finite() {
                    return Err(Error::CovNotSpd);
                }
                l[i][i] = pivot.sqrt();
            } else {
                l[i][j] = (cov[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// `n` rows drawn from `N(mean, cov)`, row-major.
pub fn sample_gaussian(n: usize, mean: &[f64], cov: &[Vec<f64>], rng: &mut Rng) -> Result<Vec<f64>> {
    let d = mean.len();
    check_dim(d, cov.len())?;
    let l = cholesky(cov)?;
    let mut out = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        draw_row(&l, mean, &mut z, rng, &mut out);
    }
    Ok(out)
}

fn draw_row(l: &[Vec<f64>], mean: &[f64], z: &mut [f64], rng: &mut Rng, out: &mut Vec<f64>) {
    for v in z.iter_mut() {
        *v = rng.standard_normal();
    }
    for (i, m) in mean.iter().enumerate() {
        out.push(m + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>());
    }
}

/// Applies `spec` to `set` using a generator seeded from `spec.seed`.
pub fn inject(set: &EmbeddingSet, spec: &CorruptionSpec) -> Result<EmbeddingSet> {
    inject_with(set, spec, &mut Rng::new(spec.seed))
}

pub fn inject_with(set: &EmbeddingSet, spec: &CorruptionSpec, rng: &mut Rng) -> Result<EmbeddingSet> {
    spec.validate(set.d())?;
    if set.flags().is_some_and(|f| f.contains(&Flag::Corrupt)) {
        return Err(Error::InvalidConfig("input already contains corrupt rows".into()));
    }
    let n = set.n();
    let d = set.d();
    let m = (spec.psi * n as f64).floor() as usize;

    let mut chosen = rng.sample_indices(n, m);
    chosen.sort_unstable();
    let mut flags = vec![Flag::Clean; n];
    for &i in &chosen {
        flags[i] = Flag::Corrupt;
    }

    let mut out = set.clone().with_flags(flags)?;
    if m == 0 {
        return Ok(out);
    }

    match spec.mode {
        CorruptionMode::LabelFlip => {
            let labels = set.labels().ok_or(Error::MissingLabels)?;
            let classes = match spec.num_classes {
                Some(c) => c,
                None => labels.iter().max().map_or(0, |&l| l + 1),
            };
            if classes < 2 {
                return Err(Error::InvalidConfig("label flip needs at least 2 classes".into()));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
                return Err(Error::InvalidConfig(format!(
                    "label {bad} outside {classes} classes"
                )));
            }
            let mut new_labels = labels.to_vec();
            for &i in &chosen {
                let r = rng.below(classes as usize - 1) as u32;
                new_labels[i] = if r >= labels[i] { r + 1 } else { r };
            }
            out = out.with_labels(new_labels)?;
        }
        CorruptionMode::GaussianCluster => {
            let mean = spec.cluster_mean.as_ref().unwrap();
            let l = cholesky(spec.cluster_cov.as_ref().unwrap())?;
            let mut draws = Vec::with_capacity(m * d);
            let mut z = vec![0.0; d];
            for _ in 0..m {
                draw_row(&l, mean, &mut z, rng, &mut draws);
            }
            let mut data = set.data().to_vec();
            for (slot, &i) in chosen.iter().enumerate() {
                data[i * d..(i + 1) * d].copy_from_slice(&draws[slot * d..(slot + 1) * d]);
            }
            out.replace_data(data)?;
        }
        CorruptionMode::PointAtMagnitude => {
            let mag = spec.magnitude.unwrap();
            let mut data = set.data().to_vec();
            for &i in &chosen {
                let row = &mut data[i * d..(i + 1) * d];
                row.fill(0.0);
                row[0] = mag;
            }
            out.replace_data(data)?;
        }
        CorruptionMode::MeanHijack => {
            // m * x_b = n * target - sum of the rows that stay
            let target = spec.target.as_ref().unwrap();
            let mut point: Vec<f64> = target.iter().map(|t| n as f64 * t).collect();
            let mut is_chosen = vec![false; n];
            for &i in &chosen {
                is_chosen[i] = true;
            }
            for (i, row) in set.rows().enumerate() {
                if !is_chosen[i] {
                    vecops::axpy(&mut point, -1.0, row);
                }
            }
            vecops::scale(&mut point, 1.0 / m as f64);
            let mut data = set.data().to_vec();
            for &i in &chosen {
                data[i * d..(i + 1) * d].copy_from_slice(&point);
            }
            out.replace_data(data)?;
        }
    }
    Ok(out)
}

/// The single point `x_b` whose addition moves the mean of `set` to
/// `target`: `x_b = (n + 1) * target - sum_i x_i`.
pub fn mean_hijack_point(set: &EmbeddingSet, target: &[f64]) -> Result<Vec<f64>> {
    check_dim(set.d(), target.len())?;
    let mut point: Vec<f64> = target.iter().map(|t| (set.n() + 1) as f64 * t).collect();
    for row in set.rows() {
        vecops::axpy(&mut point, -1.0, row);
    }
    Ok(point)
}

/// Change of the squared distance-to-centroid score of `x` when the
/// centroid moves from `mu_g` to `mu_g + delta_mu`:
/// `|delta_mu|^2 - 2 (x - mu_g)^T delta_mu`.
pub fn score_deviation(x: &[f64], mu_g: &[f64], delta_mu: &[f64]) -> Result<f64> {
    check_dim(x.len(), mu_g.len())?;
    check_dim(x.len(), delta_mu.len())?;
    let centered = vecops::sub(x, mu_g);
    Ok(vecops::dot(delta_mu, delta_mu) - 2.0 * vecops::dot(&centered, delta_mu))
}

/// Two-component Gaussian mixture: clean rows from one Gaussian, a fraction
/// `psi` replaced by an adversarial Gaussian cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyGmm {
    pub n: usize,
    pub psi: f64,
    pub clean_mean: Vec<f64>,
    pub clean_cov: Vec<Vec<f64>>,
    pub adv_mean: Vec<f64>,
    pub adv_cov: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Default for ToyGmm {
    fn default() -> Self {
        let cov = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        Self {
            n: 1000,
            psi: 0.2,
            clean_mean: vec![0.0, 0.0],
            clean_cov: cov.clone(),
            adv_mean: vec![-5.0, 5.0],
            adv_cov: cov,
            seed: 0,
        }
    }
}

impl ToyGmm {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn with_psi(mut self, psi: f64) -> Self {
        self.psi = psi;
        self
    }

    /// The uncorrupted draw, flagged all CLEAN.
    pub fn clean(&self) -> Result<EmbeddingSet> {
        let mut rng = Rng::new(self.seed);
        self.clean_with(&mut rng)
    }

    fn clean_with(&self, rng: &mut Rng) -> Result<EmbeddingSet> {
        let data = sample_gaussian(self.n, &self.clean_mean, &self.clean_cov, rng)?;
        let d = self.clean_mean.len();
        EmbeddingSet::new(data, self.n, d)?.with_flags(vec![Flag::Clean; self.n])
    }

    /// Clean draw followed by Gaussian-cluster corruption. The corruption
    /// seed is the next draw from the generator after the clean sample.
    pub fn generate(&self) -> Result<EmbeddingSet> {
        let mut rng = Rng::new(self.seed);
        let clean = self.clean_with(&mut rng)?;
        let spec = self.corruption_spec(rng.next_u64());
        inject(&clean, &spec)
    }

    fn corruption_spec(&self, seed: u64) -> CorruptionSpec {
        CorruptionSpec::gaussian_cluster(self.psi, self.adv_mean.clone(), self.adv_cov.clone(), seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> EmbeddingSet {
        let data: Vec<f64> = (0..n * 2).map(|i| (i as f64 * 0.37).sin()).collect();
        EmbeddingSet::new(data, n, 2).unwrap()
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_from_psi(0.0).unwrap(), 0.0);
        assert!((alpha_from_psi(1.0 / 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((alpha_from_psi(0.2).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(alpha_from_psi(0.5), Err(Error::PsiOutOfRange(_))));
        assert!(matches!(alpha_from_psi(-0.1), Err(Error::PsiOutOfRange(_))));
    }

    #[test]
    fn psi_zero_is_identity() {
        let set = grid(10);
        let out = inject(&set, &CorruptionSpec::point_at_magnitude(0.0, 1e6, 3)).unwrap();
        assert_eq!(out.data(), set.data());
        assert!(out.flags().unwrap().iter().all(|f| *f == Flag::Clean));
    }

    #[test]
    fn gaussian_cluster_counts_and_location() {
        let set = grid(1000);
        let cov = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        let spec = CorruptionSpec::gaussian_cluster(0.2, vec![-5.0, 5.0], cov, 11);
        let out = inject(&set, &spec).unwrap();
        let bad = out.indices_with_flag(Flag::Corrupt).unwrap();
        assert_eq!(bad.len(), 200);
        let m = out.mean_of(&bad).unwrap();
        assert!((m[0] + 5.0).abs() < 0.25 && (m[1] - 5.0).abs() < 0.25);
        for i in out.indices_with_flag(Flag::Clean).unwrap() {
            assert_eq!(out.row(i), set.row(i));
        }
    }

    #[test]
    fn point_at_magnitude_places_on_first_axis() {
        let set = grid(20);
        let out = inject(&set, &CorruptionSpec::point_at_magnitude(0.25, 1e3, 1)).unwrap();
        let bad = out.indices_with_flag(Flag::Corrupt).unwrap();
        assert_eq!(bad.len(), 5);
        for i in bad {
            assert_eq!(out.row(i), &[1e3, 0.0]);
        }
    }

    #[test]
    fn mean_hijack_mode_moves_mean() {
        let set = grid(50);
        let spec = CorruptionSpec {
            target: Some(vec![3.0, -4.0]),
            ..CorruptionSpec::new(0.1, CorruptionMode::MeanHijack, 5)
        };
        let out = inject(&set, &spec).unwrap();
        let m = out.mean();
        assert!((m[0] - 3.0).abs() < 1e-12 && (m[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn label_flip_two_classes() {
        let labels: Vec<u32> = (0..100).map(|i| i % 2).collect();
        let set = grid(100).with_labels(labels.clone()).unwrap();
        assert!(matches!(
            inject(&set, &CorruptionSpec::new(0.5, CorruptionMode::LabelFlip, 0)),
            Err(Error::PsiOutOfRange(_))
        ));
        let out = inject(&set, &CorruptionSpec::new(0.35, CorruptionMode::LabelFlip, 0)).unwrap();
        let flipped = labels
            .iter()
            .zip(out.labels().unwrap())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(flipped, 35);
        assert_eq!(out.data(), set.data());
        assert!(matches!(
            inject(&grid(10), &CorruptionSpec::new(0.2, CorruptionMode::LabelFlip, 0)),
            Err(Error::MissingLabels)
        ));
    }

    #[test]
    fn label_flip_never_keeps_label() {
        let labels: Vec<u32> = (0..300).map(|i| i % 5).collect();
        let set = grid(300).with_labels(labels.clone()).unwrap();
        let out = inject(&set, &CorruptionSpec::new(0.4, CorruptionMode::LabelFlip, 9)).unwrap();
        for i in out.indices_with_flag(Flag::Corrupt).unwrap() {
            assert_ne!(out.labels().unwrap()[i], labels[i]);
            assert!(out.labels().unwrap()[i] < 5);
        }
    }

    #[test]
    fn rejects_already_corrupt_and_bad_cov() {
        let set = grid(10).with_flags(vec![Flag::Corrupt; 10]).unwrap();
        assert!(inject(&set, &CorruptionSpec::point_at_magnitude(0.2, 1.0, 0)).is_err());
        let spec = CorruptionSpec::gaussian_cluster(
            0.2,
            vec![0.0, 0.0],
            vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            0,
        );
        assert!(matches!(inject(&grid(10), &spec), Err(Error::CovNotSpd)));
        let spec = CorruptionSpec::gaussian_cluster(
            0.2,
            vec![0.0, 0.0],
            vec![vec![1.0, 0.1], vec![0.2, 1.0]],
            0,
        );
        assert!(matches!(inject(&grid(10), &spec), Err(Error::CovNotSpd)));
        let spec = CorruptionSpec::new(0.2, CorruptionMode::PointAtMagnitude, 0);
        assert!(matches!(inject(&grid(10), &spec), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn hijack_point_examples() {
        let set = EmbeddingSet::new(vec![1.0, 2.0, 3.0], 3, 1).unwrap();
        assert_eq!(mean_hijack_point(&set, &[100.0]).unwrap(), vec![394.0]);
        assert_eq!(mean_hijack_point(&set, &[2.0]).unwrap(), vec![2.0]);
        let appended = set.append_row(&[394.0], None, Flag::Corrupt).unwrap();
        assert_eq!(appended.mean(), vec![100.0]);
    }

    #[test]
    fn score_deviation_examples() {
        assert_eq!(score_deviation(&[1.0, 2.0], &[0.5, 0.5], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(score_deviation(&[2.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]).unwrap(), -3.0);
        assert_eq!(score_deviation(&[1.0, 1.0], &[1.0, 1.0], &[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn cholesky_reconstructs() {
        let cov = vec![vec![4.0, 2.0, 0.4], vec![2.0, 5.0, 1.0], vec![0.4, 1.0, 3.0]];
        let l = cholesky(&cov).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - cov[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn toy_gmm_shape() {
        let toy = ToyGmm::with_seed(4).generate().unwrap();
        assert_eq!((toy.n(), toy.d()), (1000, 2));
        assert_eq!(toy.indices_with_flag(Flag::Corrupt).unwrap().len(), 200);
        let clean = toy.clean_mean().unwrap();
        assert!(vecops::norm(&clean) < 0.15);
        assert_eq!(toy, ToyGmm::with_seed(4).generate().unwrap());
    }
}
