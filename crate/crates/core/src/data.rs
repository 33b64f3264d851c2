//! Dense embedding tables.
//!
//! An [`EmbeddingSet`] is an immutable `n x d` row-major matrix of `f64`
//! with optional per-row group labels and clean/corrupt provenance flags.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vecops;

/// Provenance of a row: part of the uncorrupted partition or injected by an
/// adversary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Flag {
    Clean,
    Corrupt,
}

impl Flag {
    pub fn to_byte(self) -> u8 {
        match self {
            Flag::Clean => 0,
            Flag::Corrupt => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Flag::Clean),
            1 => Some(Flag::Corrupt),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<u32>>,
    flags: Option<Vec<Flag>>,
}

impl EmbeddingSet {
    /// Builds a set from row-major data. Rejects empty shapes, length
    /// mismatches and non-finite entries.
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidConfig(format!(
                "embedding set needs n >= 1 and d >= 1, got n = {n}, d = {d}"
            )));
        }
        check_dim(n * d, data.len())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self {
            data,
            n,
            d,
            labels: None,
            flags: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * d);
        for row in rows {
            check_dim(d, row.as_ref().len())?;
            data.extend_from_slice(row.as_ref());
        }
        Self::new(data, n, d)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        check_dim(self.n, labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_flags(mut self, flags: Vec<Flag>) -> Result<Self> {
        check_dim(self.n, flags.len())?;
        self.flags = Some(flags);
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn without_flags(mut self) -> Self {
        self.flags = None;
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn flags(&self) -> Option<&[Flag]> {
        self.flags.as_deref()
    }

    /// Empirical mean of all rows.
    pub fn mean(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.d];
        for row in self.rows() {
            vecops::add_assign(&mut sum, row);
        }
        vecops::scale(&mut sum, 1.0 / self.n as f64);
        sum
    }

    /// Mean of the rows at `indices`, duplicates counted with multiplicity.
    pub fn mean_of(&self, indices: &[usize]) -> Result<Vec<f64>> {
        if indices.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut sum = vec![0.0; self.d];
        for &i in indices {
            self.check_index(i)?;
            vecops::add_assign(&mut sum, self.row(i));
        }
        vecops::scale(&mut sum, 1.0 / indices.len() as f64);
        Ok(sum)
    }

    /// Largest per-column range `max_i x_ij - min_i x_ij`.
    pub fn data_scale(&self) -> f64 {
        (0..self.d)
            .map(|j| {
                let (lo, hi) = self
                    .rows()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r[j]), hi.max(r[j]))
                    });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    pub fn indices_with_flag(&self, flag: Flag) -> Result<Vec<usize>> {
        let flags = self.flags.as_ref().ok_or(Error::MissingFlags)?;
        Ok(flags
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == flag)
            .map(|(i, _)| i)
            .collect())
    }

    /// Mean of the rows flagged CLEAN.
    pub fn clean_mean(&self) -> Result<Vec<f64>> {
        self.mean_of(&self.indices_with_flag(Flag::Clean)?)
    }

    /// Materializes the rows at `indices` in the given order, carrying
    /// labels and flags along. Repeated indices are allowed.
    pub fn subset_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            self.check_index(i)?;
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            data,
            n: indices.len(),
            d: self.d,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            flags: self
                .flags
                .as_ref()
                .map(|f| indices.iter().map(|&i| f[i]).collect()),
        })
    }

    /// Copy with each row scaled to unit Euclidean norm. Zero rows stay zero.
    pub fn l2_normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.d) {
            let norm = vecops::norm(row);
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }

    /// Copy with one extra row appended; labels and flags are extended with
    /// the given values when present.
    pub fn append_row(&self, row: &[f64], label: Option<u32>, flag: Flag) -> Result<Self> {
        check_dim(self.d, row.len())?;
        let mut data = self.data.clone();
        data.extend_from_slice(row);
        let mut out = Self::new(data, self.n + 1, self.d)?;
        if let Some(labels) = &self.labels {
            let mut l = labels.clone();
            l.push(label.unwrap_or(0));
            out.labels = Some(l);
        }
        let mut f = self
            .flags
            .clone()
            .unwrap_or_else(|| vec![Flag::Clean; self.n]);
        f.push(flag);
        out.flags = Some(f);
        Ok(out)
    }

    pub(crate) fn replace_data(&mut self, data: Vec<f64>) -> Result<()> {
        check_dim(self.n * self.d, data.len())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / self.d,
                col: pos % self.d,
            });
        }
        self.data = data;
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.n,
            });
        }
        Ok(())
    }
}
