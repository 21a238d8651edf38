//! Normalization, pairwise distances and exact nearest-neighbor search.
//!
//! Every distance is accumulated in `f64`. Neighbor lists are ordered by
//! increasing distance with ties resolved toward the smaller sample index, so
//! tables are fully deterministic and independent of thread scheduling.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurestore::FeatureMatrix;
use crate::scalar::Scalar;

/// How distances between rows are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Euclidean distance between unit vectors; ranks exactly like cosine
    /// similarity. Requires normalized input.
    #[default]
    CosineOnUnitSphere,
    Euclidean,
}

impl DistanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::CosineOnUnitSphere => "cosine_on_unit_sphere",
            DistanceKind::Euclidean => "euclidean",
        }
    }

    fn check<T: Scalar>(self, matrix: &FeatureMatrix<T>) -> Result<()> {
        if self == DistanceKind::CosineOnUnitSphere && !matrix.is_normalized() {
            return Err(Error::NotNormalized);
        }
        Ok(())
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine_on_unit_sphere" | "cosine" => Ok(DistanceKind::CosineOnUnitSphere),
            "euclidean" => Ok(DistanceKind::Euclidean),
            other => Err(Error::InvalidArgument(format!(
                "unknown distance kind {other:?}"
            ))),
        }
    }
}

/// Top-k neighbor lists, one per row, self excluded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborTable {
    k: usize,
    n_samples: usize,
    distance: DistanceKind,
    indices: Vec<usize>,
}

impl NeighborTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn distance(&self) -> DistanceKind {
        self.distance
    }

    /// Neighbors of row `i`, nearest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.indices.chunks_exact(self.k)
    }

    /// The table for a smaller `k`. Each list is a prefix of the longer one.
    pub fn truncate(&self, k: usize) -> Result<NeighborTable> {
        if k == 0 || k > self.k {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a k={} table to k={k}",
                self.k
            )));
        }
        let indices = self
            .rows()
            .flat_map(|row| row[..k].iter().copied())
            .collect();
        Ok(NeighborTable {
            k,
            n_samples: self.n_samples,
            distance: self.distance,
            indices,
        })
    }
}

/// Dense symmetric `N x N` matrix of pairwise distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Scales every row to unit Euclidean norm.
pub fn l2_normalize<T: Scalar>(matrix: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    let d = matrix.n_dims();
    let mut data = Vec::with_capacity(matrix.as_slice().len());
    for (i, row) in matrix.rows().enumerate() {
        let norm = row
            .iter()
            .map(|v| v.widen() * v.widen())
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroRow { row: i });
        }
        data.extend(row.iter().map(|v| T::narrow(v.widen() / norm)));
    }
    FeatureMatrix::from_vec(matrix.n_samples(), d, data)
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.widen() * y.widen()).sum()
}

#[inline]
pub(crate) fn squared_euclidean<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff = x.widen() - y.widen();
            diff * diff
        })
        .sum()
}

/// Ranking key: smaller means nearer. For unit vectors, negated inner product.
#[inline]
fn rank_key<T: Scalar>(distance: DistanceKind, a: &[T], b: &[T]) -> f64 {
    match distance {
        DistanceKind::CosineOnUnitSphere => -dot(a, b),
        DistanceKind::Euclidean => squared_euclidean(a, b),
    }
}

#[inline]
fn distance_value<T: Scalar>(distance: DistanceKind, a: &[T], b: &[T]) -> f64 {
    match distance {
        DistanceKind::CosineOnUnitSphere => (2.0 - 2.0 * dot(a, b)).max(0.0).sqrt(),
        DistanceKind::Euclidean => squared_euclidean(a, b).sqrt(),
    }
}

fn by_key_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .expect("finite distances")
        .then(a.1.cmp(&b.1))
}

/// Exhaustive k-nearest-neighbor search.
pub fn knn_table<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    k: usize,
    distance: DistanceKind,
) -> Result<NeighborTable> {
    let n = matrix.n_samples();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    distance.check(matrix)?;

    let indices: Vec<usize> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let query = matrix.row(i);
            let mut candidates: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (rank_key(distance, query, matrix.row(j)), j))
                .collect();
            if k < candidates.len() {
                candidates.select_nth_unstable_by(k - 1, by_key_then_index);
                candidates.truncate(k);
            }
            candidates.sort_unstable_by(by_key_then_index);
            candidates.into_iter().map(|(_, j)| j)
        })
        .collect();

    Ok(NeighborTable {
        k,
        n_samples: n,
        distance,
        indices,
    })
}

/// All pairwise distances. The diagonal is zero and the result is exactly symmetric.
pub fn pairwise_distance_matrix<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    distance: DistanceKind,
) -> Result<DistanceMatrix> {
    distance.check(matrix)?;
    let n = matrix.n_samples();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = matrix.row(i);
            (i + 1..n)
                .map(|j| distance_value(distance, a, matrix.row(j)))
                .collect()
        })
        .collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (offset, &value) in row.iter().enumerate() {
            let j = i + 1 + offset;
            data[i * n + j] = value;
            data[j * n + i] = value;
        }
    }
    Ok(DistanceMatrix { n, data })
}
