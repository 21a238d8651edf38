//! Alignment measures between two representations of the same stimuli.
//!
//! # Cycle orientation
//!
//! `cycle_knn(source, target)` is the score written `cycle-kNN(source -> target)`.
//! For each sample `i` the first hop takes the k nearest neighbors of `i` in the
//! **target** space; the cycle succeeds if `i` is among the k nearest neighbors,
//! in the **source** space, of any of those intermediate points. The directional
//! gap `cycle_knn(a, b) - cycle_knn(b, a)` is positive when `b`'s neighborhoods
//! are the more reliable reference frame for returning to the query.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurestore::FeatureMatrix;
use crate::geometry::{knn_table, squared_euclidean, DistanceKind, NeighborTable};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    CycleKnn,
    MutualKnn,
    Cka,
    Density,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::CycleKnn => "cycle_knn",
            MetricKind::MutualKnn => "mutual_knn",
            MetricKind::Cka => "cka",
            MetricKind::Density => "density",
        }
    }

    pub fn uses_k(self) -> bool {
        matches!(self, MetricKind::CycleKnn | MetricKind::MutualKnn)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle_knn" => Ok(MetricKind::CycleKnn),
            "mutual_knn" => Ok(MetricKind::MutualKnn),
            "cka" => Ok(MetricKind::Cka),
            "density" => Ok(MetricKind::Density),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

/// A single metric evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: MetricKind,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

/// Cycle-kNN in both directions between two spaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalScore {
    /// `cycle_knn(a -> b)`.
    pub forward: f64,
    /// `cycle_knn(b -> a)`.
    pub backward: f64,
    /// `forward - backward`.
    pub gap: f64,
    pub k: usize,
}

impl DirectionalScore {
    pub fn new(forward: f64, backward: f64, k: usize) -> Self {
        Self {
            forward,
            backward,
            gap: forward - backward,
            k,
        }
    }

    /// The same pair scored with the roles swapped.
    pub fn reversed(&self) -> Self {
        Self::new(self.backward, self.forward, self.k)
    }
}

fn check_pair<A: Scalar, B: Scalar>(a: &FeatureMatrix<A>, b: &FeatureMatrix<B>) -> Result<usize> {
    if a.n_samples() != b.n_samples() {
        return Err(Error::SampleCountMismatch {
            left: a.n_samples(),
            right: b.n_samples(),
        });
    }
    Ok(a.n_samples())
}

fn check_tables(a: &NeighborTable, b: &NeighborTable) -> Result<()> {
    if a.n_samples() != b.n_samples() {
        return Err(Error::SampleCountMismatch {
            left: a.n_samples(),
            right: b.n_samples(),
        });
    }
    if a.k() != b.k() {
        return Err(Error::InvalidArgument(format!(
            "neighbor tables disagree on k: {} vs {}",
            a.k(),
            b.k()
        )));
    }
    Ok(())
}

/// Number of samples whose two-hop cycle (target, then source) returns home.
pub fn cycle_count(source: &NeighborTable, target: &NeighborTable) -> Result<usize> {
    check_tables(source, target)?;
    let count = (0..source.n_samples())
        .filter(|&i| {
            target
                .neighbors(i)
                .iter()
                .any(|&j| source.neighbors(j).contains(&i))
        })
        .count();
    Ok(count)
}

/// Cycle-kNN score from precomputed neighbor tables.
pub fn cycle_knn_from_tables(source: &NeighborTable, target: &NeighborTable) -> Result<f64> {
    Ok(cycle_count(source, target)? as f64 / source.n_samples() as f64)
}

/// `cycle-kNN(source -> target; k)`: first hop in `target`, return hop in `source`.
pub fn cycle_knn<A: Scalar, B: Scalar>(
    source: &FeatureMatrix<A>,
    target: &FeatureMatrix<B>,
    k: usize,
    distance: DistanceKind,
) -> Result<f64> {
    check_pair(source, target)?;
    let (s, t) = rayon::join(
        || knn_table(source, k, distance),
        || knn_table(target, k, distance),
    );
    cycle_knn_from_tables(&s?, &t?)
}

/// Both cycle directions and their gap.
pub fn directional_score<A: Scalar, B: Scalar>(
    a: &FeatureMatrix<A>,
    b: &FeatureMatrix<B>,
    k: usize,
    distance: DistanceKind,
) -> Result<DirectionalScore> {
    check_pair(a, b)?;
    let (ta, tb) = rayon::join(|| knn_table(a, k, distance), || knn_table(b, k, distance));
    directional_score_from_tables(&ta?, &tb?)
}

pub fn directional_score_from_tables(
    a: &NeighborTable,
    b: &NeighborTable,
) -> Result<DirectionalScore> {
    let forward = cycle_knn_from_tables(a, b)?;
    let backward = cycle_knn_from_tables(b, a)?;
    Ok(DirectionalScore::new(forward, backward, a.k()))
}

/// Mean per-sample overlap `|kNN_a(i) ∩ kNN_b(i)| / k`, from precomputed tables.
pub fn mutual_knn_from_tables(a: &NeighborTable, b: &NeighborTable) -> Result<f64> {
    check_tables(a, b)?;
    let shared: usize = a
        .rows()
        .zip(b.rows())
        .map(|(ra, rb)| ra.iter().filter(|j| rb.contains(j)).count())
        .sum();
    Ok(shared as f64 / (a.n_samples() * a.k()) as f64)
}

pub fn mutual_knn<A: Scalar, B: Scalar>(
    a: &FeatureMatrix<A>,
    b: &FeatureMatrix<B>,
    k: usize,
    distance: DistanceKind,
) -> Result<f64> {
    check_pair(a, b)?;
    let (ta, tb) = rayon::join(|| knn_table(a, k, distance), || knn_table(b, k, distance));
    mutual_knn_from_tables(&ta?, &tb?)
}

/// Column-centered copy of a matrix, prepared for repeated CKA evaluation.
#[derive(Debug)]
pub struct CkaOperand {
    n: usize,
    d: usize,
    centered: Vec<f64>,
    /// `||A^T A||_F`, equal to `||A A^T||_F`.
    self_norm: f64,
    gram: OnceLock<Vec<f64>>,
}

impl CkaOperand {
    pub fn new<T: Scalar>(matrix: &FeatureMatrix<T>) -> Result<Self> {
        let (n, d) = matrix.shape();
        if n < 3 {
            return Err(Error::DegenerateInput(format!(
                "CKA needs at least 3 samples, got {n}"
            )));
        }
        let mut centered: Vec<f64> = matrix.as_slice().iter().map(|v| v.widen()).collect();
        for col in 0..d {
            let mean = (0..n).map(|i| centered[i * d + col]).sum::<f64>() / n as f64;
            for i in 0..n {
                centered[i * d + col] -= mean;
            }
        }
        if centered.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateInput(
                "centered matrix is identically zero".into(),
            ));
        }
        let mut op = Self {
            n,
            d,
            centered,
            self_norm: 0.0,
            gram: OnceLock::new(),
        };
        op.self_norm = if d <= n {
            frobenius_squared_cross(&op, &op).sqrt()
        } else {
            let g = op.gram();
            g.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        if op.self_norm == 0.0 {
            return Err(Error::DegenerateInput(
                "centered matrix has zero covariance".into(),
            ));
        }
        Ok(op)
    }

    fn col(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.centered.iter().skip(c).step_by(self.d).copied()
    }

    /// Centered Gram matrix `A A^T`, computed on first use.
    fn gram(&self) -> &[f64] {
        self.gram.get_or_init(|| {
            let (n, d) = (self.n, self.d);
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let ri = &self.centered[i * d..(i + 1) * d];
                    (0..n)
                        .map(|j| {
                            let rj = &self.centered[j * d..(j + 1) * d];
                            ri.iter().zip(rj).map(|(x, y)| x * y).sum()
                        })
                        .collect()
                })
                .collect();
            rows.concat()
        })
    }
}

/// `||B^T A||_F^2` in feature space.
fn frobenius_squared_cross(a: &CkaOperand, b: &CkaOperand) -> f64 {
    let cols_a: Vec<Vec<f64>> = (0..a.d).map(|c| a.col(c).collect()).collect();
    let cols_b: Vec<Vec<f64>> = if std::ptr::eq(a, b) {
        cols_a.clone()
    } else {
        (0..b.d).map(|c| b.col(c).collect()).collect()
    };
    let per_col: Vec<f64> = cols_b
        .par_iter()
        .map(|cb| {
            cols_a
                .iter()
                .map(|ca| {
                    let s: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
                    s * s
                })
                .sum()
        })
        .collect();
    per_col.iter().sum()
}

/// Linear CKA between two prepared operands.
pub fn linear_cka_operands(a: &CkaOperand, b: &CkaOperand) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::SampleCountMismatch {
            left: a.n,
            right: b.n,
        });
    }
    // Cross term via whichever of the two equal forms is cheaper:
    // ||B^T A||_F^2 costs n*da*db, <AA^T, BB^T>_F costs n^2*(da+db) the first time.
    let cross = if a.n * a.n * (a.d + b.d) < a.n * a.d * b.d {
        a.gram().iter().zip(b.gram()).map(|(x, y)| x * y).sum()
    } else {
        frobenius_squared_cross(a, b)
    };
    Ok(cross / (a.self_norm * b.self_norm))
}

/// Linear-kernel CKA with column centering.
pub fn linear_cka<A: Scalar, B: Scalar>(a: &FeatureMatrix<A>, b: &FeatureMatrix<B>) -> Result<f64> {
    check_pair(a, b)?;
    linear_cka_operands(&CkaOperand::new(a)?, &CkaOperand::new(b)?)
}

/// Mean Euclidean distance over all unordered pairs of rows.
pub fn pairwise_mean_distance<T: Scalar>(matrix: &FeatureMatrix<T>) -> Result<f64> {
    let n = matrix.n_samples();
    if n < 2 {
        return Err(Error::InvalidShape(format!(
            "pairwise mean distance needs at least 2 rows, got {n}"
        )));
    }
    let row_sums: Vec<f64> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let a = matrix.row(i);
            (i + 1..n)
                .map(|j| squared_euclidean(a, matrix.row(j)).sqrt())
                .sum()
        })
        .collect();
    let total: f64 = row_sums.iter().sum();
    Ok(total * 2.0 / (n as f64 * (n - 1) as f64))
}
