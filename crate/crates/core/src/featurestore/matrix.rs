use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on row norms for a matrix to count as L2-normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// An `N x d` row-major matrix of features, one row per stimulus.
///
/// Every entry is finite. The `normalized` flag is derived from the data: it is
/// true exactly when every row norm lies within [`UNIT_NORM_TOLERANCE`] of 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T: Scalar> {
    data: Vec<T>,
    n_samples: usize,
    n_dims: usize,
    normalized: bool,
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Builds a matrix from row-major data.
    pub fn from_vec(n_samples: usize, n_dims: usize, data: Vec<T>) -> Result<Self> {
        if n_samples == 0 || n_dims == 0 {
            return Err(Error::InvalidShape(format!(
                "{n_samples}x{n_dims} matrix has no entries"
            )));
        }
        if data.len() != n_samples * n_dims {
            return Err(Error::InvalidShape(format!(
                "{} values do not fill a {n_samples}x{n_dims} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                path: None,
                row: pos / n_dims,
                col: pos % n_dims,
            });
        }
        let normalized = rows_are_unit(&data, n_dims);
        Ok(Self {
            data,
            n_samples,
            n_dims,
            normalized,
        })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n_dims = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_dims);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_dims {
                return Err(Error::InvalidShape(format!(
                    "row {i} has {} columns, expected {n_dims}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), n_dims, data)
    }

    /// A single-column matrix, one scalar per sample.
    pub fn column(values: &[T]) -> Result<Self> {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_samples, self.n_dims)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.n_dims)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.n_dims + col]
    }

    /// Lossless widening to `f64`.
    pub fn to_f64(&self) -> FeatureMatrix<f64> {
        FeatureMatrix {
            data: self.data.iter().map(|v| v.widen()).collect(),
            n_samples: self.n_samples,
            n_dims: self.n_dims,
            normalized: self.normalized,
        }
    }

    /// Applies `f` to every entry, re-validating the result.
    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Result<FeatureMatrix<U>> {
        FeatureMatrix::from_vec(
            self.n_samples,
            self.n_dims,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Returns a copy with rows reordered so that output row `i` is input row `order[i]`.
    pub fn select_rows(&self, order: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(order.len() * self.n_dims);
        for &i in order {
            if i >= self.n_samples {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.n_samples
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::from_vec(order.len(), self.n_dims, data)
    }
}

fn rows_are_unit<T: Scalar>(data: &[T], n_dims: usize) -> bool {
    data.chunks_exact(n_dims).all(|row| {
        let norm = row
            .iter()
            .map(|v| v.widen() * v.widen())
            .sum::<f64>()
            .sqrt();
        (norm - 1.0).abs() <= UNIT_NORM_TOLERANCE
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let err = FeatureMatrix::from_vec(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 1, col: 0, .. }));
        let err = FeatureMatrix::from_vec(1, 2, vec![f32::INFINITY, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 0, col: 0, .. }));
    }

    #[test]
    fn shape_must_match_data() {
        assert!(FeatureMatrix::<f64>::from_vec(2, 3, vec![0.0; 5]).is_err());
        assert!(FeatureMatrix::<f64>::from_vec(0, 3, vec![]).is_err());
        assert!(FeatureMatrix::from_rows(&[vec![1.0f64, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn normalized_flag_tracks_row_norms() {
        let unit = FeatureMatrix::from_rows(&[[0.6f64, 0.8], [1.0, 0.0]]).unwrap();
        assert!(unit.is_normalized());
        let raw = FeatureMatrix::from_rows(&[[3.0f64, 4.0], [1.0, 0.0]]).unwrap();
        assert!(!raw.is_normalized());
    }

    #[test]
    fn select_rows_permutes() {
        let m = FeatureMatrix::from_rows(&[[1.0f64], [2.0], [3.0]]).unwrap();
        let p = m.select_rows(&[2, 0, 1]).unwrap();
        assert_eq!(p.as_slice(), &[3.0, 1.0, 2.0]);
        assert!(m.select_rows(&[3]).is_err());
    }
}
