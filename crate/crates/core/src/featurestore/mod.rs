//! Feature files and model manifests: the only entry point for real data.

mod manifest;
mod matrix;
pub mod npy;

use std::fs;
use std::path::Path;

pub use manifest::{
    load_manifest, write_manifest, LayerEntry, LayerRef, ManifestDoc, Modality, ModelManifest,
    StimulusSet,
};
pub use matrix::{FeatureMatrix, UNIT_NORM_TOLERANCE};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Loads a 2-D feature matrix from an array file.
pub fn load_feature_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<FeatureMatrix<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    npy::decode(&bytes, path)
}

/// Writes `matrix` as an array file readable by [`load_feature_matrix`].
pub fn write_feature_matrix<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, npy::encode(matrix)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
