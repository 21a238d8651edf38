use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{load_feature_matrix, npy, FeatureMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    PointCloud,
    Vision,
    Language,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::PointCloud => "point_cloud",
            Modality::Vision => "vision",
            Modality::Language => "language",
        })
    }
}

/// The ordered stimuli whose row index links matrices across models.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusSet {
    pub name: String,
    pub n_stimuli: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checksum: Option<String>,
}

impl StimulusSet {
    /// Two sets are comparable when their names and sizes agree.
    pub fn compatible_with(&self, other: &StimulusSet) -> bool {
        self.name == other.name && self.n_stimuli == other.n_stimuli
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub index: usize,
    pub path: String,
}

/// On-disk manifest document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDoc {
    pub model_name: String,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_count: Option<u64>,
    pub stimulus_set: StimulusSet,
    pub layers: Vec<LayerEntry>,
}

/// A validated layer reference with its file resolved and its width known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerRef {
    pub index: usize,
    pub path: PathBuf,
    pub n_dims: usize,
}

/// A model's per-layer feature files, validated for existence and a common N.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelManifest {
    pub model_name: String,
    pub modality: Modality,
    pub param_count: Option<u64>,
    pub stimulus_set: StimulusSet,
    pub layers: Vec<LayerRef>,
    /// Hex SHA-256 of the manifest file bytes.
    pub digest: String,
    pub source: PathBuf,
}

impl ModelManifest {
    pub fn n_samples(&self) -> usize {
        self.stimulus_set.n_stimuli
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Loads every layer in manifest order.
    pub fn load_layers<T: Scalar>(&self) -> Result<Vec<FeatureMatrix<T>>> {
        self.layers
            .iter()
            .map(|layer| load_feature_matrix(&layer.path))
            .collect()
    }
}

/// Reads and validates a manifest. Layer paths are resolved relative to the
/// manifest's directory; only file headers are read.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<ModelManifest> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |reason: String| Error::MalformedManifest {
        path: path.to_path_buf(),
        reason,
    };
    let doc: ManifestDoc = serde_json::from_slice(&bytes).map_err(|e| malformed(e.to_string()))?;

    if doc.model_name.is_empty() {
        return Err(malformed("model_name is empty".into()));
    }
    if doc.param_count == Some(0) {
        return Err(malformed("param_count must be positive".into()));
    }
    if doc.stimulus_set.n_stimuli == 0 {
        return Err(malformed("stimulus_set.n_stimuli must be positive".into()));
    }
    if doc.layers.is_empty() {
        return Err(malformed("no layers listed".into()));
    }
    if doc.layers[0].index != 0 {
        return Err(malformed(format!(
            "layer indices must start at 0, found {}",
            doc.layers[0].index
        )));
    }
    if let Some(w) = doc.layers.windows(2).find(|w| w[1].index <= w[0].index) {
        return Err(malformed(format!(
            "layer indices not strictly increasing: {} then {}",
            w[0].index, w[1].index
        )));
    }

    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let expected = doc.stimulus_set.n_stimuli;
    let mut layers = Vec::with_capacity(doc.layers.len());
    for entry in &doc.layers {
        let file = base.join(&entry.path);
        if !file.is_file() {
            return Err(Error::MissingLayerFile {
                manifest: path.to_path_buf(),
                layer: entry.index,
                file,
            });
        }
        let header = npy::read_header(&file)?;
        if header.n_rows != expected {
            return Err(Error::InconsistentSampleCount {
                manifest: path.to_path_buf(),
                layer: entry.index,
                expected,
                found: header.n_rows,
            });
        }
        layers.push(LayerRef {
            index: entry.index,
            path: file,
            n_dims: header.n_cols,
        });
    }

    Ok(ModelManifest {
        model_name: doc.model_name,
        modality: doc.modality,
        param_count: doc.param_count,
        stimulus_set: doc.stimulus_set,
        layers,
        digest: hex_digest(&bytes),
        source: path.to_path_buf(),
    })
}

/// Writes a manifest document as pretty-printed JSON.
pub fn write_manifest(doc: &ManifestDoc, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(doc).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
