use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConsensusReport, DensityProfile, DirectionTable, LayerGrid, PairSummary};
use crate::error::{Error, Result};
use crate::featurestore::ModelManifest;
use crate::geometry::DistanceKind;
use crate::stats::{KSweepPoint, SignificanceResult};
use crate::synthetic::RhoSweepTable;

pub const SCHEMA_VERSION: u32 = 1;

/// How best-layer scores are combined; written into every results file.
pub const BEST_LAYER_CONVENTION: &str = "independent_maxima";

/// Orientation of `cycle_knn(a -> b)`; written into every results file.
pub const CYCLE_ORIENTATION: &str =
    "a_to_b: first hop = k nearest neighbors of i in b, return hop = k nearest neighbors in a";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub k: usize,
    pub distance: DistanceKind,
    pub seed: u64,
    pub best_layer_convention: String,
    pub cycle_orientation: String,
}

impl RunSettings {
    pub fn new(k: usize, distance: DistanceKind, seed: u64) -> Self {
        Self {
            k,
            distance,
            seed,
            best_layer_convention: BEST_LAYER_CONVENTION.to_string(),
            cycle_orientation: CYCLE_ORIENTATION.to_string(),
        }
    }
}

/// A manifest the results were computed from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub model_name: String,
    pub path: String,
    /// Hex SHA-256 of the manifest bytes.
    pub digest: String,
}

impl From<&ModelManifest> for InputRef {
    fn from(m: &ModelManifest) -> Self {
        Self {
            model_name: m.model_name.clone(),
            path: m.source.display().to_string(),
            digest: m.digest.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweepReport {
    pub source_model: String,
    pub target_model: String,
    pub points: Vec<KSweepPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub gaps: Vec<f64>,
    pub result: SignificanceResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum Report {
    PairSummary(PairSummary),
    LayerGrid(LayerGrid),
    DirectionTable(DirectionTable),
    Consensus(ConsensusReport),
    Density(Vec<DensityProfile>),
    KSweep(KSweepReport),
    RhoSweep(Vec<RhoSweepTable>),
    Significance(SignificanceReport),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: RunSettings,
    pub inputs: Vec<InputRef>,
    pub results: Report,
}

impl ResultsFile {
    pub fn new(config: RunSettings, inputs: Vec<InputRef>, results: Report) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs,
            results,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::SchemaMismatch(format!("not a results document: {e}")))?;
        match value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
        {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(Error::SchemaMismatch(format!(
                    "schema version {v}, this build reads {SCHEMA_VERSION}"
                )))
            }
            None => return Err(Error::SchemaMismatch("missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| Error::SchemaMismatch(e.to_string()))
    }
}

pub fn persist_results(results: &ResultsFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, results.to_json()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_results(path: impl AsRef<Path>) -> Result<ResultsFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ResultsFile::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultsFile {
        ResultsFile::new(
            RunSettings::new(2, DistanceKind::Euclidean, 0),
            vec![],
            Report::PairSummary(PairSummary {
                forward_best: 5.0 / 6.0,
                backward_best: 0.5,
                forward_argmax: (0, 0),
                backward_argmax: (0, 0),
                gap: 5.0 / 6.0 - 0.5,
            }),
        )
    }

    #[test]
    fn round_trips_exactly() {
        let r = sample();
        assert_eq!(ResultsFile::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn future_schema_is_rejected() {
        let text = sample()
            .to_json()
            .replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(
            ResultsFile::from_json(&text),
            Err(Error::SchemaMismatch(_))
        ));
    }
}
