use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::featurestore::{FeatureMatrix, Modality, ModelManifest, StimulusSet};
use crate::geometry::{knn_table, l2_normalize, DistanceKind, NeighborTable};
use crate::metrics::CkaOperand;
use crate::scalar::Scalar;

/// A model's layers, widened to f64 and normalized for the run's distance,
/// with neighbor tables and CKA operands cached on first use.
#[derive(Debug)]
pub struct PreparedModel {
    name: String,
    modality: Option<Modality>,
    param_count: Option<u64>,
    stimulus: Option<StimulusSet>,
    layer_indices: Vec<usize>,
    layers: Vec<FeatureMatrix<f64>>,
    distance: DistanceKind,
    tables: Mutex<BTreeMap<usize, Arc<Vec<NeighborTable>>>>,
    cka: OnceLock<Vec<CkaOperand>>,
}

impl PreparedModel {
    /// Layers are indexed `0..layers.len()`.
    pub fn from_layers<T: Scalar>(
        name: &str,
        layers: &[FeatureMatrix<T>],
        distance: DistanceKind,
    ) -> Result<Self> {
        let indices = (0..layers.len()).collect();
        Self::build(
            name.to_string(),
            indices,
            layers.iter().map(FeatureMatrix::to_f64).collect(),
            distance,
        )
    }

    pub fn from_manifest(manifest: &ModelManifest, distance: DistanceKind) -> Result<Self> {
        let layers = manifest.load_layers::<f64>()?;
        let indices = manifest.layers.iter().map(|l| l.index).collect();
        let mut model = Self::build(manifest.model_name.clone(), indices, layers, distance)?;
        model.modality = Some(manifest.modality);
        model.param_count = manifest.param_count;
        model.stimulus = Some(manifest.stimulus_set.clone());
        Ok(model)
    }

    fn build(
        name: String,
        layer_indices: Vec<usize>,
        layers: Vec<FeatureMatrix<f64>>,
        distance: DistanceKind,
    ) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::EmptyInput("model has no layers"));
        };
        let n = first.n_samples();
        if let Some(bad) = layers.iter().find(|l| l.n_samples() != n) {
            return Err(Error::SampleCountMismatch {
                left: n,
                right: bad.n_samples(),
            });
        }
        let layers = match distance {
            DistanceKind::CosineOnUnitSphere => layers
                .iter()
                .map(l2_normalize)
                .collect::<Result<Vec<_>>>()?,
            DistanceKind::Euclidean => layers,
        };
        Ok(Self {
            name,
            modality: None,
            param_count: None,
            stimulus: None,
            layer_indices,
            layers,
            distance,
            tables: Mutex::new(BTreeMap::new()),
            cka: OnceLock::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn modality(&self) -> Option<Modality> {
        self.modality
    }

    pub fn param_count(&self) -> Option<u64> {
        self.param_count
    }

    pub fn stimulus_set(&self) -> Option<&StimulusSet> {
        self.stimulus.as_ref()
    }

    pub fn layer_indices(&self) -> &[usize] {
        &self.layer_indices
    }

    pub fn layers(&self) -> &[FeatureMatrix<f64>] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_samples(&self) -> usize {
        self.layers[0].n_samples()
    }

    pub fn distance(&self) -> DistanceKind {
        self.distance
    }

    /// Neighbor tables of every layer at `k`. A table already built for a
    /// larger k is truncated instead of searching again.
    pub fn tables(&self, k: usize) -> Result<Arc<Vec<NeighborTable>>> {
        let mut cache = self.tables.lock().expect("table cache poisoned");
        if let Some(t) = cache.get(&k) {
            return Ok(Arc::clone(t));
        }
        let built = match cache.range(k..).next() {
            Some((_, larger)) => larger
                .iter()
                .map(|t| t.truncate(k))
                .collect::<Result<Vec<_>>>()?,
            None => self
                .layers
                .par_iter()
                .map(|l| knn_table(l, k, self.distance))
                .collect::<Result<Vec<_>>>()?,
        };
        let built = Arc::new(built);
        cache.insert(k, Arc::clone(&built));
        Ok(built)
    }

    pub fn cka_operands(&self) -> Result<&[CkaOperand]> {
        if let Some(ops) = self.cka.get() {
            return Ok(ops);
        }
        let ops = self
            .layers
            .par_iter()
            .map(CkaOperand::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(self.cka.get_or_init(|| ops))
    }
}
