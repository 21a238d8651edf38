//! Experiment orchestration over model manifests.
//!
//! Every layer is L2-normalized before scoring when the run uses
//! [`DistanceKind::CosineOnUnitSphere`]; Euclidean runs score raw features.
//! Grid cells are evaluated in parallel and collected in a fixed order, so
//! results do not depend on the number of worker threads.

mod csv;
mod prepared;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use csv::to_csv;
pub use prepared::PreparedModel;
pub use report::{
    load_results, persist_results, InputRef, KSweepReport, Report, ResultsFile, RunSettings,
    SignificanceReport, BEST_LAYER_CONVENTION, CYCLE_ORIENTATION, SCHEMA_VERSION,
};

use crate::error::{Error, Result};
use crate::featurestore::{FeatureMatrix, Modality, ModelManifest};
use crate::geometry::DistanceKind;
use crate::metrics::{
    cycle_knn_from_tables, linear_cka_operands, mutual_knn_from_tables, pairwise_mean_distance,
    DirectionalScore, MetricKind,
};
use crate::scalar::Scalar;
use crate::stats::{
    aggregate, sign_flip_permutation_test, Aggregate, GapSample, KSweepPoint, SignificanceResult,
};

/// `(layer_a, layer_b)` indices of a grid cell.
pub type LayerPair = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridDirection {
    /// Cell holds `metric(a -> b)`.
    AToB,
    /// Cell holds `metric(b -> a)`; still indexed `(layer_a, layer_b)`.
    BToA,
    Symmetric,
}

impl GridDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            GridDirection::AToB => "a_to_b",
            GridDirection::BToA => "b_to_a",
            GridDirection::Symmetric => "symmetric",
        }
    }
}

impl std::str::FromStr for GridDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a_to_b" => Ok(GridDirection::AToB),
            "b_to_a" => Ok(GridDirection::BToA),
            "symmetric" => Ok(GridDirection::Symmetric),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction {other:?}"
            ))),
        }
    }
}

/// Scores for every layer pair of two models under one metric and direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerGrid {
    pub source_model: String,
    pub target_model: String,
    pub metric: MetricKind,
    pub direction: GridDirection,
    pub k: Option<usize>,
    pub layers_a: Vec<usize>,
    pub layers_b: Vec<usize>,
    /// Row `i` corresponds to `layers_a[i]`, column `j` to `layers_b[j]`.
    pub scores: Vec<Vec<f64>>,
}

impl LayerGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.layers_a.len(), self.layers_b.len())
    }

    /// Maximum cell and its layer pair; ties go to the lexicographically
    /// smallest `(layer_a, layer_b)`.
    pub fn best(&self) -> (f64, LayerPair) {
        let mut best = (f64::NEG_INFINITY, (0, 0));
        for (i, row) in self.scores.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.0 {
                    best = (v, (self.layers_a[i], self.layers_b[j]));
                }
            }
        }
        best
    }
}

/// Best-layer summary of one model pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub forward_best: f64,
    pub backward_best: f64,
    pub forward_argmax: LayerPair,
    pub backward_argmax: LayerPair,
    pub gap: f64,
}

/// Independent maxima of the two direction grids of one pair.
pub fn pair_summary(forward: &LayerGrid, backward: &LayerGrid) -> Result<PairSummary> {
    if forward.shape() != backward.shape() {
        return Err(Error::GridShapeMismatch {
            left: forward.shape(),
            right: backward.shape(),
        });
    }
    let (forward_best, forward_argmax) = forward.best();
    let (backward_best, backward_argmax) = backward.best();
    Ok(PairSummary {
        forward_best,
        backward_best,
        forward_argmax,
        backward_argmax,
        gap: forward_best - backward_best,
    })
}

fn check_stimuli(a: &PreparedModel, b: &PreparedModel) -> Result<()> {
    if let (Some(sa), Some(sb)) = (a.stimulus_set(), b.stimulus_set()) {
        if !sa.compatible_with(sb) {
            return Err(Error::StimulusSetMismatch {
                left: format!("{} ({})", sa.name, sa.n_stimuli),
                right: format!("{} ({})", sb.name, sb.n_stimuli),
            });
        }
    }
    if a.n_samples() != b.n_samples() {
        return Err(Error::SampleCountMismatch {
            left: a.n_samples(),
            right: b.n_samples(),
        });
    }
    Ok(())
}

/// Grid over prepared models.
pub fn layer_grid_prepared(
    a: &PreparedModel,
    b: &PreparedModel,
    metric: MetricKind,
    direction: GridDirection,
    k: Option<usize>,
) -> Result<LayerGrid> {
    check_stimuli(a, b)?;
    let direction = match (metric, direction) {
        (MetricKind::CycleKnn, GridDirection::Symmetric) => {
            return Err(Error::InvalidArgument(
                "cycle_knn grids need a_to_b or b_to_a".into(),
            ))
        }
        (MetricKind::CycleKnn, d) => d,
        (MetricKind::Density, _) => {
            return Err(Error::InvalidArgument(
                "density is a per-model profile, not a pair grid".into(),
            ))
        }
        _ => GridDirection::Symmetric,
    };
    let need_k = || k.ok_or_else(|| Error::InvalidArgument(format!("{metric} needs k")));

    let (la, lb) = (a.n_layers(), b.n_layers());
    let cells: Vec<(usize, usize)> = (0..la).flat_map(|i| (0..lb).map(move |j| (i, j))).collect();
    let values: Vec<f64> = match metric {
        MetricKind::CycleKnn => {
            let k = need_k()?;
            let (ta, tb) = (a.tables(k)?, b.tables(k)?);
            cells
                .par_iter()
                .map(|&(i, j)| match direction {
                    GridDirection::AToB => cycle_knn_from_tables(&ta[i], &tb[j]),
                    _ => cycle_knn_from_tables(&tb[j], &ta[i]),
                })
                .collect::<Result<_>>()?
        }
        MetricKind::MutualKnn => {
            let k = need_k()?;
            let (ta, tb) = (a.tables(k)?, b.tables(k)?);
            cells
                .par_iter()
                .map(|&(i, j)| mutual_knn_from_tables(&ta[i], &tb[j]))
                .collect::<Result<_>>()?
        }
        MetricKind::Cka => {
            let (oa, ob) = (a.cka_operands()?, b.cka_operands()?);
            cells
                .par_iter()
                .map(|&(i, j)| linear_cka_operands(&oa[i], &ob[j]))
                .collect::<Result<_>>()?
        }
        MetricKind::Density => unreachable!("rejected above"),
    };
    let scores = values.chunks(lb).map(<[f64]>::to_vec).collect();
    Ok(LayerGrid {
        source_model: a.name().to_string(),
        target_model: b.name().to_string(),
        metric,
        direction,
        k: if metric.uses_k() { k } else { None },
        layers_a: a.layer_indices().to_vec(),
        layers_b: b.layer_indices().to_vec(),
        scores,
    })
}

/// Loads both manifests and computes one grid.
pub fn layer_grid(
    a: &ModelManifest,
    b: &ModelManifest,
    metric: MetricKind,
    direction: GridDirection,
    k: Option<usize>,
    distance: DistanceKind,
) -> Result<LayerGrid> {
    check_manifest_pair(a, b)?;
    let pa = PreparedModel::from_manifest(a, distance)?;
    let pb = PreparedModel::from_manifest(b, distance)?;
    layer_grid_prepared(&pa, &pb, metric, direction, k)
}

fn check_manifest_pair(a: &ModelManifest, b: &ModelManifest) -> Result<()> {
    if !a.stimulus_set.compatible_with(&b.stimulus_set) {
        return Err(Error::StimulusSetMismatch {
            left: format!("{} ({})", a.stimulus_set.name, a.stimulus_set.n_stimuli),
            right: format!("{} ({})", b.stimulus_set.name, b.stimulus_set.n_stimuli),
        });
    }
    Ok(())
}

/// Forward and backward cycle grids of one pair, summarized.
pub fn summarize_pair(a: &PreparedModel, b: &PreparedModel, k: usize) -> Result<PairSummary> {
    let forward = layer_grid_prepared(a, b, MetricKind::CycleKnn, GridDirection::AToB, Some(k))?;
    let backward = layer_grid_prepared(a, b, MetricKind::CycleKnn, GridDirection::BToA, Some(k))?;
    pair_summary(&forward, &backward)
}

/// Best-layer directional scores of two in-memory models for several `k`.
pub fn best_layer_scores<T: Scalar>(
    a_layers: &[FeatureMatrix<T>],
    b_layers: &[FeatureMatrix<T>],
    ks: &[usize],
    distance: DistanceKind,
) -> Result<Vec<KSweepPoint>> {
    let a = PreparedModel::from_layers("a", a_layers, distance)?;
    let b = PreparedModel::from_layers("b", b_layers, distance)?;
    // One search per layer at the largest k; smaller k are prefixes.
    if let Some(&k_max) = ks.iter().max() {
        a.tables(k_max)?;
        b.tables(k_max)?;
    }
    ks.iter()
        .map(|&k| {
            let s = summarize_pair(&a, &b, k)?;
            Ok(KSweepPoint {
                k,
                score: DirectionalScore::new(s.forward_best, s.backward_best, k),
                forward_argmax: s.forward_argmax,
                backward_argmax: s.backward_argmax,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub source: String,
    pub target: String,
    pub summary: PairSummary,
}

/// Cross-group direction analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionTable {
    pub k: usize,
    pub pairs: Vec<PairRecord>,
    pub gaps: Vec<GapSample>,
    pub forward: Aggregate,
    pub backward: Aggregate,
    pub gap: Aggregate,
    /// Fraction of pairs with a strictly positive gap.
    pub positive_fraction: f64,
    pub significance: SignificanceResult,
    /// Gap of each `group_a` model averaged over its `group_b` counterparts.
    pub per_model: Vec<ScalingPoint>,
}

/// Every cross pair `(a, b)` with `a` from `group_a` and `b` from `group_b`,
/// skipping pairs of a model with itself.
pub fn direction_table_prepared(
    group_a: &[PreparedModel],
    group_b: &[PreparedModel],
    k: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<DirectionTable> {
    let mut pairs = Vec::new();
    for a in group_a {
        for b in group_b {
            if a.name() == b.name() {
                continue;
            }
            pairs.push(PairRecord {
                source: a.name().to_string(),
                target: b.name().to_string(),
                summary: summarize_pair(a, b, k)?,
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no model pairs to compare"));
    }
    let gaps = pairs
        .iter()
        .map(|p| GapSample::new(&p.source, &p.target, p.summary.gap, k))
        .collect::<Result<Vec<_>>>()?;
    let column =
        |f: fn(&PairSummary) -> f64| -> Vec<f64> { pairs.iter().map(|p| f(&p.summary)).collect() };
    let forward = aggregate(&column(|s| s.forward_best))?;
    let backward = aggregate(&column(|s| s.backward_best))?;
    let gap_values = column(|s| s.gap);
    let gap = aggregate(&gap_values)?;
    let positive = gap_values.iter().filter(|&&g| g > 0.0).count();
    let significance = sign_flip_permutation_test(&gaps, n_permutations, seed)?;

    let per_model = group_a
        .iter()
        .filter_map(|a| {
            let records: Vec<&PairRecord> = pairs.iter().filter(|p| p.source == a.name()).collect();
            (!records.is_empty()).then(|| scaling_point(a, &records))
        })
        .collect();

    Ok(DirectionTable {
        k,
        positive_fraction: positive as f64 / pairs.len() as f64,
        pairs,
        gaps,
        forward,
        backward,
        gap,
        significance,
        per_model,
    })
}

pub fn direction_table(
    group_a: &[ModelManifest],
    group_b: &[ModelManifest],
    k: usize,
    distance: DistanceKind,
    n_permutations: usize,
    seed: u64,
) -> Result<DirectionTable> {
    for a in group_a {
        for b in group_b {
            check_manifest_pair(a, b)?;
        }
    }
    let pa = prepare_all(group_a, distance)?;
    let pb = prepare_all(group_b, distance)?;
    direction_table_prepared(&pa, &pb, k, n_permutations, seed)
}

fn prepare_all(group: &[ModelManifest], distance: DistanceKind) -> Result<Vec<PreparedModel>> {
    group
        .iter()
        .map(|m| PreparedModel::from_manifest(m, distance))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusPair {
    pub a: String,
    pub b: String,
    pub cka_best: f64,
    pub mknn_best: f64,
}

/// Intra-group agreement under the two symmetric measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReport {
    pub modality: Option<Modality>,
    pub k: usize,
    pub n_models: usize,
    pub n_pairs: usize,
    pub cka_mean: f64,
    pub cka_std: f64,
    pub mknn_mean: f64,
    pub mknn_std: f64,
    pub pairs: Vec<ConsensusPair>,
}

pub fn consensus_prepared(group: &[PreparedModel], k: usize) -> Result<ConsensusReport> {
    if group.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "consensus needs at least 2 models, got {}",
            group.len()
        )));
    }
    let modality = group[0].modality();
    if group.iter().any(|m| m.modality() != modality) {
        return Err(Error::InvalidArgument(
            "consensus group mixes modalities".into(),
        ));
    }
    let mut pairs = Vec::new();
    for (i, a) in group.iter().enumerate() {
        for b in &group[i + 1..] {
            let cka = layer_grid_prepared(a, b, MetricKind::Cka, GridDirection::Symmetric, None)?;
            let mknn = layer_grid_prepared(
                a,
                b,
                MetricKind::MutualKnn,
                GridDirection::Symmetric,
                Some(k),
            )?;
            pairs.push(ConsensusPair {
                a: a.name().to_string(),
                b: b.name().to_string(),
                cka_best: cka.best().0,
                mknn_best: mknn.best().0,
            });
        }
    }
    let cka = aggregate(&pairs.iter().map(|p| p.cka_best).collect::<Vec<_>>())?;
    let mknn = aggregate(&pairs.iter().map(|p| p.mknn_best).collect::<Vec<_>>())?;
    Ok(ConsensusReport {
        modality,
        k,
        n_models: group.len(),
        n_pairs: pairs.len(),
        cka_mean: cka.mean,
        cka_std: cka.std,
        mknn_mean: mknn.mean,
        mknn_std: mknn.std,
        pairs,
    })
}

pub fn consensus(
    group: &[ModelManifest],
    k: usize,
    distance: DistanceKind,
) -> Result<ConsensusReport> {
    for (i, a) in group.iter().enumerate() {
        for b in &group[i + 1..] {
            check_manifest_pair(a, b)?;
        }
    }
    consensus_prepared(&prepare_all(group, distance)?, k)
}

/// Per-model directional gap averaged over a counterpart group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub model: String,
    pub param_count: Option<u64>,
    pub forward_mean: f64,
    pub backward_mean: f64,
    /// `forward_mean - backward_mean`.
    pub delta_m: f64,
    pub n_counterparts: usize,
}

fn scaling_point(model: &PreparedModel, records: &[&PairRecord]) -> ScalingPoint {
    let n = records.len() as f64;
    let forward_mean = records.iter().map(|r| r.summary.forward_best).sum::<f64>() / n;
    let backward_mean = records.iter().map(|r| r.summary.backward_best).sum::<f64>() / n;
    ScalingPoint {
        model: model.name().to_string(),
        param_count: model.param_count(),
        forward_mean,
        backward_mean,
        delta_m: forward_mean - backward_mean,
        n_counterparts: records.len(),
    }
}

pub fn per_model_gap_prepared(
    model: &PreparedModel,
    counterparts: &[PreparedModel],
    k: usize,
) -> Result<ScalingPoint> {
    let records = counterparts
        .iter()
        .filter(|c| c.name() != model.name())
        .map(|c| {
            Ok(PairRecord {
                source: model.name().to_string(),
                target: c.name().to_string(),
                summary: summarize_pair(model, c, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if records.is_empty() {
        return Err(Error::EmptyInput(
            "per-model gap needs at least one counterpart",
        ));
    }
    Ok(scaling_point(model, &records.iter().collect::<Vec<_>>()))
}

pub fn per_model_gap(
    model: &ModelManifest,
    counterparts: &[ModelManifest],
    k: usize,
    distance: DistanceKind,
) -> Result<ScalingPoint> {
    for c in counterparts {
        check_manifest_pair(model, c)?;
    }
    per_model_gap_prepared(
        &PreparedModel::from_manifest(model, distance)?,
        &prepare_all(counterparts, distance)?,
        k,
    )
}

/// Layer-wise pairwise mean distance of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub model: String,
    pub modality: Option<Modality>,
    /// `(layer_index, D)` in layer order.
    pub points: Vec<(usize, f64)>,
}

/// Pairwise mean distance of each layer after L2 normalization.
pub fn density_profile_layers<T: Scalar>(
    name: &str,
    layer_indices: &[usize],
    layers: &[FeatureMatrix<T>],
) -> Result<DensityProfile> {
    if layer_indices.len() != layers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} layer indices for {} layers",
            layer_indices.len(),
            layers.len()
        )));
    }
    let points = layer_indices
        .iter()
        .zip(layers)
        .map(|(&index, layer)| {
            let unit = crate::geometry::l2_normalize(layer)?;
            Ok((index, pairwise_mean_distance(&unit)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityProfile {
        model: name.to_string(),
        modality: None,
        points,
    })
}

pub fn density_profile(model: &ModelManifest) -> Result<DensityProfile> {
    let layers = model.load_layers::<f64>()?;
    let indices: Vec<usize> = model.layers.iter().map(|l| l.index).collect();
    let mut profile = density_profile_layers(&model.model_name, &indices, &layers)?;
    profile.modality = Some(model.modality);
    Ok(profile)
}
