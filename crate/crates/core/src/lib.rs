//! Directional convergence analysis of neural feature spaces.
//!
//! The central score is cycle-kNN: for each stimulus, hop to its k nearest
//! neighbors in the target space, then ask whether any of those neighbors has
//! the stimulus among its own k nearest neighbors in the source space. The
//! difference between the two directions is the directional gap.
//!
//! ```
//! use dirconv::{cycle_knn, DistanceKind, FeatureMatrix};
//!
//! let x = FeatureMatrix::column(&[15.0, 26.0, 49.0, 60.0, 87.0, 90.0]).unwrap();
//! let y = FeatureMatrix::column(&[34.0, 56.0, 58.0, 57.0, 63.0, 37.0]).unwrap();
//! let forward = cycle_knn(&x, &y, 2, DistanceKind::Euclidean).unwrap();
//! let backward = cycle_knn(&y, &x, 2, DistanceKind::Euclidean).unwrap();
//! assert_eq!((forward, backward), (5.0 / 6.0, 0.5));
//! ```

pub mod error;
pub mod featurestore;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use featurestore::{
    load_feature_matrix, load_manifest, write_feature_matrix, FeatureMatrix, Modality,
    ModelManifest,
};
pub use geometry::{
    knn_table, l2_normalize, pairwise_distance_matrix, DistanceKind, NeighborTable,
};
pub use metrics::{
    cycle_knn, directional_score, linear_cka, mutual_knn, pairwise_mean_distance, DirectionalScore,
    MetricKind,
};
pub use scalar::Scalar;

pub type FeatureMatrixF32 = FeatureMatrix<f32>;
pub type FeatureMatrixF64 = FeatureMatrix<f64>;
pub type PairedSampleF32 = synthetic::PairedSample<f32>;
pub type PairedSampleF64 = synthetic::PairedSample<f64>;
