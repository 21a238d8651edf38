//! Significance testing and summary statistics over directional gaps.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurestore::FeatureMatrix;
use crate::geometry::DistanceKind;
use crate::metrics::DirectionalScore;
use crate::pipeline::{best_layer_scores, LayerPair};
use crate::scalar::Scalar;

/// Smallest permutation count accepted by the sign-flip test.
pub const MIN_PERMUTATIONS: usize = 100;

/// Directional gap of one ordered model pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub source: String,
    pub target: String,
    pub gap: f64,
    pub k: usize,
}

impl GapSample {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        gap: f64,
        k: usize,
    ) -> Result<Self> {
        let (source, target) = (source.into(), target.into());
        if source == target {
            return Err(Error::InvalidArgument(format!(
                "gap sample pairs {source:?} with itself"
            )));
        }
        Ok(Self {
            source,
            target,
            gap,
            k,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub observed_mean_gap: f64,
    /// One-sided add-one estimate; never below `1 / (n_permutations + 1)`.
    pub p_value: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

/// One-sided sign-flip permutation test of `mean(gap) > 0`.
pub fn sign_flip_permutation_test(
    gaps: &[GapSample],
    n_permutations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    let values: Vec<f64> = gaps.iter().map(|g| g.gap).collect();
    sign_flip_test(&values, n_permutations, seed)
}

/// Sign-flip test on raw gap values.
///
/// Under the null every gap is equally likely to carry either sign. Each
/// permutation negates every value independently with probability 1/2; the
/// p-value is `(1 + #{null mean >= observed mean}) / (n_permutations + 1)`.
///
/// Values are sorted first so the result does not depend on input order, and
/// permutation `p` draws its signs from ChaCha8 stream `p` of `seed`, which
/// makes the outcome independent of how permutations are scheduled.
pub fn sign_flip_test(
    values: &[f64],
    n_permutations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sign-flip test needs at least one gap"));
    }
    if n_permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {n_permutations}"
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite gap {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let observed: f64 = sorted.iter().sum();
    // Sums of identical magnitudes in different sign patterns can differ by
    // rounding; treat anything within this band as a tie.
    let slack = 1e-12 * sorted.iter().map(|v| v.abs()).sum::<f64>();

    let exceed = (0..n_permutations)
        .into_par_iter()
        .filter(|&p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut word = 0u64;
            let null: f64 = sorted
                .iter()
                .enumerate()
                .map(|(m, &v)| {
                    if m % 64 == 0 {
                        word = rng.next_u64();
                    }
                    if (word >> (m % 64)) & 1 == 1 {
                        -v
                    } else {
                        v
                    }
                })
                .sum();
            null >= observed - slack
        })
        .count();

    Ok(SignificanceResult {
        observed_mean_gap: observed / sorted.len() as f64,
        p_value: (1 + exceed) as f64 / (n_permutations + 1) as f64,
        n_permutations,
        seed,
    })
}

/// Mean, sample standard deviation (divisor `n - 1`) and count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::EmptyInput("aggregate of an empty list"));
    }
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let std = if count > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Aggregate { mean, std, count })
}

/// Best-layer directional score at one `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweepPoint {
    pub k: usize,
    pub score: DirectionalScore,
    pub forward_argmax: LayerPair,
    pub backward_argmax: LayerPair,
}

/// Best-layer directional scores for each `k` in `ks`.
///
/// Both models are given as per-layer matrices. Forward and backward maxima are
/// taken independently over all layer pairs, as in the pipeline's pair summary.
pub fn k_sensitivity_sweep<T: Scalar>(
    a_layers: &[FeatureMatrix<T>],
    b_layers: &[FeatureMatrix<T>],
    ks: &[usize],
    distance: DistanceKind,
) -> Result<Vec<KSweepPoint>> {
    if ks.is_empty() {
        return Err(Error::EmptyInput("k sweep needs at least one k"));
    }
    best_layer_scores(a_layers, b_layers, ks, distance)
}
