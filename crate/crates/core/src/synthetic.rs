//! Paired synthetic feature spaces with a controlled density ratio.
//!
//! Each generator draws one latent sample and produces two views of it: a
//! compact reference `x` and a dispersed `y` whose pairwise mean distance is
//! `rho` times that of `x`. Both views live on the unit sphere:
//!
//! ```text
//! x_i = normalize(c +        embed(latent_i) + sigma                  * e_i)
//! y_i = normalize(c + knob * embed(latent_i) + sigma * knob^gamma     * f_i)
//! ```
//!
//! `c` is a fixed unit offset orthogonal to the embedded structure, so the
//! structure occupies a small cap of the sphere and its extent survives
//! normalization. `embed` centers the latent, scales it to pairwise mean
//! distance `spread` and maps it through a seeded random orthonormal frame.
//! The family knobs (cluster spread, ring width, grid jitter, fold height,
//! latent dimension) shape the latent; the dispersal knob scales it. With
//! `gamma = noise_exponent > 0` the noise of `y` grows too, more slowly than
//! the structure, so `y` sharpens gradually across the ratio range rather
//! than all at once.
//!
//! The knob is calibrated per draw: a geometric grid of knob values is
//! measured, made monotone, and interpolated at `rho`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurestore::FeatureMatrix;
use crate::geometry::{knn_table, l2_normalize, DistanceKind};
use crate::metrics::{cycle_knn_from_tables, pairwise_mean_distance};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussianClusters,
    ConcentricRings,
    UniformGrid,
    UniformDisk,
    SwissRoll,
    SCurve,
    FoldedManifold,
    HighdimGaussian,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::GaussianClusters,
        Family::ConcentricRings,
        Family::UniformGrid,
        Family::UniformDisk,
        Family::SwissRoll,
        Family::SCurve,
        Family::FoldedManifold,
        Family::HighdimGaussian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::GaussianClusters => "gaussian_clusters",
            Family::ConcentricRings => "concentric_rings",
            Family::UniformGrid => "uniform_grid",
            Family::UniformDisk => "uniform_disk",
            Family::SwissRoll => "swiss_roll",
            Family::SCurve => "s_curve",
            Family::FoldedManifold => "folded_manifold",
            Family::HighdimGaussian => "highdim_gaussian",
        }
    }

    /// Dimension of the latent before embedding; `None` means it is set by
    /// [`FamilyParams::latent_dims`].
    pub fn intrinsic_dim(self) -> Option<usize> {
        match self {
            Family::ConcentricRings | Family::UniformGrid | Family::UniformDisk => Some(2),
            Family::GaussianClusters
            | Family::SwissRoll
            | Family::SCurve
            | Family::FoldedManifold => Some(3),
            Family::HighdimGaussian => None,
        }
    }

    fn stream(self) -> u64 {
        Family::ALL.iter().position(|&f| f == self).unwrap() as u64
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown generator family {s:?}")))
    }
}

/// Family-specific knobs. Unused fields are ignored by other families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub clusters: usize,
    /// Within-cluster std relative to the center spread.
    pub cluster_std: f64,
    pub rings: usize,
    pub ring_width: f64,
    pub grid_side: usize,
    /// Per-point jitter in grid units.
    pub grid_jitter: f64,
    /// Height of the fold relative to the sheet side.
    pub fold_amplitude: f64,
    /// Intrinsic dimension of the high-dimensional Gaussian.
    pub latent_dims: usize,
    /// Noise std per coordinate, as a fraction of `spread`.
    pub sigma_base: f64,
    /// Pairwise mean distance of the embedded compact structure.
    pub spread: f64,
    pub knob_max: f64,
    pub knob_points: usize,
    /// `y` noise grows as `knob^noise_exponent` alongside the structure.
    #[serde(default)]
    pub noise_exponent: f64,
}

impl FamilyParams {
    pub fn for_family(family: Family) -> Self {
        let base = FamilyParams {
            clusters: 10,
            cluster_std: 0.25,
            rings: 4,
            ring_width: 0.1,
            grid_side: 32,
            grid_jitter: 0.35,
            fold_amplitude: 0.125,
            latent_dims: 16,
            sigma_base: 0.1,
            spread: 0.02,
            knob_max: 2000.0,
            knob_points: 60,
            noise_exponent: 0.0,
        };
        match family {
            Family::ConcentricRings | Family::SwissRoll | Family::SCurve => FamilyParams {
                noise_exponent: 0.5,
                ..base
            },
            Family::HighdimGaussian => FamilyParams {
                latent_dims: 8,
                noise_exponent: 0.7,
                ..base
            },
            _ => base,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n_samples: usize,
    pub ambient_dim: usize,
    pub density_ratio: f64,
    pub seed: u64,
    pub params: FamilyParams,
}

impl GeneratorSpec {
    /// Spec with the family's default knobs.
    pub fn new(
        family: Family,
        n_samples: usize,
        ambient_dim: usize,
        density_ratio: f64,
        seed: u64,
    ) -> Self {
        Self {
            family,
            n_samples,
            ambient_dim,
            density_ratio,
            seed,
            params: FamilyParams::for_family(family),
        }
    }

    fn latent_dim(&self) -> usize {
        self.family
            .intrinsic_dim()
            .unwrap_or(self.params.latent_dims)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.density_ratio >= 1.0 && self.density_ratio.is_finite()) {
            return bad(format!(
                "density ratio must be >= 1, got {}",
                self.density_ratio
            ));
        }
        if self.n_samples < 4 {
            return bad(format!("need at least 4 samples, got {}", self.n_samples));
        }
        let m = self.latent_dim();
        if self.ambient_dim < m + 1 {
            return bad(format!(
                "{} needs ambient_dim >= {}, got {}",
                self.family,
                m + 1,
                self.ambient_dim
            ));
        }
        let p = &self.params;
        if p.clusters == 0
            || p.rings == 0
            || p.grid_side == 0
            || p.latent_dims == 0
            || p.knob_points < 2
        {
            return bad("cluster, ring, grid and knob counts must be positive".into());
        }
        if !(p.spread > 0.0 && p.sigma_base >= 0.0 && p.knob_max > 1.0) {
            return bad("spread must be positive, sigma_base non-negative, knob_max > 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample<T: Scalar> {
    /// Compact reference.
    pub x: FeatureMatrix<T>,
    /// Dispersed view of the same latent points.
    pub y: FeatureMatrix<T>,
    pub spec: GeneratorSpec,
    pub knob: f64,
    /// `D(y) / D(x)` of the returned matrices.
    pub measured_ratio: f64,
    /// Cluster or ring membership, for families that have one.
    pub labels: Option<Vec<usize>>,
}

/// One latent draw with its frame and noise, able to render `y` at any knob.
struct Draw {
    n: usize,
    d: usize,
    m: usize,
    latent: Vec<f64>,
    labels: Option<Vec<usize>>,
    /// `(d - 1) x m`, orthonormal columns; `None` when `m == d - 1`.
    frame: Option<Vec<f64>>,
    mean: Vec<f64>,
    scale: f64,
    sigma: f64,
    noise_exponent: f64,
    noise_x: Vec<f64>,
    noise_y: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn normals(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| normal(rng)).collect()
}

/// Latent coordinates (row-major `n x m`) and their dispersal map.
fn latent(spec: &GeneratorSpec, m: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Option<Vec<usize>>) {
    let n = spec.n_samples;
    let p = &spec.params;
    match spec.family {
        Family::GaussianClusters => {
            let centers = normals(rng, p.clusters * 3);
            let labels: Vec<usize> = (0..n).map(|i| i % p.clusters).collect();
            let mut l = Vec::with_capacity(n * 3);
            for &c in &labels {
                for a in 0..3 {
                    l.push(centers[c * 3 + a] + p.cluster_std * normal(rng));
                }
            }
            (l, Some(labels))
        }
        Family::ConcentricRings => {
            let labels: Vec<usize> = (0..n).map(|i| i % p.rings).collect();
            let mut l = Vec::with_capacity(n * 2);
            for &ring in &labels {
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                let r = 1.0 + ring as f64 + p.ring_width * normal(rng);
                l.extend([r * theta.cos(), r * theta.sin()]);
            }
            (l, Some(labels))
        }
        Family::UniformGrid => {
            let side = p.grid_side.max((n as f64).sqrt().ceil() as usize);
            let mut l = Vec::with_capacity(n * 2);
            for i in 0..n {
                let (a, b) = ((i % side) as f64, (i / side) as f64);
                l.extend([
                    a + p.grid_jitter * normal(rng),
                    b + p.grid_jitter * normal(rng),
                ]);
            }
            (l, None)
        }
        Family::UniformDisk => {
            let mut l = Vec::with_capacity(n * 2);
            for _ in 0..n {
                let r = rng.random::<f64>().sqrt();
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                l.extend([r * theta.cos(), r * theta.sin()]);
            }
            (l, None)
        }
        Family::SwissRoll => {
            let mut l = Vec::with_capacity(n * 3);
            for _ in 0..n {
                let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * rng.random::<f64>());
                let h = 21.0 * rng.random::<f64>();
                l.extend([t * t.cos(), h, t * t.sin()]);
            }
            (l, None)
        }
        Family::SCurve => {
            let mut l = Vec::with_capacity(n * 3);
            for _ in 0..n {
                let t = 3.0 * std::f64::consts::PI * (rng.random::<f64>() - 0.5);
                let h = 2.0 * rng.random::<f64>();
                l.extend([t.sin(), h, t.signum() * (t.cos() - 1.0)]);
            }
            (l, None)
        }
        Family::FoldedManifold => {
            // A 4 x 4 sheet folded along u.
            let amp = 4.0 * p.fold_amplitude;
            let mut l = Vec::with_capacity(n * 3);
            for _ in 0..n {
                let (u, v) = (4.0 * rng.random::<f64>(), 4.0 * rng.random::<f64>());
                l.extend([u, v, amp * (std::f64::consts::FRAC_PI_2 * u).sin()]);
            }
            (l, None)
        }
        Family::HighdimGaussian => (normals(rng, n * m), None),
    }
}

/// Orthonormal `rows x cols` frame by modified Gram-Schmidt on a Gaussian draw.
fn random_frame(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while q.len() < cols {
        let mut v = normals(rng, rows);
        for u in &q {
            let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (c, col) in q.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            out[r * cols + c] = v;
        }
    }
    out
}

fn mean_distance_rows(data: &[f64], n: usize, m: usize) -> Result<f64> {
    pairwise_mean_distance(&FeatureMatrix::from_vec(n, m, data.to_vec())?)
}

impl Draw {
    fn new(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let (n, d) = (spec.n_samples, spec.ambient_dim);
        let m = spec.latent_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(spec.family.stream());

        let (latent, labels) = latent(spec, m, &mut rng);
        let frame = (m < d - 1).then(|| random_frame(d - 1, m, &mut rng));
        let noise_x = normals(&mut rng, n * d);
        let noise_y = normals(&mut rng, n * d);

        let mut mean = vec![0.0; m];
        for row in latent.chunks_exact(m) {
            mean.iter_mut().zip(row).for_each(|(a, v)| *a += v);
        }
        mean.iter_mut().for_each(|a| *a /= n as f64);
        let scale = mean_distance_rows(&latent, n, m)?;
        if scale == 0.0 {
            return Err(Error::InvalidSpec(
                "latent draw collapsed to a point".into(),
            ));
        }
        Ok(Self {
            n,
            d,
            m,
            latent,
            labels,
            frame,
            mean,
            scale,
            sigma: spec.params.sigma_base * spec.params.spread,
            noise_exponent: spec.params.noise_exponent,
            noise_x,
            noise_y,
        }
        .with_spread(spec.params.spread))
    }

    fn with_spread(mut self, spread: f64) -> Self {
        self.scale /= spread;
        self
    }

    fn render(&self, knob: f64, noise: &[f64], sigma: f64) -> Result<FeatureMatrix<f64>> {
        let (d, m) = (self.d, self.m);
        let mut out = vec![0.0; self.n * d];
        out.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            let e: Vec<f64> = self.latent[i * m..(i + 1) * m]
                .iter()
                .zip(&self.mean)
                .map(|(v, mu)| knob * (v - mu) / self.scale)
                .collect();
            match &self.frame {
                Some(q) => {
                    for (r, slot) in row[..d - 1].iter_mut().enumerate() {
                        *slot = q[r * m..(r + 1) * m]
                            .iter()
                            .zip(&e)
                            .map(|(a, b)| a * b)
                            .sum();
                    }
                }
                None => row[..d - 1].copy_from_slice(&e),
            }
            row[d - 1] = 1.0;
            row.iter_mut()
                .zip(&noise[i * d..(i + 1) * d])
                .for_each(|(v, z)| *v += sigma * z);
        });
        l2_normalize(&FeatureMatrix::from_vec(self.n, d, out)?)
    }

    fn x(&self) -> Result<FeatureMatrix<f64>> {
        self.render(1.0, &self.noise_x, self.sigma)
    }

    fn y(&self, knob: f64) -> Result<FeatureMatrix<f64>> {
        self.render(
            knob,
            &self.noise_y,
            self.sigma * knob.powf(self.noise_exponent),
        )
    }
}

/// Monotone map from measured ratio to knob for one draw.
struct Calibration {
    knobs: Vec<f64>,
    ratios: Vec<f64>,
}

impl Calibration {
    fn measure(draw: &Draw, d_x: f64, params: &FamilyParams) -> Result<Self> {
        let steps = params.knob_points - 1;
        let knobs: Vec<f64> = (0..=steps)
            .map(|i| params.knob_max.powf(i as f64 / steps as f64))
            .collect();
        let mut ratios = knobs
            .iter()
            .map(|&kn| Ok(pairwise_mean_distance(&draw.y(kn)?)? / d_x))
            .collect::<Result<Vec<f64>>>()?;
        for i in 1..ratios.len() {
            ratios[i] = ratios[i].max(ratios[i - 1]);
        }
        Ok(Self { knobs, ratios })
    }

    fn knob_for(&self, rho: f64) -> Result<f64> {
        let Some(hi) = self.ratios.iter().position(|&r| r >= rho) else {
            return Err(Error::InvalidSpec(format!(
                "density ratio {rho} exceeds the reachable maximum {:.3}",
                self.ratios.last().unwrap()
            )));
        };
        if hi == 0 {
            return Ok(self.knobs[0]);
        }
        let (r0, r1) = (self.ratios[hi - 1], self.ratios[hi]);
        let t = (rho - r0) / (r1 - r0);
        Ok(self.knobs[hi - 1] + t * (self.knobs[hi] - self.knobs[hi - 1]))
    }
}

/// Draws a calibrated pair. Deterministic in `spec`.
pub fn generate<T: Scalar>(spec: &GeneratorSpec) -> Result<PairedSample<T>> {
    let draw = Draw::new(spec)?;
    let x = draw.x()?;
    let d_x = pairwise_mean_distance(&x)?;
    let knob = Calibration::measure(&draw, d_x, &spec.params)?.knob_for(spec.density_ratio)?;
    let y = draw.y(knob)?;
    let measured_ratio = pairwise_mean_distance(&y)? / d_x;
    Ok(PairedSample {
        x: x.map(T::narrow)?,
        y: y.map(T::narrow)?,
        spec: spec.clone(),
        knob,
        measured_ratio,
        labels: draw.labels.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSweepRow {
    pub rho: f64,
    pub knob: f64,
    pub measured_rho: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub k: usize,
    /// `cycle_knn(y -> x)`.
    pub s_yx: f64,
    /// `cycle_knn(x -> y)`.
    pub s_xy: f64,
    /// `s_yx - s_xy`.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSweepTable {
    pub family: Family,
    pub n_samples: usize,
    pub ambient_dim: usize,
    pub seed: u64,
    pub params: FamilyParams,
    pub rows: Vec<RhoSweepRow>,
}

impl RhoSweepTable {
    /// `(rho, delta)` at one `k`, in grid order.
    pub fn column(&self, k: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.k == k)
            .map(|r| (r.rho, r.delta))
            .collect()
    }
}

/// Evenly spaced grid of `points` ratios over `[lo, hi]`.
pub fn rho_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Directional gap `cycle_knn(y -> x) - cycle_knn(x -> y)` across a ratio grid.
///
/// Every grid point reuses the same latent draw and noise (common random
/// numbers), so neighbouring points differ only in the dispersal knob.
pub fn rho_sweep(
    family: Family,
    rhos: &[f64],
    ks: &[usize],
    n_samples: usize,
    ambient_dim: usize,
    seed: u64,
) -> Result<RhoSweepTable> {
    rho_sweep_with(
        family,
        FamilyParams::for_family(family),
        rhos,
        ks,
        n_samples,
        ambient_dim,
        seed,
    )
}

pub fn rho_sweep_with(
    family: Family,
    params: FamilyParams,
    rhos: &[f64],
    ks: &[usize],
    n_samples: usize,
    ambient_dim: usize,
    seed: u64,
) -> Result<RhoSweepTable> {
    if rhos.is_empty() {
        return Err(Error::EmptyInput("rho grid is empty"));
    }
    if rhos.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "rho grid must be strictly ascending".into(),
        ));
    }
    let Some(&k_max) = ks.iter().max() else {
        return Err(Error::EmptyInput("k list is empty"));
    };
    let spec = GeneratorSpec {
        family,
        n_samples,
        ambient_dim,
        density_ratio: rhos[0],
        seed,
        params: params.clone(),
    };
    for &rho in rhos {
        GeneratorSpec {
            density_ratio: rho,
            ..spec.clone()
        }
        .validate()?;
    }
    let draw = Draw::new(&spec)?;
    let x = draw.x()?;
    let d_x = pairwise_mean_distance(&x)?;
    let calibration = Calibration::measure(&draw, d_x, &params)?;
    let x_table = knn_table(&x, k_max, DistanceKind::CosineOnUnitSphere)?;

    let mut rows = Vec::with_capacity(rhos.len() * ks.len());
    for &rho in rhos {
        let knob = calibration.knob_for(rho)?;
        let y = draw.y(knob)?;
        let d_y = pairwise_mean_distance(&y)?;
        let y_table = knn_table(&y, k_max, DistanceKind::CosineOnUnitSphere)?;
        for &k in ks {
            let (xt, yt) = (x_table.truncate(k)?, y_table.truncate(k)?);
            let s_yx = cycle_knn_from_tables(&yt, &xt)?;
            let s_xy = cycle_knn_from_tables(&xt, &yt)?;
            rows.push(RhoSweepRow {
                rho,
                knob,
                measured_rho: d_y / d_x,
                d_x,
                d_y,
                k,
                s_yx,
                s_xy,
                delta: s_yx - s_xy,
            });
        }
    }
    Ok(RhoSweepTable {
        family,
        n_samples,
        ambient_dim,
        seed,
        params,
        rows,
    })
}
