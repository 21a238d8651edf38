//! Brute-force reference implementations and instance generators shared by
//! the integration tests. Nothing here calls into the library's metric code.

#![allow(dead_code, clippy::needless_range_loop)]

use dirconv::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const APP_X: [f64; 6] = [15.0, 26.0, 49.0, 60.0, 87.0, 90.0];
pub const APP_Y: [f64; 6] = [34.0, 56.0, 58.0, 57.0, 63.0, 37.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rows(m: &FeatureMatrix<f64>) -> Vec<Vec<f64>> {
    m.rows().map(<[f64]>::to_vec).collect()
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        })
        .collect()
}

/// Small integer coordinates: plenty of exact distance ties.
pub fn integer_points(rng: &mut ChaCha8Rng, n: usize, d: usize, range: i32) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| rng.random_range(-range..=range) as f64)
                .collect()
        })
        .collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix<f64> {
    FeatureMatrix::from_rows(rows).unwrap()
}

pub fn unit_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.iter().map(|v| v / norm).collect()
        })
        .collect()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// k nearest neighbors by explicit Euclidean distance, ties to the smaller index.
pub fn knn_oracle(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = Vec::new();
        for j in 0..n {
            if j != i {
                cand.push((euclid(&points[i], &points[j]), j));
            }
        }
        // Insertion sort: stable, so equal distances keep index order.
        for a in 1..cand.len() {
            let mut b = a;
            while b > 0 && cand[b - 1].0 > cand[b].0 {
                cand.swap(b - 1, b);
                b -= 1;
            }
        }
        out.push(cand.iter().take(k).map(|c| c.1).collect());
    }
    out
}

/// Fraction of i that return to themselves: first hop in target, return hop in source.
pub fn cycle_oracle(source: &[Vec<f64>], target: &[Vec<f64>], k: usize) -> f64 {
    let (ns, nt) = (knn_oracle(source, k), knn_oracle(target, k));
    let n = source.len();
    let mut hits = 0;
    for i in 0..n {
        let mut back = false;
        for &j in &nt[i] {
            for &l in &ns[j] {
                if l == i {
                    back = true;
                }
            }
        }
        if back {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

pub fn mutual_oracle(a: &[Vec<f64>], b: &[Vec<f64>], k: usize) -> f64 {
    let (na, nb) = (knn_oracle(a, k), knn_oracle(b, k));
    let mut shared = 0;
    for i in 0..a.len() {
        for x in &na[i] {
            if nb[i].contains(x) {
                shared += 1;
            }
        }
    }
    shared as f64 / (a.len() * k) as f64
}

fn gram(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
        }
    }
    g
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                c[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    c
}

/// `tr(K H L H)` with the explicit centering matrix `H = I - 11^T / n`.
fn hsic(k: &[Vec<f64>], l: &[Vec<f64>]) -> f64 {
    let n = k.len();
    let h: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64)
                .collect()
        })
        .collect();
    let m = matmul(&matmul(&matmul(k, &h), l), &h);
    (0..n).map(|i| m[i][i]).sum()
}

/// Linear CKA through kernel HSIC, without centering the features.
pub fn cka_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (ka, kb) = (gram(a), gram(b));
    hsic(&ka, &kb) / (hsic(&ka, &ka) * hsic(&kb, &kb)).sqrt()
}

pub fn density_oracle(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += euclid(&points[i], &points[j]);
            count += 1;
        }
    }
    total / count as f64
}

/// True when every point's sorted neighbor distances have no tie at or just
/// past position k, so the k-nearest set is unambiguous.
pub fn tie_free(points: &[Vec<f64>], k: usize) -> bool {
    let n = points.len();
    (0..n).all(|i| {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| euclid(&points[i], &points[j]))
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d.windows(2).take(k + 1).all(|w| w[1] - w[0] > 1e-9)
    })
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&x, &y| v[x].partial_cmp(&v[y]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for t in i..=j {
                r[idx[t]] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|x| (x - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
