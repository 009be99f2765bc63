//! Reference implementations used as test oracles. Written directly from the
//! textbook formulas, sharing no code with the crate beyond its data types.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamfuzz::fcm::{Centroids, Dataset};
use streamfuzz::ingest::LabeledPoint;
use streamfuzz::stream::Chunk;
use streamfuzz::synthetic::BlobStreamSpec;

pub type Rows = Vec<Vec<f64>>;

pub fn rows_of(data: &Dataset) -> Rows {
    data.rows().map(<[f64]>::to_vec).collect()
}

pub fn centers_of(v: &Centroids) -> Rows {
    v.rows().map(<[f64]>::to_vec).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `u[i][j]` from Euclidean distances, `u_ij = 1 / Σ_k (d_ij / d_kj)^(2/(m−1))`.
/// A point sitting on centers belongs to them equally.
pub fn memberships(x: &Rows, v: &Rows, m: f64) -> Rows {
    let c = v.len();
    let mut u = vec![vec![0.0; x.len()]; c];
    for (j, xj) in x.iter().enumerate() {
        let d: Vec<f64> = v.iter().map(|vi| dist(xj, vi)).collect();
        let zeros = d.iter().filter(|&&di| di == 0.0).count();
        for i in 0..c {
            u[i][j] = if zeros > 0 {
                if d[i] == 0.0 {
                    1.0 / zeros as f64
                } else {
                    0.0
                }
            } else {
                1.0 / (0..c)
                    .map(|k| (d[i] / d[k]).powf(2.0 / (m - 1.0)))
                    .sum::<f64>()
            };
        }
    }
    u
}

pub fn centroids(x: &Rows, w: &[f64], u: &Rows, m: f64) -> Option<Rows> {
    let d = x[0].len();
    u.iter()
        .map(|ui| {
            let mut num = vec![0.0; d];
            let mut den = 0.0;
            for (j, xj) in x.iter().enumerate() {
                let a = w[j] * ui[j].powf(m);
                den += a;
                for k in 0..d {
                    num[k] += a * xj[k];
                }
            }
            (den > 0.0).then(|| num.into_iter().map(|s| s / den).collect())
        })
        .collect()
}

pub fn objective(x: &Rows, w: &[f64], u: &Rows, v: &Rows, m: f64) -> f64 {
    let mut total = 0.0;
    for (i, vi) in v.iter().enumerate() {
        for (j, xj) in x.iter().enumerate() {
            total += w[j] * u[i][j].powf(m) * dist(xj, vi).powi(2);
        }
    }
    total
}

pub struct OracleFit {
    pub v: Rows,
    pub u: Rows,
    pub history: Vec<f64>,
}

/// Plain alternating FCM: U from V, V from U, stop when `|ΔJ| < epsilon` or
/// after `max_iter` rounds. `None` if a cluster loses all weight.
pub fn fcm(x: &Rows, w: &[f64], init: &Rows, m: f64, epsilon: f64, max_iter: usize) -> Option<OracleFit> {
    let mut v = init.clone();
    let mut history: Vec<f64> = Vec::new();
    loop {
        let u = memberships(x, &v, m);
        v = centroids(x, w, &u, m)?;
        let j = objective(x, w, &u, &v, m);
        let done = history.last().is_some_and(|p| (p - j).abs() < epsilon);
        history.push(j);
        if done || history.len() >= max_iter {
            return Some(OracleFit { v, u, history });
        }
    }
}

/// Xie–Beni with point weights: weighted compactness over total weight times
/// the smallest squared center distance.
pub fn xie_beni(x: &Rows, w: &[f64], u: &Rows, v: &Rows) -> f64 {
    let mut sep = f64::INFINITY;
    for a in 0..v.len() {
        for b in 0..v.len() {
            if a != b {
                sep = sep.min(dist(&v[a], &v[b]).powi(2));
            }
        }
    }
    if sep == 0.0 {
        return f64::INFINITY;
    }
    let comp = objective(x, w, u, v, 2.0);
    comp / (w.iter().sum::<f64>() * sep)
}

/// `(1/n) Σ |f_i − y_i|`.
pub fn mae(f: &[u32], y: &[u32]) -> f64 {
    let mut s = 0.0;
    for i in 0..f.len() {
        s += (f[i] as f64 - y[i] as f64).abs();
    }
    s / f.len() as f64
}

/// Brute-force k± search. Candidate order and labels: `0` keep, `1 + i` for
/// dropping seed `i`, `1 + k + t` for adding cluster `t`'s farthest crisp
/// member to the keep refit. Returns the winning label and every score.
pub struct BruteForce {
    pub winner: usize,
    pub winner_k: usize,
    pub scores: Vec<(usize, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn brute_force_search(
    x: &Rows,
    w: &[f64],
    keep_init: &Rows,
    k_min: usize,
    k_max: usize,
    m: f64,
    epsilon: f64,
    max_iter: usize,
) -> BruteForce {
    let k = keep_init.len();
    let mut scores: Vec<(usize, f64, usize)> = Vec::new();
    let score = |init: &Rows| fcm(x, w, init, m, epsilon, max_iter).map(|f| xie_beni(x, w, &f.u, &f.v));

    let keep_fit = fcm(x, w, keep_init, m, epsilon, max_iter);
    if let Some(f) = &keep_fit {
        scores.push((0, xie_beni(x, w, &f.u, &f.v), k));
    }
    if k > k_min {
        for i in 0..k {
            let mut init = keep_init.clone();
            init.remove(i);
            if let Some(s) = score(&init) {
                scores.push((1 + i, s, k - 1));
            }
        }
    }
    if let (Some(f), true) = (&keep_fit, k < k_max && x.len() > k) {
        for t in 0..k {
            let mut far: Option<(usize, f64)> = None;
            for (j, xj) in x.iter().enumerate() {
                let col: Vec<f64> = (0..k).map(|i| f.u[i][j]).collect();
                let owner = (0..k).fold(0, |b, i| if col[i] > col[b] { i } else { b });
                if owner != t {
                    continue;
                }
                let dj = dist(xj, &f.v[t]);
                if far.is_none_or(|(_, best)| dj > best) {
                    far = Some((j, dj));
                }
            }
            let Some((j, _)) = far else { continue };
            if f.v.iter().any(|c| dist(c, &x[j]) == 0.0) {
                scores.push((1 + k + t, f64::INFINITY, k + 1));
                continue;
            }
            let mut init = f.v.clone();
            init.push(x[j].clone());
            if let Some(s) = score(&init) {
                scores.push((1 + k + t, s, k + 1));
            }
        }
    }
    let best = scores
        .iter()
        .fold(None::<&(usize, f64, usize)>, |b, c| match b {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .expect("at least one candidate");
    BruteForce {
        winner: best.0,
        winner_k: best.2,
        scores: scores.iter().map(|&(l, s, _)| (l, s)).collect(),
    }
}

/// Uniform random points in `[-10, 10]^d`.
pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Rows {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect()
}

pub fn dataset(rows: &Rows) -> Dataset {
    Dataset::from_rows(rows).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Consecutive chunks of `size` points from a blob stream, labels included.
pub fn blob_chunks(spec: &BlobStreamSpec, size: usize) -> Vec<Chunk> {
    let points: Vec<LabeledPoint> = spec.stream().collect();
    points
        .chunks(size)
        .enumerate()
        .map(|(i, part)| {
            let rows: Vec<&[f64]> = part.iter().map(|p| p.features.as_slice()).collect();
            Chunk::new(i + 1, Dataset::from_rows(&rows).unwrap())
                .with_labels(part.iter().map(|p| p.label).collect())
                .unwrap()
        })
        .collect()
}
