//! Batch weighted fuzzy c-means.
//!
//! Every point carries a nonnegative influence weight. With all weights equal
//! to one the updates reduce to textbook FCM. The streaming engines in
//! [`crate::stream`] and [`crate::adaptive`] both drive [`run_weighted_fcm`].

use std::time::{Duration, Instant};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FcmError {
    #[error("invalid cluster count: {0}")]
    InvalidClusterCount(usize),
    #[error("insufficient points: {c} clusters requested from {n} points")]
    InsufficientPoints { c: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate cluster {0}: zero total membership weight")]
    DegenerateCluster(usize),
}

pub type Result<T> = std::result::Result<T, FcmError>;

/// Row-major matrix of `n` points with `d` features each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    pub fn new(values: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(FcmError::DimensionMismatch { expected: 1, found: 0 });
        }
        if !values.len().is_multiple_of(d) {
            return Err(FcmError::DimensionMismatch {
                expected: d,
                found: values.len() % d,
            });
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(FcmError::NonFinite(pos));
        }
        let n = values.len() / d;
        Ok(Self { values, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(FcmError::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(values, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Per-point influence weights. All finite, nonnegative, not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PointWeights(Vec<f64>);

impl PointWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(FcmError::InvalidWeights(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if !w.iter().any(|x| *x > 0.0) {
            return Err(FcmError::InvalidWeights(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(Self(w))
    }

    pub fn unit(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * factor).collect())
    }
}

/// Fuzzy partition of `n` points over `c` clusters.
///
/// Stored point-major: the memberships of one point are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    values: Vec<f64>,
    c: usize,
    n: usize,
}

impl MembershipMatrix {
    /// Builds a matrix from `n` columns of length `c`, validating the
    /// column-stochastic invariant.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let c = columns.first().map(|col| col.as_ref().len()).unwrap_or(0);
        if c == 0 {
            return Err(FcmError::InvalidClusterCount(0));
        }
        let mut values = Vec::with_capacity(columns.len() * c);
        for col in columns {
            let col = col.as_ref();
            if col.len() != c {
                return Err(FcmError::DimensionMismatch {
                    expected: c,
                    found: col.len(),
                });
            }
            if col.iter().any(|u| !(0.0..=1.0).contains(u)) {
                return Err(FcmError::InvalidConfig(
                    "membership outside [0, 1]".into(),
                ));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(FcmError::InvalidConfig(format!(
                    "membership column sums to {sum}"
                )));
            }
            values.extend_from_slice(col);
        }
        Ok(Self {
            values,
            c,
            n: columns.len(),
        })
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, cluster: usize, point: usize) -> f64 {
        self.values[point * self.c + cluster]
    }

    pub fn column(&self, point: usize) -> &[f64] {
        &self.values[point * self.c..(point + 1) * self.c]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.c)
    }

    /// Crisp assignment of `point`; ties go to the lowest cluster index.
    pub fn argmax(&self, point: usize) -> usize {
        argmax_first(self.column(point))
    }

    pub fn crisp_assignments(&self) -> Vec<usize> {
        self.columns().map(argmax_first).collect()
    }

    /// Keeps only the first `n` points.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n);
        Self {
            values: self.values[..n * self.c].to_vec(),
            c: self.c,
            n,
        }
    }
}

pub(crate) fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// `c` cluster centers of dimension `d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    values: Vec<f64>,
    c: usize,
    d: usize,
}

impl Centroids {
    pub fn new(values: Vec<f64>, d: usize) -> Result<Self> {
        let data = Dataset::new(values, d)?;
        if data.n == 0 {
            return Err(FcmError::InvalidClusterCount(0));
        }
        Ok(Self {
            c: data.n,
            d,
            values: data.values,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.is_empty() {
            return Err(FcmError::InvalidClusterCount(0));
        }
        let data = Dataset::from_rows(rows)?;
        Self::new(data.values, data.d)
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Returns a copy with center `i` removed, order preserved.
    pub fn without(&self, i: usize) -> Option<Self> {
        if self.c < 2 || i >= self.c {
            return None;
        }
        let values = self
            .rows()
            .enumerate()
            .filter(|(r, _)| *r != i)
            .flat_map(|(_, row)| row.iter().copied())
            .collect();
        Some(Self {
            values,
            c: self.c - 1,
            d: self.d,
        })
    }

    /// Returns a copy with `center` appended.
    pub fn with_appended(&self, center: &[f64]) -> Result<Self> {
        if center.len() != self.d {
            return Err(FcmError::DimensionMismatch {
                expected: self.d,
                found: center.len(),
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(center);
        Self::new(values, self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmConfig {
    /// Number of clusters.
    pub c: usize,
    /// Fuzzifier, must exceed 1.
    pub m: f64,
    /// Stop once the objective moves by less than this between iterations.
    pub epsilon: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl FcmConfig {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            m: 2.0,
            epsilon: 1e-5,
            max_iter: 100,
            seed: 0,
        }
    }

    /// Checks the parameter ranges that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.c == 0 {
            return Err(FcmError::InvalidClusterCount(0));
        }
        if !(self.m > 1.0 && self.m.is_finite()) {
            return Err(FcmError::InvalidConfig(format!(
                "fuzzifier must be > 1, got {}",
                self.m
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(FcmError::InvalidConfig(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(FcmError::InvalidConfig("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FcmResult {
    pub centroids: Centroids,
    /// Memberships from the final iteration; `centroids` were computed from them.
    pub memberships: MembershipMatrix,
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub elapsed: Duration,
}

impl FcmResult {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.elapsed.as_secs_f64()
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(data: &Dataset, v: &Centroids) -> Result<()> {
    if data.d != v.d {
        return Err(FcmError::DimensionMismatch {
            expected: data.d,
            found: v.d,
        });
    }
    Ok(())
}

fn check_membership_shape(data: &Dataset, u: &MembershipMatrix) -> Result<()> {
    if u.n != data.n {
        return Err(FcmError::DimensionMismatch {
            expected: data.n,
            found: u.n,
        });
    }
    Ok(())
}

fn check_weights(data: &Dataset, weights: &PointWeights) -> Result<()> {
    if weights.len() != data.n {
        return Err(FcmError::DimensionMismatch {
            expected: data.n,
            found: weights.len(),
        });
    }
    Ok(())
}

/// Picks `c` distinct rows of `data` by seeded sampling without replacement.
pub fn init_centroids(data: &Dataset, c: usize, seed: u64) -> Result<Centroids> {
    if c == 0 {
        return Err(FcmError::InvalidClusterCount(0));
    }
    if c > data.n {
        return Err(FcmError::InsufficientPoints { c, n: data.n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, data.n, c);
    let mut values = Vec::with_capacity(c * data.d);
    for j in picked.iter() {
        values.extend_from_slice(data.row(j));
    }
    Centroids::new(values, data.d)
}

/// Writes the memberships of one point into `out`.
fn point_memberships(x: &[f64], v: &Centroids, exponent: f64, out: &mut [f64]) {
    let mut coincident = 0usize;
    for (i, center) in v.rows().enumerate() {
        let d2 = sq_dist(x, center);
        out[i] = d2;
        if d2 == 0.0 {
            coincident += 1;
        }
    }
    if coincident > 0 {
        let share = 1.0 / coincident as f64;
        for u in out.iter_mut() {
            *u = if *u == 0.0 { share } else { 0.0 };
        }
        return;
    }
    // u_i = 1 / sum_k (d_i/d_k)^(2/(m-1)); scaled by the nearest distance so
    // that every ratio lies in (0, 1].
    let nearest = out.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for u in out.iter_mut() {
        *u = (nearest / *u).powf(exponent);
        total += *u;
    }
    for u in out.iter_mut() {
        *u /= total;
    }
}

/// Standard FCM membership update. Points lying exactly on one or more centers
/// are split evenly across those centers.
pub fn update_memberships(data: &Dataset, v: &Centroids, m: f64) -> Result<MembershipMatrix> {
    check_dims(data, v)?;
    if m.is_nan() || m <= 1.0 {
        return Err(FcmError::InvalidConfig(format!(
            "fuzzifier must be > 1, got {m}"
        )));
    }
    let c = v.c;
    let exponent = 1.0 / (m - 1.0);
    let mut values = vec![0.0; data.n * c];
    values
        .par_chunks_mut(c)
        .zip(data.values.par_chunks_exact(data.d))
        .for_each(|(out, x)| point_memberships(x, v, exponent, out));
    Ok(MembershipMatrix {
        values,
        c,
        n: data.n,
    })
}

/// Weighted centroid sums; `None` marks a cluster whose denominator is zero.
fn weighted_centroids(
    data: &Dataset,
    u: &MembershipMatrix,
    weights: &PointWeights,
    m: f64,
) -> Vec<Option<Vec<f64>>> {
    let d = data.d;
    (0..u.c)
        .into_par_iter()
        .map(|i| {
            let mut num = vec![0.0; d];
            let mut den = 0.0;
            for (j, x) in data.rows().enumerate() {
                let coef = weights.0[j] * u.get(i, j).powf(m);
                if coef == 0.0 {
                    continue;
                }
                den += coef;
                for (acc, xk) in num.iter_mut().zip(x) {
                    *acc += coef * xk;
                }
            }
            if den > 0.0 {
                num.iter_mut().for_each(|a| *a /= den);
                Some(num)
            } else {
                None
            }
        })
        .collect()
}

/// Weighted centroid update `v_i = Σ w_j u_ij^m x_j / Σ w_j u_ij^m`.
pub fn update_centroids(
    data: &Dataset,
    u: &MembershipMatrix,
    weights: &PointWeights,
    m: f64,
) -> Result<Centroids> {
    check_membership_shape(data, u)?;
    check_weights(data, weights)?;
    let rows = weighted_centroids(data, u, weights, m);
    let mut values = Vec::with_capacity(u.c * data.d);
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Some(row) => values.extend(row),
            None => return Err(FcmError::DegenerateCluster(i)),
        }
    }
    Centroids::new(values, data.d)
}

/// Weighted FCM objective `J = Σ_i Σ_j w_j u_ij^m ‖x_j − v_i‖²`.
pub fn objective(
    data: &Dataset,
    u: &MembershipMatrix,
    v: &Centroids,
    weights: &PointWeights,
    m: f64,
) -> Result<f64> {
    check_dims(data, v)?;
    check_membership_shape(data, u)?;
    check_weights(data, weights)?;
    if u.c != v.c {
        return Err(FcmError::DimensionMismatch {
            expected: v.c,
            found: u.c,
        });
    }
    let per_point: Vec<f64> = data
        .values
        .par_chunks_exact(data.d)
        .zip(u.values.par_chunks_exact(u.c))
        .zip(weights.0.par_iter())
        .map(|((x, col), w)| {
            if *w == 0.0 {
                return 0.0;
            }
            let s: f64 = v
                .rows()
                .zip(col)
                .map(|(center, uij)| uij.powf(m) * sq_dist(x, center))
                .sum();
            w * s
        })
        .collect();
    Ok(per_point.iter().sum())
}

/// Index of the point with the largest weighted distance to its nearest center.
fn worst_served_point(data: &Dataset, weights: &PointWeights, v: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, x) in data.rows().enumerate() {
        let nearest = v
            .iter()
            .map(|center| sq_dist(x, center))
            .fold(f64::INFINITY, f64::min);
        let score = weights.0[j] * nearest;
        if score > best.1 {
            best = (j, score);
        }
    }
    best.0
}

/// Alternating weighted FCM from the given initial centers.
///
/// Each iteration updates memberships from the current centers, then centers
/// from those memberships, and records `J(U_t, V_t)`. Stops when the objective
/// changes by less than `config.epsilon` or after `config.max_iter` iterations.
/// A cluster that loses all membership weight is moved once to the worst-served
/// point; a second collapse of the same cluster is an error.
pub fn run_weighted_fcm(
    data: &Dataset,
    weights: &PointWeights,
    config: &FcmConfig,
    init: &Centroids,
) -> Result<FcmResult> {
    config.validate()?;
    check_dims(data, init)?;
    check_weights(data, weights)?;
    if init.c != config.c {
        return Err(FcmError::InvalidClusterCount(init.c));
    }
    if config.c > data.n {
        return Err(FcmError::InsufficientPoints {
            c: config.c,
            n: data.n,
        });
    }

    let start = Instant::now();
    let mut v = init.clone();
    let mut reseeded = vec![false; config.c];
    let mut history = Vec::new();
    let mut u;
    loop {
        u = update_memberships(data, &v, config.m)?;
        let rows = weighted_centroids(data, &u, weights, config.m);
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(config.c);
        let mut degenerate = Vec::new();
        for (i, row) in rows.into_iter().enumerate() {
            match row {
                Some(row) => next.push(row),
                None => {
                    degenerate.push(i);
                    next.push(v.row(i).to_vec());
                }
            }
        }
        for i in degenerate {
            if reseeded[i] {
                return Err(FcmError::DegenerateCluster(i));
            }
            reseeded[i] = true;
            let j = worst_served_point(data, weights, &next);
            log::debug!("re-seeding degenerate cluster {i} at point {j}");
            next[i] = data.row(j).to_vec();
        }
        v = Centroids::new(next.concat(), data.d)?;
        let j_t = objective(data, &u, &v, weights, config.m)?;
        let converged = history
            .last()
            .is_some_and(|prev: &f64| (prev - j_t).abs() < config.epsilon);
        history.push(j_t);
        if converged || history.len() >= config.max_iter {
            break;
        }
    }

    Ok(FcmResult {
        centroids: v,
        memberships: u,
        iterations: history.len(),
        objective_history: history,
        elapsed: start.elapsed(),
    })
}
