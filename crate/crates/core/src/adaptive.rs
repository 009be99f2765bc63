//! WFCM-AC: z-score normalisation against running statistics and a per-chunk
//! search over `k - 1`, `k` and `k + 1` clusters scored by a validity index.
//!
//! The `k + 1` candidates add, for each cluster, its farthest crisply assigned
//! point as a new seed. The `k - 1` candidates drop one seed at a time. Every
//! candidate is refit with weighted FCM on the chunk's working set and the
//! lowest weighted Xie–Beni score wins.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcm::{
    init_centroids, run_weighted_fcm, sq_dist, Centroids, Dataset, FcmConfig, FcmError, FcmResult,
    MembershipMatrix, PointWeights,
};
use crate::metrics::{evaluate_chunk, Algorithm, ChunkReport, ValidRule};
use crate::stream::{
    assemble_working_set, center_weights, chunk_seed, Chunk, StreamError, StreamState,
    TimeWeightPolicy, WeightedCenter, WorkingSet,
};

/// Standard deviations below this are treated as zero.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptiveError {
    #[error("no statistics: normalisation needs at least one observed point")]
    NoStatistics,
    #[error("dimension mismatch: statistics have {expected} features, data has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("too few points to split: {k} clusters + 1 from {n} points")]
    TooFewPointsToSplit { k: usize, n: usize },
    #[error("validity index needs at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("every candidate failed on chunk {0}")]
    NoCandidate(usize),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Fcm(#[from] FcmError),
}

pub type Result<T> = std::result::Result<T, AdaptiveError>;

/// Per-feature running mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunningStats {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dimension(&self) -> Option<usize> {
        (!self.mean.is_empty()).then_some(self.mean.len())
    }

    /// Population standard deviation per feature.
    pub fn std(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.mean.len()];
        }
        self.m2
            .iter()
            .map(|m2| (m2 / self.count as f64).max(0.0).sqrt())
            .collect()
    }

    pub fn observe(&mut self, x: &[f64]) -> Result<()> {
        if self.mean.is_empty() {
            self.mean = vec![0.0; x.len()];
            self.m2 = vec![0.0; x.len()];
        } else if self.mean.len() != x.len() {
            return Err(AdaptiveError::DimensionMismatch {
                expected: self.mean.len(),
                found: x.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), xi) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = xi - *mean;
            *mean += delta / n;
            *m2 += delta * (xi - *mean);
        }
        Ok(())
    }

    pub fn normalize_point(&self, x: &[f64], std: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(std)
            .map(|((xi, mu), s)| if *s < MIN_STD { 0.0 } else { (xi - mu) / s })
            .collect()
    }

    /// Inverse of [`normalize_point`](Self::normalize_point); zero-std
    /// features come back as the mean.
    pub fn denormalize_point(&self, z: &[f64], std: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(std)
            .map(|((zi, mu), s)| if *s < MIN_STD { *mu } else { zi * s + mu })
            .collect()
    }
}

/// Folds every point of `chunk` into `stats`.
pub fn update_stats(stats: &RunningStats, chunk: &Chunk) -> Result<RunningStats> {
    let mut next = stats.clone();
    for x in chunk.points.rows() {
        next.observe(x)?;
    }
    Ok(next)
}

/// `x' = (x − mean) / std` per feature; features with near-zero std map to 0.
pub fn normalize(chunk: &Chunk, stats: &RunningStats) -> Result<Chunk> {
    if stats.count == 0 {
        return Err(AdaptiveError::NoStatistics);
    }
    let d = chunk.points.d();
    if stats.mean.len() != d {
        return Err(AdaptiveError::DimensionMismatch {
            expected: stats.mean.len(),
            found: d,
        });
    }
    let std = stats.std();
    let values: Vec<f64> = chunk
        .points
        .rows()
        .flat_map(|x| stats.normalize_point(x, &std))
        .collect();
    Ok(Chunk {
        index: chunk.index,
        points: Dataset::new(values, d)?,
        labels: chunk.labels.clone(),
    })
}

pub fn denormalize(chunk: &Chunk, stats: &RunningStats) -> Result<Chunk> {
    if stats.count == 0 {
        return Err(AdaptiveError::NoStatistics);
    }
    let std = stats.std();
    let values: Vec<f64> = chunk
        .points
        .rows()
        .flat_map(|z| stats.denormalize_point(z, &std))
        .collect();
    Ok(Chunk {
        index: chunk.index,
        points: Dataset::new(values, chunk.points.d())?,
        labels: chunk.labels.clone(),
    })
}

/// Which statistics the chunk is standardised against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    /// Everything seen so far, current chunk included.
    #[default]
    Cumulative,
    /// The current chunk only.
    PerChunk,
}

/// One `k + 1` candidate per cluster with at least one crisply assigned point:
/// the current centers plus that cluster's farthest member (lowest index on
/// ties). Returns `(cluster, init)` pairs.
pub fn propose_split(
    data: &Dataset,
    u: &MembershipMatrix,
    v: &Centroids,
) -> Result<Vec<(usize, Centroids)>> {
    let k = v.c();
    if k + 1 > data.n() {
        return Err(AdaptiveError::TooFewPointsToSplit { k, n: data.n() });
    }
    let mut farthest: Vec<Option<(usize, f64)>> = vec![None; k];
    for (j, cluster) in u.crisp_assignments().into_iter().enumerate() {
        let dist = sq_dist(data.row(j), v.row(cluster));
        match farthest[cluster] {
            Some((_, best)) if dist <= best => {}
            _ => farthest[cluster] = Some((j, dist)),
        }
    }
    farthest
        .into_iter()
        .enumerate()
        .filter_map(|(t, hit)| hit.map(|(j, _)| (t, j)))
        .map(|(t, j)| Ok((t, v.with_appended(data.row(j))?)))
        .collect()
}

/// One `k − 1` candidate per center, each with that center removed. Empty when
/// removing a center would fall below `k_min`.
pub fn propose_merge(v: &Centroids, k_min: usize) -> Vec<Centroids> {
    if v.c() < k_min + 1 {
        return Vec::new();
    }
    (0..v.c()).filter_map(|i| v.without(i)).collect()
}

/// Weighted Xie–Beni index,
/// `Σ_i Σ_j w_j u_ij² ‖x_j − v_i‖² / ((Σ_j w_j) · min_{i≠p} ‖v_i − v_p‖²)`.
/// Lower is better; coincident centers score `+∞`.
pub fn validity_index(
    data: &Dataset,
    u: &MembershipMatrix,
    v: &Centroids,
    weights: &PointWeights,
) -> Result<f64> {
    let k = v.c();
    if k < 2 {
        return Err(AdaptiveError::TooFewClusters(k));
    }
    if u.c() != k || u.n() != data.n() || weights.len() != data.n() || v.d() != data.d() {
        return Err(FcmError::DimensionMismatch {
            expected: data.n(),
            found: u.n(),
        }
        .into());
    }
    let mut separation = f64::INFINITY;
    for i in 0..k {
        for p in i + 1..k {
            separation = separation.min(sq_dist(v.row(i), v.row(p)));
        }
    }
    if separation <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut compactness = 0.0;
    for ((x, col), w) in data.rows().zip(u.columns()).zip(weights.as_slice()) {
        for (center, uij) in v.rows().zip(col) {
            compactness += w * uij * uij * sq_dist(x, center);
        }
    }
    Ok(compactness / (weights.total() * separation))
}

/// Identifier of the validity index used to rank candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidityKind {
    #[default]
    XieBeni,
}

impl ValidityKind {
    pub fn score(
        self,
        data: &Dataset,
        u: &MembershipMatrix,
        v: &Centroids,
        weights: &PointWeights,
    ) -> Result<f64> {
        match self {
            ValidityKind::XieBeni => validity_index(data, u, v, weights),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcConfig {
    pub base: FcmConfig,
    pub k_min: usize,
    pub k_max: usize,
    pub validity: ValidityKind,
}

impl AcConfig {
    /// `k_min = 2`, `k_max = 2 · base.c`.
    pub fn new(base: FcmConfig) -> Self {
        let k_max = (2 * base.c).max(2);
        Self {
            base,
            k_min: 2,
            k_max,
            validity: ValidityKind::XieBeni,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.k_min < 2 {
            return Err(AdaptiveError::InvalidConfig(format!(
                "k_min must be at least 2, got {}",
                self.k_min
            )));
        }
        if !(self.k_min <= self.base.c && self.base.c <= self.k_max) {
            return Err(AdaptiveError::InvalidConfig(format!(
                "need k_min <= k <= k_max, got {} <= {} <= {}",
                self.k_min, self.base.c, self.k_max
            )));
        }
        Ok(())
    }
}

/// Candidate kinds in tie-break order: keep, then merges, then splits, each
/// by lowest index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CandidateKind {
    Keep,
    /// Center `i` removed.
    Merge(usize),
    /// Farthest point of cluster `i` added.
    Split(usize),
}

#[derive(Debug, Clone)]
pub struct CandidateStructure {
    pub kind: CandidateKind,
    pub init: Centroids,
    /// `None` when the candidate was scored without a refit (degenerate split).
    pub result: Option<FcmResult>,
    pub validity: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptStep {
    pub state: StreamState,
    pub winner: CandidateStructure,
    /// Every candidate that produced a score, in evaluation order.
    pub evaluated: Vec<(CandidateKind, f64)>,
    /// Candidates that failed, with the reason.
    pub skipped: Vec<(CandidateKind, String)>,
    pub report: ChunkReport,
    pub working_weight: f64,
}

fn refit(ws: &WorkingSet, base: &FcmConfig, init: &Centroids) -> std::result::Result<FcmResult, FcmError> {
    let cfg = FcmConfig {
        c: init.c(),
        ..base.clone()
    };
    run_weighted_fcm(&ws.data, &ws.weights, &cfg, init)
}

fn duplicates_existing(init: &Centroids) -> bool {
    let last = init.c() - 1;
    (0..last).any(|i| sq_dist(init.row(i), init.row(last)) == 0.0)
}

fn score_candidate(
    ws: &WorkingSet,
    config: &AcConfig,
    kind: CandidateKind,
    init: Centroids,
) -> std::result::Result<CandidateStructure, String> {
    if matches!(kind, CandidateKind::Split(_)) && duplicates_existing(&init) {
        return Ok(CandidateStructure {
            kind,
            init,
            result: None,
            validity: f64::INFINITY,
        });
    }
    let result = refit(ws, &config.base, &init).map_err(|e| e.to_string())?;
    let validity = config
        .validity
        .score(&ws.data, &result.memberships, &result.centroids, &ws.weights)
        .map_err(|e| e.to_string())?;
    if validity.is_nan() {
        return Err("validity score is NaN".into());
    }
    Ok(CandidateStructure {
        kind,
        init,
        result: Some(result),
        validity,
    })
}

/// One WFCM-AC step on an already normalised chunk.
///
/// Refits the current structure, builds split candidates from the refit
/// partition and merge candidates from the initial seeds, refits each
/// candidate on the working set and keeps the lowest validity score. Ties
/// resolve to keep, then merge, then split, lowest index first. A failing
/// candidate is skipped and logged.
pub fn adapt_cluster_count(
    state: &StreamState,
    chunk: &Chunk,
    config: &AcConfig,
    policy: &TimeWeightPolicy,
    rule: &ValidRule,
) -> Result<AdaptStep> {
    config.validate()?;
    let ws = assemble_working_set(chunk, state, policy)?;
    let start = Instant::now();

    let k = if state.carried.is_empty() {
        config.base.c
    } else {
        state.k.clamp(config.k_min, config.k_max)
    };
    let keep_init = match state.carried_centroids() {
        Some(v) if v.c() == k => v,
        _ => init_centroids(&ws.data, k, chunk_seed(config.base.seed, chunk.index))?,
    };

    let mut candidates: Vec<CandidateStructure> = Vec::new();
    let mut skipped = Vec::new();
    let keep = score_candidate(&ws, config, CandidateKind::Keep, keep_init.clone());

    let mut pending: Vec<(CandidateKind, Centroids)> = Vec::new();
    if k > config.k_min {
        pending.extend(
            propose_merge(&keep_init, config.k_min)
                .into_iter()
                .enumerate()
                .map(|(i, init)| (CandidateKind::Merge(i), init)),
        );
    }
    match &keep {
        Ok(keep) if k < config.k_max => {
            let fit = keep.result.as_ref().expect("keep is always refit");
            match propose_split(&ws.data, &fit.memberships, &fit.centroids) {
                Ok(splits) => pending.extend(
                    splits
                        .into_iter()
                        .map(|(t, init)| (CandidateKind::Split(t), init)),
                ),
                Err(e) => log::debug!("chunk {}: no split candidates: {e}", chunk.index),
            }
        }
        _ => {}
    }
    match keep {
        Ok(keep) => candidates.push(keep),
        Err(reason) => {
            log::warn!("chunk {}: keep candidate skipped: {reason}", chunk.index);
            skipped.push((CandidateKind::Keep, reason));
        }
    }

    let scored: Vec<_> = pending
        .into_par_iter()
        .map(|(kind, init)| (kind, score_candidate(&ws, config, kind, init)))
        .collect();
    for (kind, outcome) in scored {
        match outcome {
            Ok(c) => candidates.push(c),
            Err(reason) => {
                log::warn!("chunk {}: candidate {kind:?} skipped: {reason}", chunk.index);
                skipped.push((kind, reason));
            }
        }
    }

    let evaluated: Vec<_> = candidates.iter().map(|c| (c.kind, c.validity)).collect();
    let mut iterations: usize = candidates
        .iter()
        .filter_map(|c| c.result.as_ref().map(|r| r.iterations))
        .sum();
    let winner = select_best(candidates).ok_or(AdaptiveError::NoCandidate(chunk.index))?;
    let elapsed = start.elapsed().as_secs_f64();

    let fit = match &winner.result {
        Some(fit) => fit.clone(),
        // Only degenerate splits lack a refit, and those score +inf; they can
        // win only if nothing else was scored.
        None => {
            let fit = refit(&ws, &config.base, &winner.init)?;
            iterations += fit.iterations;
            fit
        }
    };
    let weights = center_weights(&fit.memberships, &ws.weights)?;
    let next = state.advanced(chunk.index, &fit.centroids, &weights);
    let report = evaluate_chunk(
        Algorithm::WfcmAc,
        chunk,
        &ws,
        &fit,
        rule,
        iterations,
        elapsed,
    );
    Ok(AdaptStep {
        state: next,
        winner,
        evaluated,
        skipped,
        report,
        working_weight: ws.weights.total(),
    })
}

/// Lowest score wins; ties go to the smallest [`CandidateKind`].
fn select_best(candidates: Vec<CandidateStructure>) -> Option<CandidateStructure> {
    candidates.into_iter().reduce(|best, c| {
        let better = c.validity < best.validity
            || (c.validity == best.validity && c.kind < best.kind);
        if better {
            c
        } else {
            best
        }
    })
}

/// Owns the stream state and running statistics for a WFCM-AC run.
#[derive(Debug, Clone)]
pub struct WfcmAc {
    pub config: AcConfig,
    pub policy: TimeWeightPolicy,
    pub rule: ValidRule,
    pub norm: NormMode,
    state: StreamState,
    stats: RunningStats,
}

impl WfcmAc {
    pub fn new(config: AcConfig, policy: TimeWeightPolicy, rule: ValidRule, norm: NormMode) -> Self {
        let state = StreamState::new(config.base.c);
        Self {
            config,
            policy,
            rule,
            norm,
            state,
            stats: RunningStats::new(),
        }
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    pub fn stats(&self) -> &RunningStats {
        &self.stats
    }

    /// Normalises `chunk`, re-expresses the carried centers in the new
    /// coordinates and runs one adaptive step. On error nothing changes.
    pub fn process(&mut self, chunk: &Chunk) -> Result<AdaptStep> {
        let stats = match self.norm {
            NormMode::Cumulative => update_stats(&self.stats, chunk)?,
            NormMode::PerChunk => update_stats(&RunningStats::new(), chunk)?,
        };
        let normalized = normalize(chunk, &stats)?;
        let state = self.rebase_state(&stats);
        let step = adapt_cluster_count(&state, &normalized, &self.config, &self.policy, &self.rule)?;
        self.stats = stats;
        self.state = step.state.clone();
        Ok(step)
    }

    fn rebase_state(&self, stats: &RunningStats) -> StreamState {
        if self.stats.count == 0 || self.state.carried.is_empty() {
            return self.state.clone();
        }
        let old_std = self.stats.std();
        let new_std = stats.std();
        let carried = self
            .state
            .carried
            .iter()
            .map(|c| WeightedCenter {
                vector: stats.normalize_point(
                    &self.stats.denormalize_point(&c.vector, &old_std),
                    &new_std,
                ),
                weight: c.weight,
            })
            .collect();
        StreamState {
            carried,
            ..self.state.clone()
        }
    }
}
