//! Chunked WFCM: each chunk is clustered together with the weighted centers
//! carried over from the previous chunk, then its raw points are dropped.

use thiserror::Error;

use crate::fcm::{
    self, init_centroids, run_weighted_fcm, Centroids, Dataset, FcmConfig, FcmError, FcmResult,
    MembershipMatrix, PointWeights,
};
use crate::metrics::{evaluate_chunk, Algorithm, ChunkReport, ClassCode, ValidRule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("schema drift: stream has dimension {expected}, chunk has {found}")]
    SchemaDrift { expected: usize, found: usize },
    #[error("chunk {index} arrived after chunk {last}")]
    OutOfOrder { index: usize, last: usize },
    #[error("empty chunk {0}")]
    EmptyChunk(usize),
    #[error("label count {labels} does not match point count {points}")]
    LabelMismatch { labels: usize, points: usize },
    #[error(transparent)]
    Fcm(#[from] FcmError),
}

pub type Result<T> = std::result::Result<T, StreamError>;

/// An arrival-ordered block of points. The index doubles as the time unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub index: usize,
    pub points: Dataset,
    /// Ground-truth class per point, `None` where the label is unknown.
    /// Used for evaluation only.
    pub labels: Option<Vec<Option<ClassCode>>>,
}

impl Chunk {
    pub fn new(index: usize, points: Dataset) -> Self {
        Self {
            index,
            points,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<Option<ClassCode>>) -> Result<Self> {
        if labels.len() != self.points.n() {
            return Err(StreamError::LabelMismatch {
                labels: labels.len(),
                points: self.points.n(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.n()
    }

    pub fn is_empty(&self) -> bool {
        self.points.n() == 0
    }
}

/// Exponential fading of history, `w(age) = exp(-lambda * age)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWeightPolicy {
    pub lambda: f64,
}

impl Default for TimeWeightPolicy {
    fn default() -> Self {
        Self { lambda: 0.1 }
    }
}

impl TimeWeightPolicy {
    pub fn new(lambda: f64) -> Option<Self> {
        (lambda >= 0.0 && lambda.is_finite()).then_some(Self { lambda })
    }
}

pub fn time_weight(age: usize, policy: &TimeWeightPolicy) -> f64 {
    (-policy.lambda * age as f64).exp()
}

/// A centroid summarising every point that has been folded into it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCenter {
    pub vector: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    pub carried: Vec<WeightedCenter>,
    pub chunk_count: usize,
    /// Index of the last processed chunk, 0 before the first one.
    pub last_index: usize,
    pub k: usize,
}

impl StreamState {
    pub fn new(k: usize) -> Self {
        Self {
            carried: Vec::new(),
            chunk_count: 0,
            last_index: 0,
            k,
        }
    }

    pub fn dimension(&self) -> Option<usize> {
        self.carried.first().map(|c| c.vector.len())
    }

    pub fn total_weight(&self) -> f64 {
        self.carried.iter().map(|c| c.weight).sum()
    }

    /// Number of floats held by the state.
    pub fn footprint(&self) -> usize {
        self.carried.iter().map(|c| c.vector.len() + 1).sum()
    }

    pub fn carried_centroids(&self) -> Option<Centroids> {
        let d = self.dimension()?;
        let values = self
            .carried
            .iter()
            .flat_map(|c| c.vector.iter().copied())
            .collect();
        Centroids::new(values, d).ok()
    }

    /// State after adopting `centers` as the summary of the chunk `index`.
    pub fn advanced(&self, index: usize, centers: &Centroids, weights: &[f64]) -> Self {
        let carried = centers
            .rows()
            .zip(weights)
            .map(|(v, w)| WeightedCenter {
                vector: v.to_vec(),
                weight: *w,
            })
            .collect::<Vec<_>>();
        Self {
            k: carried.len(),
            carried,
            chunk_count: self.chunk_count + 1,
            last_index: index,
        }
    }
}

/// A chunk's points followed by the carried centers as weighted pseudo-points.
#[derive(Debug, Clone)]
pub struct WorkingSet {
    pub data: Dataset,
    pub weights: PointWeights,
    /// Rows `0..chunk_points` are the chunk's own points.
    pub chunk_points: usize,
}

pub(crate) fn check_order(state: &StreamState, chunk: &Chunk) -> Result<()> {
    if chunk.index <= state.last_index {
        return Err(StreamError::OutOfOrder {
            index: chunk.index,
            last: state.last_index,
        });
    }
    if chunk.is_empty() {
        return Err(StreamError::EmptyChunk(chunk.index));
    }
    Ok(())
}

/// Builds the working set for `chunk`. Chunk points get weight 1; each carried
/// center keeps its weight faded by the number of chunks since it was stored.
pub fn assemble_working_set(
    chunk: &Chunk,
    state: &StreamState,
    policy: &TimeWeightPolicy,
) -> Result<WorkingSet> {
    check_order(state, chunk)?;
    let d = chunk.points.d();
    if let Some(expected) = state.dimension() {
        if expected != d {
            return Err(StreamError::SchemaDrift { expected, found: d });
        }
    }
    let n = chunk.points.n();
    let mut values = Vec::with_capacity((n + state.carried.len()) * d);
    values.extend_from_slice(chunk.points.as_slice());
    let mut weights = vec![1.0; n];
    let fade = time_weight(chunk.index - state.last_index, policy);
    for center in &state.carried {
        values.extend_from_slice(&center.vector);
        weights.push(center.weight * fade);
    }
    Ok(WorkingSet {
        data: Dataset::new(values, d)?,
        weights: PointWeights::new(weights)?,
        chunk_points: n,
    })
}

/// `w_i = Σ_j u_ij · w_j`.
pub fn center_weights(u: &MembershipMatrix, weights: &PointWeights) -> fcm::Result<Vec<f64>> {
    if u.n() != weights.len() {
        return Err(FcmError::DimensionMismatch {
            expected: u.n(),
            found: weights.len(),
        });
    }
    let mut out = vec![0.0; u.c()];
    for (col, w) in u.columns().zip(weights.as_slice()) {
        for (acc, uij) in out.iter_mut().zip(col) {
            *acc += uij * w;
        }
    }
    Ok(out)
}

/// Seed for sampling the initial centers of chunk `index`.
pub fn chunk_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Everything produced by one WFCM step.
#[derive(Debug, Clone)]
pub struct ChunkStep {
    pub state: StreamState,
    pub result: FcmResult,
    pub report: ChunkReport,
    pub working_weight: f64,
}

/// One WFCM step. Warm-starts from the carried centers when there are exactly
/// `config.c` of them, otherwise samples the initial centers from the working set.
pub fn process_chunk(
    state: &StreamState,
    chunk: &Chunk,
    config: &FcmConfig,
    policy: &TimeWeightPolicy,
    rule: &ValidRule,
) -> Result<ChunkStep> {
    let ws = assemble_working_set(chunk, state, policy)?;
    let init = match state.carried_centroids() {
        Some(v) if v.c() == config.c => v,
        _ => init_centroids(&ws.data, config.c, chunk_seed(config.seed, chunk.index))?,
    };
    let result = run_weighted_fcm(&ws.data, &ws.weights, config, &init)?;
    let weights = center_weights(&result.memberships, &ws.weights)?;
    let next = state.advanced(chunk.index, &result.centroids, &weights);
    let report = evaluate_chunk(
        Algorithm::Wfcm,
        chunk,
        &ws,
        &result,
        rule,
        result.iterations,
        result.elapsed_seconds(),
    );
    Ok(ChunkStep {
        state: next,
        report,
        working_weight: ws.weights.total(),
        result,
    })
}

/// Owns the stream state for a WFCM run.
#[derive(Debug, Clone)]
pub struct Wfcm {
    pub config: FcmConfig,
    pub policy: TimeWeightPolicy,
    pub rule: ValidRule,
    state: StreamState,
}

impl Wfcm {
    pub fn new(config: FcmConfig, policy: TimeWeightPolicy, rule: ValidRule) -> Self {
        let state = StreamState::new(config.c);
        Self {
            config,
            policy,
            rule,
            state,
        }
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    /// Processes `chunk`; on error the state is left untouched.
    pub fn process(&mut self, chunk: &Chunk) -> Result<ChunkStep> {
        let step = process_chunk(&self.state, chunk, &self.config, &self.policy, &self.rule)?;
        self.state = step.state.clone();
        Ok(step)
    }
}
