//! Evaluation: mean absolute error over class codes, cluster-to-class
//! mapping, valid-cluster counting and per-chunk reports.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcm::{self, Centroids, Dataset, FcmResult, MembershipMatrix, PointWeights};
use crate::stream::{Chunk, WorkingSet};

pub type ClassCode = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("shape error: {f} predictions for {y} true values")]
    Shape { f: usize, y: usize },
    #[error("empty input")]
    Empty,
    #[error("mapping gap: cluster {0} has no class")]
    MappingGap(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPrediction {
    pub f: Vec<ClassCode>,
    pub y: Vec<ClassCode>,
}

impl LabeledPrediction {
    pub fn new(f: Vec<ClassCode>, y: Vec<ClassCode>) -> Result<Self, MetricsError> {
        if f.len() != y.len() {
            return Err(MetricsError::Shape {
                f: f.len(),
                y: y.len(),
            });
        }
        Ok(Self { f, y })
    }
}

/// `(1/n) Σ |f_i − y_i|` over integer class codes.
pub fn mae(p: &LabeledPrediction) -> Result<f64, MetricsError> {
    if p.f.len() != p.y.len() {
        return Err(MetricsError::Shape {
            f: p.f.len(),
            y: p.y.len(),
        });
    }
    if p.f.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: u64 = p
        .f
        .iter()
        .zip(&p.y)
        .map(|(f, y)| u64::from(f.abs_diff(*y)))
        .sum();
    Ok(total as f64 / p.f.len() as f64)
}

/// Fraction of positions where `f` and `y` disagree.
pub fn error_rate(p: &LabeledPrediction) -> Result<f64, MetricsError> {
    if p.f.is_empty() {
        return Err(MetricsError::Empty);
    }
    let wrong = p.f.iter().zip(&p.y).filter(|(f, y)| f != y).count();
    Ok(wrong as f64 / p.f.len() as f64)
}

/// Class assigned to each cluster, indexed by cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMapping(pub Vec<ClassCode>);

impl ClusterMapping {
    pub fn class_of(&self, cluster: usize) -> Option<ClassCode> {
        self.0.get(cluster).copied()
    }
}

/// Crisp predictions: each point takes the class of its highest-membership
/// cluster (lowest index on ties).
pub fn assign_predictions(
    u: &MembershipMatrix,
    mapping: &ClusterMapping,
    point_labels: &[ClassCode],
) -> Result<LabeledPrediction, MetricsError> {
    if u.n() != point_labels.len() {
        return Err(MetricsError::Shape {
            f: u.n(),
            y: point_labels.len(),
        });
    }
    let f = u
        .crisp_assignments()
        .into_iter()
        .map(|cluster| mapping.class_of(cluster).ok_or(MetricsError::MappingGap(cluster)))
        .collect::<Result<Vec<_>, _>>()?;
    LabeledPrediction::new(f, point_labels.to_vec())
}

fn majority(counts: &std::collections::BTreeMap<ClassCode, usize>) -> Option<ClassCode> {
    // BTreeMap iterates in ascending code order, so strict `>` keeps the lowest code on ties.
    let mut best: Option<(ClassCode, usize)> = None;
    for (&code, &count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((code, count));
        }
    }
    best.map(|(code, _)| code)
}

/// Maps each cluster to the most frequent true class among its crisp members.
/// Empty clusters take the global majority class.
pub fn majority_mapping(u: &MembershipMatrix, true_labels: &[ClassCode]) -> ClusterMapping {
    use std::collections::BTreeMap;
    let mut per_cluster = vec![BTreeMap::new(); u.c()];
    let mut global = BTreeMap::new();
    for (cluster, label) in u.crisp_assignments().into_iter().zip(true_labels) {
        *per_cluster[cluster].entry(*label).or_insert(0usize) += 1;
        *global.entry(*label).or_insert(0usize) += 1;
    }
    let fallback = majority(&global).unwrap_or(0);
    ClusterMapping(
        per_cluster
            .iter()
            .map(|counts| majority(counts).unwrap_or(fallback))
            .collect(),
    )
}

/// Per-cluster support: summed weight of the points crisply assigned to it.
pub fn cluster_support(u: &MembershipMatrix, weights: &PointWeights) -> Vec<f64> {
    let mut support = vec![0.0; u.c()];
    for (cluster, w) in u.crisp_assignments().into_iter().zip(weights.as_slice()) {
        support[cluster] += w;
    }
    support
}

/// Clusters whose crisp support reaches `min_support`. With unit weights the
/// support is the number of assigned points.
pub fn count_valid_clusters(result: &FcmResult, weights: &PointWeights, min_support: usize) -> usize {
    let min_support = min_support.max(1) as f64;
    cluster_support(&result.memberships, weights)
        .into_iter()
        .filter(|s| *s >= min_support)
        .count()
}

/// Per-cluster Xie–Beni ratio: weighted mean squared spread of the cluster
/// over the squared distance to its nearest other center. A cluster is valid
/// when the ratio is at most `threshold`. With a single cluster the
/// separation is undefined and the cluster counts as valid.
pub fn count_valid_clusters_by_index(
    data: &Dataset,
    u: &MembershipMatrix,
    v: &Centroids,
    weights: &PointWeights,
    threshold: f64,
) -> usize {
    (0..v.c())
        .filter(|&i| {
            let separation = (0..v.c())
                .filter(|&p| p != i)
                .map(|p| fcm::sq_dist(v.row(i), v.row(p)))
                .fold(f64::INFINITY, f64::min);
            let (mut num, mut den) = (0.0, 0.0);
            for (j, x) in data.rows().enumerate() {
                let coef = weights.as_slice()[j] * u.get(i, j).powi(2);
                num += coef * fcm::sq_dist(x, v.row(i));
                den += coef;
            }
            if den == 0.0 {
                return false;
            }
            separation.is_infinite() || (separation > 0.0 && num / den / separation <= threshold)
        })
        .count()
}

/// How a cluster is judged valid in a chunk report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum ValidRule {
    /// At least `min_support` chunk points crisply assigned. `None` means
    /// `max(2, ceil(0.5% of the chunk))`.
    Support { min_support: Option<usize> },
    /// Per-cluster Xie–Beni ratio at most `threshold`.
    Index { threshold: f64 },
}

impl Default for ValidRule {
    fn default() -> Self {
        Self::Support { min_support: None }
    }
}

pub fn default_min_support(chunk_points: usize) -> usize {
    ((chunk_points as f64 * 0.005).ceil() as usize).max(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "wfcm")]
    Wfcm,
    #[serde(rename = "wfcm-ac")]
    WfcmAc,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Wfcm => "wfcm",
            Algorithm::WfcmAc => "wfcm-ac",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Metrics for one processed chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkReport {
    pub chunk_index: usize,
    pub algo: Algorithm,
    pub points: usize,
    pub k: usize,
    pub valid_clusters: usize,
    /// `None` when the chunk carries no known labels.
    pub mae: Option<f64>,
    pub error_rate: Option<f64>,
    /// Total FCM iterations spent on the chunk, summed over every refit.
    pub iterations: usize,
    pub elapsed_seconds: f64,
    pub objective: f64,
}

/// Scores the chunk's own points (the leading rows of the working set)
/// under `result`.
pub(crate) fn evaluate_chunk(
    algo: Algorithm,
    chunk: &Chunk,
    ws: &WorkingSet,
    result: &FcmResult,
    rule: &ValidRule,
    iterations: usize,
    elapsed_seconds: f64,
) -> ChunkReport {
    let n = ws.chunk_points;
    let k = result.centroids.c();
    let mut support_weights = vec![0.0; ws.data.n()];
    support_weights[..n].iter_mut().for_each(|w| *w = 1.0);
    let support_weights =
        PointWeights::new(support_weights).expect("chunk has at least one point");

    let valid_clusters = match rule {
        ValidRule::Support { min_support } => count_valid_clusters(
            result,
            &support_weights,
            min_support.unwrap_or_else(|| default_min_support(n)),
        ),
        ValidRule::Index { threshold } => count_valid_clusters_by_index(
            &ws.data,
            &result.memberships,
            &result.centroids,
            &support_weights,
            *threshold,
        ),
    };

    let (mae_value, error_value) = match labelled_prediction(chunk, &result.memberships) {
        Some(p) => (mae(&p).ok(), error_rate(&p).ok()),
        None => (None, None),
    };

    ChunkReport {
        chunk_index: chunk.index,
        algo,
        points: n,
        k,
        valid_clusters,
        mae: mae_value,
        error_rate: error_value,
        iterations,
        elapsed_seconds,
        objective: result.objective(),
    }
}

/// Predictions for the chunk's points with known labels, using a
/// majority mapping fitted on those same points.
fn labelled_prediction(chunk: &Chunk, u: &MembershipMatrix) -> Option<LabeledPrediction> {
    let labels = chunk.labels.as_ref()?;
    let (idx, known): (Vec<usize>, Vec<ClassCode>) = labels
        .iter()
        .enumerate()
        .filter_map(|(j, l)| l.map(|l| (j, l)))
        .unzip();
    if idx.is_empty() {
        return None;
    }
    let columns: Vec<&[f64]> = idx.iter().map(|&j| u.column(j)).collect();
    let sub = MembershipMatrix::from_columns(&columns).ok()?;
    let mapping = majority_mapping(&sub, &known);
    assign_predictions(&sub, &mapping, &known).ok()
}
