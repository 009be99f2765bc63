//! Benchmark harness: replays one chunked stream through WFCM and WFCM-AC at
//! several chunk sizes and writes per-chunk reports, per-size summaries and
//! plot files.
//!
//! Output files in the run directory:
//!
//! * `config.json`: the validated [`RunConfig`].
//! * `reports.csv`: one row per (chunk, algorithm). Holds only values that
//!   are a pure function of input, config and seed.
//! * `timings.csv`: the clustering wall time of every report row.
//! * `summary.csv`: per (chunk size, algorithm) aggregates.
//! * `{valid_clusters,mae,time}.dat` and matching `.svg` charts.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adaptive::{AcConfig, NormMode, WfcmAc};
use crate::fcm::FcmConfig;
use crate::ingest::{
    chunk_stream, open_input, scan_vocab, IngestError, IngestStats, KddReader, LabelMap,
    LabeledPoint,
};
use crate::metrics::{Algorithm, ChunkReport, ValidRule};
use crate::plot::{dat_text, svg_text, SeriesTable};
use crate::stream::{Chunk, TimeWeightPolicy, Wfcm};
use crate::synthetic::BlobStreamSpec;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("every chunk failed: {0}")]
    AllChunksFailed(String),
    #[error("output error: {0}")]
    Output(#[from] io::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Input(_) => 3,
            BenchError::AllChunksFailed(_) => 4,
            BenchError::Output(_) => 1,
        }
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Output(io::Error::other(e))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoChoice {
    Wfcm,
    WfcmAc,
    #[default]
    Both,
}

impl AlgoChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgoChoice::Wfcm => vec![Algorithm::Wfcm],
            AlgoChoice::WfcmAc => vec![Algorithm::WfcmAc],
            AlgoChoice::Both => vec![Algorithm::Wfcm, Algorithm::WfcmAc],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub synthetic: Option<BlobStreamSpec>,
    pub chunk_sizes: Vec<usize>,
    pub algorithms: AlgoChoice,
    pub k: usize,
    pub m: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub lambda: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub norm: NormMode,
    pub label_map: Option<PathBuf>,
    pub valid_rule: ValidRule,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            synthetic: None,
            chunk_sizes: vec![1000, 2000, 3000, 4000],
            algorithms: AlgoChoice::Both,
            k: 5,
            m: 2.0,
            epsilon: 1e-5,
            max_iter: 100,
            lambda: 0.1,
            k_min: 2,
            k_max: 10,
            seed: 0,
            out: PathBuf::from("results"),
            norm: NormMode::Cumulative,
            label_map: None,
            valid_rule: ValidRule::default(),
        }
    }
}

impl RunConfig {
    pub fn fcm_config(&self) -> FcmConfig {
        FcmConfig {
            c: self.k,
            m: self.m,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }

    pub fn ac_config(&self) -> AcConfig {
        AcConfig {
            k_min: self.k_min,
            k_max: self.k_max,
            ..AcConfig::new(self.fcm_config())
        }
    }

    pub fn policy(&self) -> TimeWeightPolicy {
        TimeWeightPolicy {
            lambda: self.lambda,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        match (&self.input, &self.synthetic) {
            (Some(_), Some(_)) => return fail("--input and --synthetic are exclusive".into()),
            (None, None) => return fail("one of --input or --synthetic is required".into()),
            (None, Some(spec)) => spec.validate().map_err(BenchError::Config)?,
            _ => {}
        }
        if self.chunk_sizes.is_empty() || self.chunk_sizes.contains(&0) {
            return fail("chunk sizes must be a non-empty list of positive integers".into());
        }
        let mut sorted = self.chunk_sizes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.chunk_sizes.len() {
            return fail("chunk sizes must be distinct".into());
        }
        self.fcm_config()
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        if TimeWeightPolicy::new(self.lambda).is_none() {
            return fail(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if let ValidRule::Index { threshold } = self.valid_rule {
            if threshold.is_nan() || threshold <= 0.0 {
                return fail("validity threshold must be positive".into());
            }
        }
        if self.algorithms.algorithms().contains(&Algorithm::WfcmAc) {
            self.ac_config()
                .validate()
                .map_err(|e| BenchError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// One successful report, tagged with its run's chunk size and the checksum
/// of the chunk it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub chunk_size: usize,
    pub report: ChunkReport,
    pub checksum: String,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub records: Vec<RunRecord>,
    /// `(chunk_size, algorithm, chunk_index, reason)` for every failed chunk.
    pub failures: Vec<(usize, Algorithm, usize, String)>,
    pub ingest: Vec<(usize, IngestStats)>,
    pub wall_seconds: f64,
}

/// First 8 bytes of the SHA-256 of the chunk's feature bits and labels, as hex.
pub fn chunk_checksum(chunk: &Chunk) -> String {
    let mut hasher = Sha256::new();
    hasher.update((chunk.points.d() as u64).to_le_bytes());
    for x in chunk.points.as_slice() {
        hasher.update(x.to_bits().to_le_bytes());
    }
    if let Some(labels) = &chunk.labels {
        for l in labels {
            hasher.update(l.map_or(u64::MAX, u64::from).to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

enum Source {
    File {
        path: PathBuf,
        vocab: Box<crate::ingest::Vocab>,
        labels: LabelMap,
    },
    Synthetic(BlobStreamSpec),
}

impl Source {
    fn prepare(config: &RunConfig) -> Result<Self, BenchError> {
        if let Some(spec) = &config.synthetic {
            return Ok(Source::Synthetic(spec.clone()));
        }
        let path = config.input.clone().expect("validated");
        let labels = match &config.label_map {
            Some(p) => LabelMap::from_path(p)
                .map_err(|e| BenchError::Config(format!("label map {}: {e}", p.display())))?,
            None => LabelMap::kdd_default(),
        };
        let reader = open_input(&path)
            .map_err(|e| BenchError::Input(format!("{}: {e}", path.display())))?;
        let vocab = scan_vocab(reader)
            .map_err(|e| BenchError::Input(format!("{}: {e}", path.display())))?;
        Ok(Source::File {
            path,
            vocab: Box::new(vocab),
            labels,
        })
    }

    /// A fresh pass over the stream.
    fn points(&self) -> Result<PointIter, BenchError> {
        match self {
            Source::Synthetic(spec) => Ok(PointIter::Synthetic(spec.stream())),
            Source::File {
                path,
                vocab,
                labels,
            } => {
                let reader = open_input(path)
                    .map_err(|e| BenchError::Input(format!("{}: {e}", path.display())))?;
                Ok(PointIter::File(KddReader::new(
                    reader,
                    (**vocab).clone(),
                    labels.clone(),
                )))
            }
        }
    }
}

enum PointIter {
    File(KddReader<Box<dyn io::BufRead>>),
    Synthetic(crate::synthetic::BlobStream),
}

impl Iterator for PointIter {
    type Item = LabeledPoint;

    fn next(&mut self) -> Option<LabeledPoint> {
        match self {
            PointIter::File(r) => r.next(),
            PointIter::Synthetic(s) => s.next(),
        }
    }
}

/// Runs every (chunk size × algorithm) combination, feeding each chunk to all
/// selected engines, then writes the output files.
pub fn run_benchmark(config: &RunConfig) -> Result<BenchOutcome, BenchError> {
    config.validate()?;
    let wall = Instant::now();
    fs::create_dir_all(&config.out)?;
    fs::write(
        config.out.join("config.json"),
        serde_json::to_string_pretty(config).map_err(io::Error::other)? + "\n",
    )?;

    let source = Source::prepare(config)?;
    let algorithms = config.algorithms.algorithms();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut ingest = Vec::new();
    let mut attempted: BTreeMap<(usize, Algorithm), usize> = BTreeMap::new();

    for &size in &config.chunk_sizes {
        let mut points = source.points()?;
        let mut wfcm = Wfcm::new(config.fcm_config(), config.policy(), config.valid_rule);
        let mut ac = WfcmAc::new(
            config.ac_config(),
            config.policy(),
            config.valid_rule,
            config.norm,
        );
        let chunks = chunk_stream(points.by_ref(), size)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        for chunk in chunks {
            let chunk = chunk.map_err(|e| BenchError::Input(e.to_string()))?;
            let checksum = chunk_checksum(&chunk);
            log::info!(
                "size {size} chunk {} ({} points) checksum {checksum}",
                chunk.index,
                chunk.len()
            );
            for &algo in &algorithms {
                *attempted.entry((size, algo)).or_default() += 1;
                let outcome = match algo {
                    Algorithm::Wfcm => wfcm.process(&chunk).map(|s| s.report).map_err(|e| e.to_string()),
                    Algorithm::WfcmAc => ac.process(&chunk).map(|s| s.report).map_err(|e| e.to_string()),
                };
                match outcome {
                    Ok(report) => {
                        log::debug!(
                            "{algo} size {size} chunk {}: k={} valid={} iters={}",
                            report.chunk_index,
                            report.k,
                            report.valid_clusters,
                            report.iterations
                        );
                        records.push(RunRecord {
                            chunk_size: size,
                            report,
                            checksum: checksum.clone(),
                        });
                    }
                    Err(reason) => {
                        log::warn!("{algo} size {size} chunk {} failed: {reason}", chunk.index);
                        failures.push((size, algo, chunk.index, reason));
                    }
                }
            }
        }
        if let PointIter::File(reader) = &mut points {
            if let Some(e) = reader.take_error() {
                return Err(BenchError::Input(e.to_string()));
            }
            let stats = reader.stats();
            log::info!(
                "size {size}: {} lines, {} malformed, {} unknown labels, {} unseen categories",
                stats.lines,
                stats.malformed,
                stats.unknown_labels,
                reader.vocab().unseen()
            );
            ingest.push((size, stats));
        }
    }

    write_reports(&config.out, &records)?;
    write_timings(&config.out, &records)?;
    let summaries = summarize(&records, &config.chunk_sizes, &algorithms, &attempted);
    write_summary(&config.out, &summaries)?;
    emit_plots(&summaries, &config.chunk_sizes, &algorithms, &config.out)?;

    let wall_seconds = wall.elapsed().as_secs_f64();
    log::info!("benchmark finished in {wall_seconds:.3} s");

    if records.is_empty() {
        return Err(BenchError::AllChunksFailed("no chunk produced a report".into()));
    }
    if let Some(((size, algo), n)) = attempted.iter().find(|(key, n)| {
        **n > 0 && !records.iter().any(|r| (r.chunk_size, r.report.algo) == **key)
    }) {
        return Err(BenchError::AllChunksFailed(format!(
            "{algo} at chunk size {size}: all {n} chunks failed"
        )));
    }

    Ok(BenchOutcome {
        records,
        failures,
        ingest,
        wall_seconds,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "chunk_index",
    "algo",
    "chunk_size",
    "k",
    "valid_clusters",
    "mae",
    "error_rate",
    "iterations",
    "objective",
    "chunk_checksum",
];

fn write_reports(dir: &Path, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(dir.join("reports.csv"))?;
    w.write_record(REPORT_COLUMNS)?;
    for r in records {
        let rep = &r.report;
        w.write_record([
            rep.chunk_index.to_string(),
            rep.algo.to_string(),
            r.chunk_size.to_string(),
            rep.k.to_string(),
            rep.valid_clusters.to_string(),
            opt(rep.mae),
            opt(rep.error_rate),
            rep.iterations.to_string(),
            rep.objective.to_string(),
            r.checksum.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_timings(dir: &Path, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(dir.join("timings.csv"))?;
    w.write_record(["chunk_index", "algo", "chunk_size", "elapsed_seconds"])?;
    for r in records {
        w.write_record([
            r.report.chunk_index.to_string(),
            r.report.algo.to_string(),
            r.chunk_size.to_string(),
            r.report.elapsed_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregates for one (chunk size, algorithm) run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub chunk_size: usize,
    pub algo: Algorithm,
    pub chunks: usize,
    pub failed_chunks: usize,
    pub total_valid_clusters: usize,
    pub mean_valid_clusters: Option<f64>,
    pub mean_mae: Option<f64>,
    pub mean_error_rate: Option<f64>,
    pub total_iterations: usize,
    pub total_elapsed_seconds: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(
    records: &[RunRecord],
    sizes: &[usize],
    algorithms: &[Algorithm],
    attempted: &BTreeMap<(usize, Algorithm), usize>,
) -> Vec<Summary> {
    let mut out = Vec::new();
    for &size in sizes {
        for &algo in algorithms {
            let reps: Vec<&ChunkReport> = records
                .iter()
                .filter(|r| r.chunk_size == size && r.report.algo == algo)
                .map(|r| &r.report)
                .collect();
            let tried = attempted.get(&(size, algo)).copied().unwrap_or(0);
            out.push(Summary {
                chunk_size: size,
                algo,
                chunks: reps.len(),
                failed_chunks: tried.saturating_sub(reps.len()),
                total_valid_clusters: reps.iter().map(|r| r.valid_clusters).sum(),
                mean_valid_clusters: mean(reps.iter().map(|r| r.valid_clusters as f64)),
                mean_mae: mean(reps.iter().filter_map(|r| r.mae)),
                mean_error_rate: mean(reps.iter().filter_map(|r| r.error_rate)),
                total_iterations: reps.iter().map(|r| r.iterations).sum(),
                total_elapsed_seconds: (!reps.is_empty())
                    .then(|| reps.iter().map(|r| r.elapsed_seconds).sum()),
            });
        }
    }
    out
}

fn write_summary(dir: &Path, summaries: &[Summary]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record([
        "chunk_size",
        "algo",
        "chunks",
        "failed_chunks",
        "total_valid_clusters",
        "mean_valid_clusters",
        "mean_mae",
        "mean_error_rate",
        "total_iterations",
        "total_elapsed_seconds",
    ])?;
    for s in summaries {
        w.write_record([
            s.chunk_size.to_string(),
            s.algo.to_string(),
            s.chunks.to_string(),
            s.failed_chunks.to_string(),
            s.total_valid_clusters.to_string(),
            opt(s.mean_valid_clusters),
            opt(s.mean_mae),
            opt(s.mean_error_rate),
            s.total_iterations.to_string(),
            opt(s.total_elapsed_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `valid_clusters`, `mae` and `time` as `.dat` and `.svg`, with chunk
/// size on the x axis and one series per algorithm.
pub fn emit_plots(
    summaries: &[Summary],
    sizes: &[usize],
    algorithms: &[Algorithm],
    dir: &Path,
) -> io::Result<()> {
    type Pick = fn(&Summary) -> Option<f64>;
    let metrics: [(&str, &str, &str, Pick); 3] = [
        ("valid_clusters", "Valid clusters per chunk", "mean valid clusters", |s| s.mean_valid_clusters),
        ("mae", "Mean absolute error", "mean MAE per chunk", |s| s.mean_mae),
        ("time", "Clustering iteration time", "total seconds", |s| s.total_elapsed_seconds),
    ];
    for (file, title, y_label, pick) in metrics {
        let series = algorithms
            .iter()
            .map(|&algo| {
                let values = sizes
                    .iter()
                    .map(|&size| {
                        summaries
                            .iter()
                            .find(|s| s.chunk_size == size && s.algo == algo)
                            .and_then(pick)
                    })
                    .collect();
                (algo.to_string(), values)
            })
            .collect();
        let table = SeriesTable {
            title: title.to_string(),
            y_label: y_label.to_string(),
            xs: sizes.to_vec(),
            series,
        };
        fs::write(dir.join(format!("{file}.dat")), dat_text(&table))?;
        fs::write(dir.join(format!("{file}.svg")), svg_text(&table))?;
    }
    Ok(())
}

impl From<IngestError> for BenchError {
    fn from(e: IngestError) -> Self {
        BenchError::Input(e.to_string())
    }
}
