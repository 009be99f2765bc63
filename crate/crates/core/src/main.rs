use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use streamfuzz::adaptive::NormMode;
use streamfuzz::bench::{run_benchmark, AlgoChoice, RunConfig};
use streamfuzz::metrics::ValidRule;
use streamfuzz::synthetic::BlobStreamSpec;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Wfcm,
    WfcmAc,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    Cumulative,
    PerChunk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ValidRuleArg {
    Support,
    Index,
}

/// Replay a labelled stream in chunks through WFCM and WFCM-AC and write
/// comparison reports and plots.
#[derive(Debug, Parser)]
#[command(name = "streamfuzz", version)]
struct Cli {
    /// KDD'99-format CSV (optionally gzip-compressed).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    /// Generate a blob stream instead, e.g. `blobs=5,dim=2,n=12000,seed=1`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long = "chunk-size", value_delimiter = ',', default_value = "1000,2000,3000,4000")]
    chunk_sizes: Vec<usize>,
    #[arg(long, value_enum, default_value = "both")]
    algo: AlgoArg,
    /// Initial number of clusters.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Fuzzifier.
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    /// Per-chunk fading rate of carried centers.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long = "k-min", default_value_t = 2)]
    k_min: usize,
    /// Defaults to twice --k.
    #[arg(long = "k-max")]
    k_max: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "cumulative")]
    norm: NormArg,
    /// Two-column CSV mapping attack names to classes.
    #[arg(long = "label-map")]
    label_map: Option<PathBuf>,
    /// How clusters are judged valid in reports.
    #[arg(long = "valid-rule", value_enum, default_value = "support")]
    valid_rule: ValidRuleArg,
    /// Support threshold; defaults to max(2, 0.5% of the chunk).
    #[arg(long = "min-support")]
    min_support: Option<usize>,
    /// Per-cluster Xie-Beni ratio threshold for `--valid-rule index`.
    #[arg(long = "validity-threshold", default_value_t = 1.0)]
    validity_threshold: f64,
}

impl Cli {
    fn into_config(self) -> Result<RunConfig, String> {
        let synthetic = self
            .synthetic
            .as_deref()
            .map(str::parse::<BlobStreamSpec>)
            .transpose()?;
        Ok(RunConfig {
            input: self.input,
            synthetic,
            chunk_sizes: self.chunk_sizes,
            algorithms: match self.algo {
                AlgoArg::Wfcm => AlgoChoice::Wfcm,
                AlgoArg::WfcmAc => AlgoChoice::WfcmAc,
                AlgoArg::Both => AlgoChoice::Both,
            },
            k: self.k,
            m: self.m,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            lambda: self.lambda,
            k_min: self.k_min,
            k_max: self.k_max.unwrap_or(2 * self.k),
            seed: self.seed,
            out: self.out,
            norm: match self.norm {
                NormArg::Cumulative => NormMode::Cumulative,
                NormArg::PerChunk => NormMode::PerChunk,
            },
            label_map: self.label_map,
            valid_rule: match self.valid_rule {
                ValidRuleArg::Support => ValidRule::Support {
                    min_support: self.min_support,
                },
                ValidRuleArg::Index => ValidRule::Index {
                    threshold: self.validity_threshold,
                },
            },
        })
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("STREAMFUZZ_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .map_err(|_| format!("STREAMFUZZ_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = match configure_threads().and_then(|_| cli.into_config()) {
        Ok(c) => c,
        Err(e) => {
            log::error!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_benchmark(&config) {
        Ok(outcome) => {
            log::info!(
                "{} reports, {} failed chunks, wrote {}",
                outcome.records.len(),
                outcome.failures.len(),
                config.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
