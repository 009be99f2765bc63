//! Streaming fuzzy clustering.
//!
//! * [`fcm`]: batch weighted fuzzy c-means.
//! * [`stream`]: WFCM, chunked clustering with weighted centers carried
//!   between chunks and exponential fading of history.
//! * [`adaptive`]: WFCM-AC, which also standardises each chunk and searches
//!   `k ± 1` clusters per chunk with a validity index.
//! * [`metrics`]: MAE, valid-cluster counting and chunk reports.
//! * [`ingest`] and [`synthetic`]: KDD'99 CSV ingestion and seeded streams.
//! * [`bench`] and [`plot`]: the benchmark harness behind the CLI.

pub mod adaptive;
pub mod bench;
pub mod fcm;
pub mod ingest;
pub mod metrics;
pub mod plot;
pub mod stream;
pub mod synthetic;

pub use adaptive::{AcConfig, WfcmAc};
pub use fcm::{Centroids, Dataset, FcmConfig, FcmResult, MembershipMatrix, PointWeights};
pub use metrics::ChunkReport;
pub use stream::{Chunk, StreamState, TimeWeightPolicy, Wfcm};
