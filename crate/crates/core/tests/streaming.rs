mod common;

use streamfuzz::adaptive::{AdaptiveError, NormMode};
use streamfuzz::fcm::Dataset;
use streamfuzz::metrics::ValidRule;
use streamfuzz::stream::{Chunk, StreamError};
use streamfuzz::synthetic::BlobStreamSpec;
use streamfuzz::{AcConfig, FcmConfig, TimeWeightPolicy, Wfcm, WfcmAc};

use common::blob_chunks;

fn engines(k: usize, norm: NormMode) -> (Wfcm, WfcmAc) {
    (
        Wfcm::new(FcmConfig::new(k), TimeWeightPolicy::default(), ValidRule::default()),
        WfcmAc::new(
            AcConfig::new(FcmConfig::new(k)),
            TimeWeightPolicy::default(),
            ValidRule::default(),
            norm,
        ),
    )
}

#[test]
fn stationary_stream_is_recovered_by_both() {
    let spec = BlobStreamSpec {
        points: 5000,
        seed: 21,
        ..Default::default()
    };
    for norm in [NormMode::Cumulative, NormMode::PerChunk] {
        let (mut wfcm, mut ac) = engines(5, norm);
        let mut wfcm_mae = Vec::new();
        for chunk in blob_chunks(&spec, 1000) {
            let a = wfcm.process(&chunk).unwrap().report;
            assert_eq!((a.k, a.valid_clusters), (5, 5));
            wfcm_mae.push(a.mae.unwrap());
            let b = ac.process(&chunk).unwrap().report;
            // this seed's first sampled start puts two centres in one blob;
            // WFCM-AC may take one chunk to merge and re-split
            if chunk.index > 1 {
                assert_eq!((b.k, b.valid_clusters, b.mae), (5, 5, Some(0.0)), "{norm:?}");
            }
        }
        // warm starts carry the bad partition forward for plain WFCM
        assert!(wfcm_mae.iter().all(|&e| e > 0.1), "{wfcm_mae:?}");
    }
}

#[test]
fn warm_start_converges_quickly_after_first_chunk() {
    let spec = BlobStreamSpec {
        points: 4000,
        seed: 5,
        ..Default::default()
    };
    let (mut wfcm, _) = engines(5, NormMode::Cumulative);
    let iterations: Vec<usize> = blob_chunks(&spec, 1000)
        .iter()
        .map(|c| wfcm.process(c).unwrap().report.iterations)
        .collect();
    assert!(iterations[1..].iter().all(|&i| i < iterations[0]), "{iterations:?}");
}

#[test]
fn failed_chunks_leave_state_untouched() {
    let spec = BlobStreamSpec {
        points: 2000,
        seed: 8,
        ..Default::default()
    };
    let chunks = blob_chunks(&spec, 1000);
    let (mut wfcm, mut ac) = engines(5, NormMode::Cumulative);
    wfcm.process(&chunks[1]).unwrap();
    ac.process(&chunks[1]).unwrap();
    let (ws, as_, stats) = (wfcm.state().clone(), ac.state().clone(), ac.stats().clone());

    // replayed or older index
    assert!(matches!(
        wfcm.process(&chunks[0]),
        Err(StreamError::OutOfOrder { index: 1, last: 2 })
    ));
    assert!(matches!(
        ac.process(&chunks[1]),
        Err(AdaptiveError::Stream(StreamError::OutOfOrder { .. }))
    ));
    // different dimension
    let wide = Chunk::new(9, Dataset::from_rows(&[[1.0, 2.0, 3.0]; 10]).unwrap());
    assert!(matches!(wfcm.process(&wide), Err(StreamError::SchemaDrift { expected: 2, found: 3 })));
    assert!(ac.process(&wide).is_err());
    // fewer points than clusters
    let tiny = Chunk::new(9, Dataset::from_rows(&[[1.0, 2.0]; 3]).unwrap());
    assert!(wfcm.process(&tiny).is_ok(), "carried centres make up the shortfall");

    assert_eq!(ac.state(), &as_);
    assert_eq!(ac.stats(), &stats);
    assert_ne!(wfcm.state(), &ws);
}

#[test]
fn skipped_indices_fade_history_by_gap() {
    let spec = BlobStreamSpec {
        points: 2000,
        seed: 13,
        ..Default::default()
    };
    let mut chunks = blob_chunks(&spec, 1000);
    let (mut wfcm, _) = engines(5, NormMode::Cumulative);
    wfcm.process(&chunks[0]).unwrap();
    let carried = wfcm.state().total_weight();
    chunks[1].index = 4;
    let step = wfcm.process(&chunks[1]).unwrap();
    let expected = 1000.0 + carried * (-0.1f64 * 3.0).exp();
    assert!((step.working_weight - expected).abs() < 1e-9);
}
