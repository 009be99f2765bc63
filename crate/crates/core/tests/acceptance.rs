//! Acceptance gate. Each test checks one criterion at its stated tolerance and
//! prints a single `PASS`/`FAIL` line.
//!
//! Runs without the libtest harness so the lines always appear in
//! `cargo test` output; exits non-zero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use streamfuzz::adaptive::{
    adapt_cluster_count, AcConfig, CandidateKind, NormMode, WfcmAc,
};
use streamfuzz::bench::{run_benchmark, RunConfig};
use streamfuzz::fcm::{init_centroids, run_weighted_fcm, Centroids, FcmConfig, PointWeights};
use streamfuzz::metrics::{mae, Algorithm, LabeledPrediction, ValidRule};
use streamfuzz::stream::{chunk_seed, Chunk, StreamState, TimeWeightPolicy, Wfcm};
use streamfuzz::synthetic::{BlobStreamSpec, KddSurrogate};

use common::*;

fn verdict(n: u32, ok: bool, detail: &str) {
    println!("{} criterion {n}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn column_sum_error(u: &streamfuzz::fcm::MembershipMatrix) -> f64 {
    u.columns()
        .map(|col| (col.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn criterion_1_fcm_matches_textbook_oracle() -> bool {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for case in 0..50u64 {
        let d = r.random_range(1..=8);
        let c = r.random_range(2..=6);
        let n = r.random_range(c.max(10)..=200);
        let x = random_rows(&mut r, n, d);
        let data = dataset(&x);
        let config = FcmConfig {
            seed: case,
            ..FcmConfig::new(c)
        };
        let init = init_centroids(&data, c, case).unwrap();
        let got = run_weighted_fcm(&data, &PointWeights::unit(n), &config, &init).unwrap();
        let want = fcm(&x, &vec![1.0; n], &centers_of(&init), 2.0, 1e-5, 100).unwrap();
        for (a, b) in got.centroids.rows().zip(&want.v) {
            for (p, q) in a.iter().zip(b) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-6 && secs < 10.0;
    verdict(
        1,
        ok,
        &format!("50 datasets, max centroid deviation {worst:.3e} (tol 1e-6), {secs:.2} s (limit 10 s)"),
    );
    ok
}

fn criterion_2_objective_never_increases() -> bool {
    let mut r = rng(202);
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..200u64 {
        let d = r.random_range(1..=5);
        let c = r.random_range(2..=5);
        let n = r.random_range(c + 5..=120);
        let x = random_rows(&mut r, n, d);
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
        let data = dataset(&x);
        let config = FcmConfig {
            epsilon: 1e-12,
            seed,
            ..FcmConfig::new(c)
        };
        let init = init_centroids(&data, c, seed).unwrap();
        let fit = run_weighted_fcm(&data, &PointWeights::new(w).unwrap(), &config, &init).unwrap();
        for pair in fit.objective_history.windows(2) {
            worst = worst.max(pair[1] - pair[0]);
        }
    }
    let ok = worst <= 1e-9;
    verdict(2, ok, &format!("200 runs, largest objective rise {worst:.3e} (slack 1e-9)"));
    ok
}

fn criterion_3_membership_columns_sum_to_one() -> bool {
    let mut r = rng(303);
    let mut worst = 0.0f64;
    let mut matrices = 0;
    for seed in 0..100u64 {
        let d = r.random_range(1..=6);
        let c = r.random_range(2..=7);
        let n = r.random_range(c..=150);
        let x = random_rows(&mut r, n, d);
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.0..2.0) + 0.01).collect();
        let data = dataset(&x);
        let init = init_centroids(&data, c, seed).unwrap();
        let fit = run_weighted_fcm(
            &data,
            &PointWeights::new(w).unwrap(),
            &FcmConfig::new(c),
            &init,
        )
        .unwrap();
        worst = worst.max(column_sum_error(&fit.memberships));
        matrices += 1;
    }
    let spec = BlobStreamSpec {
        points: 3000,
        birth: Some(1500),
        seed: 3,
        ..Default::default()
    };
    let mut wfcm = Wfcm::new(FcmConfig::new(5), TimeWeightPolicy::default(), ValidRule::default());
    let mut ac = WfcmAc::new(
        AcConfig::new(FcmConfig::new(5)),
        TimeWeightPolicy::default(),
        ValidRule::default(),
        NormMode::Cumulative,
    );
    for chunk in blob_chunks(&spec, 500) {
        worst = worst.max(column_sum_error(&wfcm.process(&chunk).unwrap().result.memberships));
        let step = ac.process(&chunk).unwrap();
        worst = worst.max(column_sum_error(&step.winner.result.unwrap().memberships));
        matrices += 2;
    }
    let ok = worst <= 1e-9;
    verdict(3, ok, &format!("{matrices} membership matrices, max |column sum - 1| {worst:.3e} (tol 1e-9)"));
    ok
}

fn criterion_4_center_weights_conserve_working_weight() -> bool {
    let mut worst = 0.0f64;
    let mut steps = 0;
    for seed in 0..3 {
        let spec = BlobStreamSpec {
            points: 4000,
            drift: 0.002,
            birth: Some(2000),
            seed,
            ..Default::default()
        };
        let policy = TimeWeightPolicy::new(0.3).unwrap();
        let mut wfcm = Wfcm::new(FcmConfig::new(5), policy, ValidRule::default());
        let mut ac = WfcmAc::new(
            AcConfig::new(FcmConfig::new(5)),
            policy,
            ValidRule::default(),
            NormMode::Cumulative,
        );
        for chunk in blob_chunks(&spec, 400) {
            let a = wfcm.process(&chunk).unwrap();
            worst = worst.max((a.state.total_weight() - a.working_weight).abs());
            let b = ac.process(&chunk).unwrap();
            worst = worst.max((b.state.total_weight() - b.working_weight).abs());
            steps += 2;
        }
    }
    let ok = worst <= 1e-9;
    verdict(4, ok, &format!("{steps} chunk steps, max |carried - working weight| {worst:.3e} (tol 1e-9)"));
    ok
}

fn criterion_5_mae_matches_brute_force() -> bool {
    let mut r = rng(505);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = r.random_range(1..=1000);
        let f: Vec<u32> = (0..n).map(|_| r.random_range(0..5)).collect();
        let y: Vec<u32> = (0..n).map(|_| r.random_range(0..5)).collect();
        let got = mae(&LabeledPrediction::new(f.clone(), y.clone()).unwrap()).unwrap();
        if got != common::mae(&f, &y) {
            mismatches += 1;
        }
    }
    let ok = mismatches == 0;
    verdict(5, ok, &format!("100 random code vectors, {mismatches} inexact results"));
    ok
}

fn kind_label(kind: CandidateKind, k: usize) -> usize {
    match kind {
        CandidateKind::Keep => 0,
        CandidateKind::Merge(i) => 1 + i,
        CandidateKind::Split(t) => 1 + k + t,
    }
}

/// One small fixture: a chunk plus a state, cold or warm.
struct Fixture {
    chunk: Chunk,
    state: StreamState,
    k: usize,
}

fn small_fixtures() -> Vec<Fixture> {
    let mut r = rng(606);
    let mut out = Vec::new();
    for seed in 0..40u64 {
        let blobs = r.random_range(2..=5);
        let dim = r.random_range(1..=3);
        let n = r.random_range(20..=60);
        let spec = BlobStreamSpec {
            blobs,
            dim,
            points: n,
            spread: r.random_range(0.3..2.0),
            separation: 6.0,
            seed,
            ..Default::default()
        };
        let k = r.random_range(2..=5);
        let index = r.random_range(1..=3);
        let mut chunk = blob_chunks(&spec, n).remove(0);
        chunk.index = index;
        let state = if seed % 2 == 0 {
            StreamState::new(k)
        } else {
            // warm start from k perturbed blob centres, folded at chunk 0
            let centres = spec.stream().centers_at(0);
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|i| {
                    centres[i % centres.len()]
                        .iter()
                        .map(|c| c + r.random_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            let weights: Vec<f64> = (0..k).map(|_| r.random_range(1.0..20.0)).collect();
            StreamState::new(k).advanced(0, &Centroids::from_rows(&rows).unwrap(), &weights)
        };
        out.push(Fixture { chunk, state, k });
    }
    out
}

fn criterion_6_candidate_search_and_drift() -> bool {
    let policy = TimeWeightPolicy::default();
    let mut disagreements = Vec::new();
    let mut by_kind = [0usize; 3];
    let fixtures = small_fixtures();
    for (n, fx) in fixtures.iter().enumerate() {
        let config = AcConfig {
            k_min: 2,
            k_max: 6,
            ..AcConfig::new(FcmConfig {
                seed: n as u64,
                ..FcmConfig::new(fx.k)
            })
        };
        let step = adapt_cluster_count(&fx.state, &fx.chunk, &config, &policy, &ValidRule::default())
            .unwrap();

        // independent reconstruction of the working set
        let mut x = rows_of(&fx.chunk.points);
        let mut w = vec![1.0; x.len()];
        let age = (fx.chunk.index - fx.state.last_index) as f64;
        for c in &fx.state.carried {
            x.push(c.vector.clone());
            w.push(c.weight * (-policy.lambda * age).exp());
        }
        let keep_init = match fx.state.carried_centroids() {
            Some(v) => centers_of(&v),
            None => centers_of(
                &init_centroids(&dataset(&x), fx.k, chunk_seed(n as u64, fx.chunk.index)).unwrap(),
            ),
        };
        let oracle = brute_force_search(&x, &w, &keep_init, 2, 6, 2.0, 1e-5, 100);
        by_kind[match step.winner.kind {
            CandidateKind::Keep => 0,
            CandidateKind::Merge(_) => 1,
            CandidateKind::Split(_) => 2,
        }] += 1;
        let got = kind_label(step.winner.kind, fx.k);
        if got != oracle.winner || step.state.k != oracle.winner_k {
            disagreements.push((n, step.winner.kind, oracle.winner));
        }
    }

    // 5 -> 6 blobs: the sixth blob starts at point 4000, the first point of chunk 5
    let mut drift_ok = true;
    let mut trace = Vec::new();
    for seed in [1u64, 2, 3] {
        let spec = BlobStreamSpec {
            points: 8000,
            birth: Some(4000),
            seed,
            ..Default::default()
        };
        let mut wfcm = Wfcm::new(FcmConfig::new(5), policy, ValidRule::default());
        let mut ac = WfcmAc::new(
            AcConfig::new(FcmConfig::new(5)),
            policy,
            ValidRule::default(),
            NormMode::Cumulative,
        );
        let mut ac_k = Vec::new();
        let mut wfcm_k = Vec::new();
        for chunk in blob_chunks(&spec, 1000) {
            ac_k.push(ac.process(&chunk).unwrap().state.k);
            wfcm_k.push(wfcm.process(&chunk).unwrap().state.k);
        }
        let before = ac_k[3] == 5;
        let raised = ac_k[4] == 6 || ac_k[5] == 6;
        let flat = wfcm_k.iter().all(|&k| k == 5);
        drift_ok &= before && raised && flat;
        trace.push(format!("seed {seed}: ac k {ac_k:?}"));
    }

    let ok = disagreements.is_empty() && drift_ok;
    verdict(
        6,
        ok,
        &format!(
            "{} small fixtures (keep/merge/split winners {:?}), {} winner mismatches; drift stream WFCM-AC 5->6 within 2 chunks and WFCM fixed at 5: {} ({})",
            fixtures.len(),
            by_kind,
            disagreements.len(),
            drift_ok,
            trace.join("; ")
        ),
    );
    if !disagreements.is_empty() {
        println!("  mismatches (fixture, library winner, oracle label): {disagreements:?}");
    }
    ok
}

fn temp_out(name: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join(name);
    (dir, out)
}

fn criterion_7_same_number_of_valid_clusters() -> bool {
    let (_dir, out) = temp_out("blobs");
    let config = RunConfig {
        synthetic: Some(BlobStreamSpec {
            points: 12_000,
            seed: 7,
            ..Default::default()
        }),
        out,
        ..Default::default()
    };
    let outcome = run_benchmark(&config).unwrap();
    let mut off = Vec::new();
    for size in [1000, 2000, 3000, 4000] {
        for algo in [Algorithm::Wfcm, Algorithm::WfcmAc] {
            let counts: Vec<usize> = outcome
                .records
                .iter()
                .filter(|r| r.chunk_size == size && r.report.algo == algo)
                .map(|r| r.report.valid_clusters)
                .collect();
            if counts.is_empty() || counts.iter().any(|&c| c != 5) {
                off.push(format!("{algo}@{size}: {counts:?}"));
            }
        }
    }
    let ok = off.is_empty() && outcome.failures.is_empty();
    verdict(
        7,
        ok,
        &format!(
            "5-blob stream, sizes 1000-4000, both algorithms 5 valid clusters on every chunk; deviations {off:?}"
        ),
    );
    ok
}

fn criterion_8_kdd_runtime_and_timing_order() -> bool {
    let (dir, out) = temp_out("kdd");
    let (input, source) = match std::env::var_os("STREAMFUZZ_KDD") {
        Some(path) => (PathBuf::from(path), "KDD'99 10% subset"),
        None => {
            let path = dir.path().join("kdd_surrogate.csv");
            let lines: Vec<String> = KddSurrogate::new(20_000, 8).collect();
            std::fs::write(&path, lines.join("\n") + "\n").unwrap();
            (path, "KDD-format surrogate (set STREAMFUZZ_KDD to use the real file)")
        }
    };
    let first_20k = dir.path().join("first_20k.csv");
    {
        use std::io::{BufRead, Write};
        let reader = streamfuzz::ingest::open_input(&input).unwrap();
        let mut w = std::io::BufWriter::new(std::fs::File::create(&first_20k).unwrap());
        for line in reader.lines().take(20_000) {
            writeln!(w, "{}", line.unwrap()).unwrap();
        }
    }
    let config = RunConfig {
        input: Some(first_20k),
        out,
        ..Default::default()
    };
    let start = Instant::now();
    let outcome = run_benchmark(&config);
    let secs = start.elapsed().as_secs_f64();
    let outcome = outcome.unwrap();
    let total = |algo: Algorithm| -> f64 {
        outcome
            .records
            .iter()
            .filter(|r| r.report.algo == algo)
            .map(|r| r.report.elapsed_seconds)
            .sum()
    };
    let (t_wfcm, t_ac) = (total(Algorithm::Wfcm), total(Algorithm::WfcmAc));
    let complete = [1000, 2000, 3000, 4000].iter().all(|size| {
        [Algorithm::Wfcm, Algorithm::WfcmAc].iter().all(|algo| {
            outcome
                .records
                .iter()
                .any(|r| r.chunk_size == *size && r.report.algo == *algo)
        })
    });
    let ok = complete && outcome.failures.is_empty() && secs < 300.0;
    verdict(
        8,
        ok,
        &format!(
            "{source}: 20000 records x 4 chunk sizes in {secs:.1} s (limit 300 s); iteration time wfcm {t_wfcm:.2} s, wfcm-ac {t_ac:.2} s; WFCM-AC faster: {} (reported, not asserted)",
            t_ac < t_wfcm
        ),
    );
    ok
}

fn criterion_9_reports_are_byte_identical() -> bool {
    let run = |name: &str| {
        let (dir, out) = temp_out(name);
        let config = RunConfig {
            synthetic: Some(BlobStreamSpec {
                points: 6000,
                drift: 0.001,
                birth: Some(3000),
                seed: 9,
                ..Default::default()
            }),
            out: out.clone(),
            ..Default::default()
        };
        run_benchmark(&config).unwrap();
        let bytes = std::fs::read(out.join("reports.csv")).unwrap();
        drop(dir);
        bytes
    };
    let (a, b) = (run("a"), run("b"));
    let ok = a == b && !a.is_empty();
    verdict(9, ok, &format!("two runs, reports.csv {} bytes, identical: {}", a.len(), a == b));
    ok
}

fn main() {
    let criteria: [(u32, fn() -> bool); 9] = [
        (1, criterion_1_fcm_matches_textbook_oracle),
        (2, criterion_2_objective_never_increases),
        (3, criterion_3_membership_columns_sum_to_one),
        (4, criterion_4_center_weights_conserve_working_weight),
        (5, criterion_5_mae_matches_brute_force),
        (6, criterion_6_candidate_search_and_drift),
        (7, criterion_7_same_number_of_valid_clusters),
        (8, criterion_8_kdd_runtime_and_timing_order),
        (9, criterion_9_reports_are_byte_identical),
    ];
    let mut failed = Vec::new();
    for (n, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(true) => {}
            Ok(false) => failed.push(n),
            Err(_) => {
                verdict(n, false, "panicked");
                failed.push(n);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
