//! Seeded synthetic streams: Gaussian blobs with optional drift and a late
//! blob, plus a generator of KDD'99-formatted text records.

use std::fmt;
use std::str::FromStr;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ingest::LabeledPoint;

/// Parameters of a blob stream, written as `key=value` pairs separated by
/// commas, e.g. `blobs=5,dim=2,n=12000,spread=0.5,sep=10,birth=6000,seed=3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobStreamSpec {
    pub blobs: usize,
    pub dim: usize,
    pub points: usize,
    /// Per-coordinate standard deviation of each blob.
    pub spread: f64,
    /// Minimum distance between blob centers.
    pub separation: f64,
    /// Distance every center moves per emitted point.
    pub drift: f64,
    /// Record index from which one extra blob starts emitting.
    pub birth: Option<usize>,
    pub seed: u64,
}

impl Default for BlobStreamSpec {
    fn default() -> Self {
        Self {
            blobs: 5,
            dim: 2,
            points: 12_000,
            spread: 0.5,
            separation: 10.0,
            drift: 0.0,
            birth: None,
            seed: 0,
        }
    }
}

impl FromStr for BlobStreamSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut spec = Self::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let bad = |e: &dyn fmt::Display| format!("{key}: {e}");
            match key.trim() {
                "blobs" => spec.blobs = value.parse().map_err(|e| bad(&e))?,
                "dim" => spec.dim = value.parse().map_err(|e| bad(&e))?,
                "n" | "points" => spec.points = value.parse().map_err(|e| bad(&e))?,
                "spread" => spec.spread = value.parse().map_err(|e| bad(&e))?,
                "sep" | "separation" => spec.separation = value.parse().map_err(|e| bad(&e))?,
                "drift" => spec.drift = value.parse().map_err(|e| bad(&e))?,
                "birth" => spec.birth = Some(value.parse().map_err(|e| bad(&e))?),
                "seed" => spec.seed = value.parse().map_err(|e| bad(&e))?,
                other => return Err(format!("unknown key {other:?}")),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl BlobStreamSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.blobs == 0 || self.dim == 0 {
            return Err("blobs and dim must be at least 1".into());
        }
        if !(self.spread >= 0.0 && self.separation >= 0.0 && self.drift.is_finite()) {
            return Err("spread and sep must be nonnegative, drift finite".into());
        }
        Ok(())
    }

    /// Total blob count including the late one.
    pub fn total_blobs(&self) -> usize {
        self.blobs + usize::from(self.birth.is_some())
    }

    pub fn stream(&self) -> BlobStream {
        BlobStream::new(self.clone())
    }
}

/// Iterator over the points of a [`BlobStreamSpec`]. Labels are blob indices.
#[derive(Debug, Clone)]
pub struct BlobStream {
    spec: BlobStreamSpec,
    rng: ChaCha8Rng,
    centers: Vec<Vec<f64>>,
    velocity: Vec<Vec<f64>>,
    emitted: usize,
}

impl BlobStream {
    pub fn new(spec: BlobStreamSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let total = spec.total_blobs();
        let half_width = spec.separation * (total as f64).max(2.0) / 2.0;
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(total);
        let mut attempts = 0;
        while centers.len() < total {
            let candidate: Vec<f64> = (0..spec.dim)
                .map(|_| rng.random_range(-half_width..=half_width))
                .collect();
            attempts += 1;
            let clear = centers.iter().all(|c| {
                crate::fcm::sq_dist(c, &candidate).sqrt() >= spec.separation
            });
            if clear || attempts > 10_000 {
                centers.push(candidate);
                attempts = 0;
            }
        }
        let velocity = (0..total)
            .map(|_| {
                let v: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect();
        Self {
            spec,
            rng,
            centers,
            velocity,
            emitted: 0,
        }
    }

    /// Blob centers at stream position `t`.
    pub fn centers_at(&self, t: usize) -> Vec<Vec<f64>> {
        self.centers
            .iter()
            .zip(&self.velocity)
            .map(|(c, v)| {
                c.iter()
                    .zip(v)
                    .map(|(ci, vi)| ci + self.spec.drift * t as f64 * vi)
                    .collect()
            })
            .collect()
    }
}

impl Iterator for BlobStream {
    type Item = LabeledPoint;

    fn next(&mut self) -> Option<LabeledPoint> {
        if self.emitted >= self.spec.points {
            return None;
        }
        let t = self.emitted;
        self.emitted += 1;
        let active = match self.spec.birth {
            Some(birth) if t >= birth => self.spec.blobs + 1,
            _ => self.spec.blobs,
        };
        let blob = self.rng.random_range(0..active);
        let noise = Normal::new(0.0, self.spec.spread).expect("spread validated");
        let features = self.centers[blob]
            .iter()
            .zip(&self.velocity[blob])
            .map(|(c, v)| c + self.spec.drift * t as f64 * v + noise.sample(&mut self.rng))
            .collect();
        Some(LabeledPoint {
            features,
            label: Some(blob as u32),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.points - self.emitted;
        (left, Some(left))
    }
}

struct TrafficProfile {
    label: &'static str,
    /// Relative frequency.
    share: f64,
    protocol: &'static str,
    services: &'static [&'static str],
    flag: &'static str,
    src_bytes: (f64, f64),
    dst_bytes: (f64, f64),
    count: (f64, f64),
    serror: f64,
    rerror: f64,
    same_srv: f64,
    logged_in: bool,
}

// Roughly the class mix and typical field values of the 10% training subset.
const PROFILES: &[TrafficProfile] = &[
    TrafficProfile { label: "smurf", share: 0.568, protocol: "icmp", services: &["ecr_i"], flag: "SF", src_bytes: (520.0, 1032.0), dst_bytes: (0.0, 0.0), count: (300.0, 511.0), serror: 0.0, rerror: 0.0, same_srv: 1.0, logged_in: false },
    TrafficProfile { label: "neptune", share: 0.217, protocol: "tcp", services: &["private", "telnet", "ftp_data", "http"], flag: "S0", src_bytes: (0.0, 0.0), dst_bytes: (0.0, 0.0), count: (100.0, 260.0), serror: 1.0, rerror: 0.0, same_srv: 0.05, logged_in: false },
    TrafficProfile { label: "normal", share: 0.197, protocol: "tcp", services: &["http", "smtp", "ftp_data", "domain_u", "private"], flag: "SF", src_bytes: (150.0, 350.0), dst_bytes: (300.0, 12000.0), count: (1.0, 20.0), serror: 0.0, rerror: 0.0, same_srv: 1.0, logged_in: true },
    TrafficProfile { label: "back", share: 0.0045, protocol: "tcp", services: &["http"], flag: "SF", src_bytes: (54540.0, 54540.0), dst_bytes: (7300.0, 8314.0), count: (1.0, 5.0), serror: 0.0, rerror: 0.0, same_srv: 1.0, logged_in: true },
    TrafficProfile { label: "satan", share: 0.0032, protocol: "tcp", services: &["other", "private", "finger"], flag: "REJ", src_bytes: (0.0, 10.0), dst_bytes: (0.0, 10.0), count: (1.0, 200.0), serror: 0.0, rerror: 1.0, same_srv: 0.1, logged_in: false },
    TrafficProfile { label: "ipsweep", share: 0.0025, protocol: "icmp", services: &["eco_i"], flag: "SF", src_bytes: (8.0, 20.0), dst_bytes: (0.0, 0.0), count: (1.0, 3.0), serror: 0.0, rerror: 0.0, same_srv: 1.0, logged_in: false },
    TrafficProfile { label: "portsweep", share: 0.0021, protocol: "tcp", services: &["private"], flag: "RSTR", src_bytes: (0.0, 0.0), dst_bytes: (0.0, 0.0), count: (1.0, 2.0), serror: 0.0, rerror: 1.0, same_srv: 0.5, logged_in: false },
    TrafficProfile { label: "warezclient", share: 0.002, protocol: "tcp", services: &["ftp_data", "ftp"], flag: "SF", src_bytes: (300.0, 50000.0), dst_bytes: (0.0, 2000.0), count: (1.0, 3.0), serror: 0.0, rerror: 0.0, same_srv: 1.0, logged_in: true },
    TrafficProfile { label: "teardrop", share: 0.002, protocol: "udp", services: &["private"], flag: "SF", src_bytes: (28.0, 28.0), dst_bytes: (0.0, 0.0), count: (50.0, 120.0), serror: 0.0, rerror: 0.0, same_srv: 1.0, logged_in: false },
    TrafficProfile { label: "guess_passwd", share: 0.0001, protocol: "tcp", services: &["telnet"], flag: "RSTO", src_bytes: (125.0, 126.0), dst_bytes: (179.0, 180.0), count: (1.0, 2.0), serror: 0.0, rerror: 1.0, same_srv: 1.0, logged_in: false },
    TrafficProfile { label: "buffer_overflow", share: 0.0001, protocol: "tcp", services: &["telnet", "ftp_data"], flag: "SF", src_bytes: (1500.0, 3000.0), dst_bytes: (2000.0, 8000.0), count: (1.0, 2.0), serror: 0.0, rerror: 0.0, same_srv: 1.0, logged_in: true },
];

/// Emits KDD'99-formatted lines (41 features + label with trailing period)
/// in class bursts, mimicking the layout of the public files.
pub struct KddSurrogate {
    rng: ChaCha8Rng,
    remaining: usize,
    burst_left: usize,
    current: usize,
}

impl KddSurrogate {
    pub fn new(records: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            remaining: records,
            burst_left: 0,
            current: 0,
        }
    }

    fn pick_profile(&mut self) -> usize {
        let total: f64 = PROFILES.iter().map(|p| p.share).sum();
        let mut x = self.rng.random_range(0.0..total);
        for (i, p) in PROFILES.iter().enumerate() {
            if x < p.share {
                return i;
            }
            x -= p.share;
        }
        PROFILES.len() - 1
    }

    fn uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            self.rng.random_range(lo..=hi).round()
        } else {
            lo
        }
    }

    fn rate(&mut self, base: f64) -> f64 {
        let jitter: f64 = self.rng.random_range(-0.05..=0.05);
        (base + jitter).clamp(0.0, 1.0)
    }
}

impl Iterator for KddSurrogate {
    type Item = String;

    fn next(&mut self) -> Option<String> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        if self.burst_left == 0 {
            self.current = self.pick_profile();
            self.burst_left = self.rng.random_range(1..=100);
        }
        self.burst_left -= 1;
        let p = &PROFILES[self.current];
        let service = p.services[self.rng.random_range(0..p.services.len())];
        let count = self.uniform(p.count);
        let srv_count = (count * p.same_srv).round().max(1.0);
        let serror = self.rate(p.serror);
        let rerror = self.rate(p.rerror);
        let same_srv = self.rate(p.same_srv);
        let dst_host_count = self.uniform((1.0, 255.0));
        let dst_host_srv = self.uniform((1.0, 255.0));
        let mut f: Vec<String> = Vec::with_capacity(42);
        f.push("0".into());
        f.push(p.protocol.into());
        f.push(service.into());
        f.push(p.flag.into());
        f.push(format!("{}", self.uniform(p.src_bytes)));
        f.push(format!("{}", self.uniform(p.dst_bytes)));
        // land .. is_guest_login (6..=21)
        for col in 6..=21 {
            let v = if col == 11 { u8::from(p.logged_in) } else { 0 };
            f.push(v.to_string());
        }
        f.push(format!("{count}"));
        f.push(format!("{srv_count}"));
        for rate in [serror, serror, rerror, rerror, same_srv, 1.0 - same_srv, 0.0] {
            f.push(format!("{rate:.2}"));
        }
        f.push(format!("{dst_host_count}"));
        f.push(format!("{dst_host_srv}"));
        let host_same = self.rate(p.same_srv);
        for rate in [host_same, 1.0 - host_same, 0.0, 0.0, serror, serror, rerror, rerror] {
            f.push(format!("{rate:.2}"));
        }
        f.push(format!("{}.", p.label));
        Some(f.join(","))
    }
}
