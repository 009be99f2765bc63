//! KDD-CUP'99 style CSV ingestion.
//!
//! A record has 41 features and a label. `protocol_type`, `service` and `flag`
//! are one-hot encoded against a frozen vocabulary; the 38 numeric fields pass
//! through unchanged. Malformed lines are skipped and counted.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use indexmap::IndexSet;
use thiserror::Error;

use crate::fcm::Dataset;
use crate::metrics::ClassCode;
use crate::stream::Chunk;

pub const FIELD_COUNT: usize = 42;
pub const NUMERIC_FIELDS: usize = 38;
/// Column positions of `protocol_type`, `service` and `flag`.
pub const CATEGORICAL_COLUMNS: [usize; 3] = [1, 2, 3];

const DEFAULT_LABEL_MAP: &str = include_str!("../data/kdd_label_map.csv");

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("invalid label map: {0}")]
    LabelMap(String),
    #[error("chunk size must be at least 1")]
    ZeroChunkSize,
    #[error("schema drift at record {record}: expected {expected} features, found {found}")]
    SchemaDrift {
        record: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    /// The 38 numeric fields in file order.
    pub numeric: Vec<f64>,
    /// `protocol_type`, `service`, `flag`.
    pub categorical: [String; 3],
    pub label: String,
}

/// Splits a comma-separated record, strips the trailing period from the
/// label and checks field count and numeric parses.
pub fn parse_record(line: &str) -> Result<RawRecord> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != FIELD_COUNT {
        return Err(IngestError::Malformed(format!(
            "expected {FIELD_COUNT} fields, found {}",
            fields.len()
        )));
    }
    let mut numeric = Vec::with_capacity(NUMERIC_FIELDS);
    for (col, raw) in fields[..FIELD_COUNT - 1].iter().enumerate() {
        if CATEGORICAL_COLUMNS.contains(&col) {
            continue;
        }
        let value: f64 = raw
            .trim()
            .parse()
            .map_err(|_| IngestError::Malformed(format!("column {col}: {raw:?} is not a number")))?;
        if !value.is_finite() {
            return Err(IngestError::Malformed(format!("column {col}: non-finite value")));
        }
        numeric.push(value);
    }
    let label = fields[FIELD_COUNT - 1].trim();
    let label = label.strip_suffix('.').unwrap_or(label).to_string();
    Ok(RawRecord {
        numeric,
        categorical: CATEGORICAL_COLUMNS.map(|c| fields[c].trim().to_string()),
        label,
    })
}

/// Category vocabularies for the three symbolic fields.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    fields: [IndexSet<String>; 3],
    frozen: bool,
    unseen: u64,
}

impl Vocab {
    /// An empty vocabulary that grows as records are observed.
    pub fn growable() -> Self {
        Self::default()
    }

    pub fn frozen_from<S: AsRef<str>>(protocols: &[S], services: &[S], flags: &[S]) -> Self {
        let set = |xs: &[S]| xs.iter().map(|s| s.as_ref().to_string()).collect();
        Self {
            fields: [set(protocols), set(services), set(flags)],
            frozen: true,
            unseen: 0,
        }
    }

    pub fn observe(&mut self, record: &RawRecord) {
        if self.frozen {
            return;
        }
        for (set, value) in self.fields.iter_mut().zip(&record.categorical) {
            if !set.contains(value) {
                set.insert(value.clone());
            }
        }
    }

    /// Sorts every vocabulary and stops it from growing.
    pub fn freeze(&mut self) {
        for set in &mut self.fields {
            set.sort();
        }
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn dimension(&self) -> usize {
        NUMERIC_FIELDS + self.fields.iter().map(IndexSet::len).sum::<usize>()
    }

    /// Categorical values seen while frozen that had no slot.
    pub fn unseen(&self) -> u64 {
        self.unseen
    }

    pub fn categories(&self, field: usize) -> impl Iterator<Item = &str> {
        self.fields[field].iter().map(String::as_str)
    }
}

/// Encodes a record as `[duration, protocol one-hot, service one-hot,
/// flag one-hot, remaining 37 numerics]`. A growable vocabulary learns new
/// values; a frozen one maps them to an all-zero block and counts them.
pub fn encode(record: &RawRecord, vocab: &mut Vocab) -> Vec<f64> {
    vocab.observe(record);
    let mut out = Vec::with_capacity(vocab.dimension());
    out.push(record.numeric[0]);
    for (set, value) in vocab.fields.iter().zip(&record.categorical) {
        let start = out.len();
        out.resize(start + set.len(), 0.0);
        match set.get_index_of(value) {
            Some(i) => out[start + i] = 1.0,
            None => vocab.unseen += 1,
        }
    }
    out.extend_from_slice(&record.numeric[1..]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficClass {
    Normal,
    Dos,
    Probe,
    R2l,
    U2r,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 5] = [
        TrafficClass::Normal,
        TrafficClass::Dos,
        TrafficClass::Probe,
        TrafficClass::R2l,
        TrafficClass::U2r,
    ];

    /// normal=0, DoS=1, Probe=2, R2L=3, U2R=4.
    pub fn code(self) -> ClassCode {
        self as ClassCode
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(Self::Normal),
            "dos" => Some(Self::Dos),
            "probe" => Some(Self::Probe),
            "r2l" => Some(Self::R2l),
            "u2r" => Some(Self::U2r),
            _ => None,
        }
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Normal => "normal",
            Self::Dos => "dos",
            Self::Probe => "probe",
            Self::R2l => "r2l",
            Self::U2r => "u2r",
        })
    }
}

/// Attack name to traffic class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap(HashMap<String, TrafficClass>);

impl LabelMap {
    /// Reads `attack_name,class_name` rows. A leading header row is skipped.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut map = HashMap::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(IngestError::LabelMap(format!(
                    "row {}: expected 2 columns, found {}",
                    row + 1,
                    rec.len()
                )));
            }
            if row == 0 && rec[0].eq_ignore_ascii_case("attack_name") {
                continue;
            }
            let class = TrafficClass::from_name(&rec[1]).ok_or_else(|| {
                IngestError::LabelMap(format!("row {}: unknown class {:?}", row + 1, &rec[1]))
            })?;
            map.insert(rec[0].to_string(), class);
        }
        Ok(Self(map))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    /// The bundled KDD'99 table: `normal` plus the 22 training attack names.
    pub fn kdd_default() -> Self {
        Self::from_reader(DEFAULT_LABEL_MAP.as_bytes()).expect("bundled label map parses")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, TrafficClass)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// `None` marks an unknown attack name; such records are excluded from MAE.
pub fn map_label(name: &str, map: &LabelMap) -> Option<TrafficClass> {
    let name = name.trim();
    let name = name.strip_suffix('.').unwrap_or(name);
    map.0.get(name).copied()
}

/// Opens a file, transparently decompressing gzip input.
pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = reader.fill_buf()?;
    if magic.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}

/// Builds a sorted, frozen vocabulary from every well-formed line.
pub fn scan_vocab<R: BufRead>(reader: R) -> Result<Vocab> {
    let mut vocab = Vocab::growable();
    for line in reader.lines() {
        if let Ok(record) = parse_record(&line?) {
            vocab.observe(&record);
        }
    }
    vocab.freeze();
    Ok(vocab)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vec<f64>,
    pub label: Option<ClassCode>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub lines: usize,
    pub malformed: usize,
    pub unknown_labels: usize,
}

/// Parses and encodes records line by line.
pub struct KddReader<R> {
    lines: io::Lines<R>,
    vocab: Vocab,
    labels: LabelMap,
    stats: IngestStats,
    error: Option<io::Error>,
}

impl<R: BufRead> KddReader<R> {
    pub fn new(reader: R, vocab: Vocab, labels: LabelMap) -> Self {
        Self {
            lines: reader.lines(),
            vocab,
            labels,
            stats: IngestStats::default(),
            error: None,
        }
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// The read error that ended iteration early, if any.
    pub fn take_error(&mut self) -> Option<io::Error> {
        self.error.take()
    }
}

impl<R: BufRead> Iterator for KddReader<R> {
    type Item = LabeledPoint;

    fn next(&mut self) -> Option<LabeledPoint> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.error = Some(e);
                    return None;
                }
            };
            self.stats.lines += 1;
            let record = match parse_record(&line) {
                Ok(r) => r,
                Err(e) => {
                    self.stats.malformed += 1;
                    log::debug!("line {}: {e}", self.stats.lines);
                    continue;
                }
            };
            let label = map_label(&record.label, &self.labels).map(TrafficClass::code);
            if label.is_none() {
                self.stats.unknown_labels += 1;
            }
            return Some(LabeledPoint {
                features: encode(&record, &mut self.vocab),
                label,
            });
        }
    }
}

/// Groups points into consecutive chunks of `size`, indexed from 1. The last
/// chunk may be shorter.
pub fn chunk_stream<I>(source: I, size: usize) -> Result<ChunkStream<I::IntoIter>>
where
    I: IntoIterator<Item = LabeledPoint>,
{
    if size == 0 {
        return Err(IngestError::ZeroChunkSize);
    }
    Ok(ChunkStream {
        source: source.into_iter(),
        size,
        next_index: 1,
        seen: 0,
        dimension: None,
    })
}

pub struct ChunkStream<I> {
    source: I,
    size: usize,
    next_index: usize,
    seen: usize,
    dimension: Option<usize>,
}

impl<I: Iterator<Item = LabeledPoint>> Iterator for ChunkStream<I> {
    type Item = Result<Chunk>;

    fn next(&mut self) -> Option<Result<Chunk>> {
        let mut values = Vec::new();
        let mut labels = Vec::with_capacity(self.size);
        for point in self.source.by_ref().take(self.size) {
            self.seen += 1;
            let d = *self.dimension.get_or_insert(point.features.len());
            if point.features.len() != d || d == 0 {
                return Some(Err(IngestError::SchemaDrift {
                    record: self.seen,
                    expected: d,
                    found: point.features.len(),
                }));
            }
            values.extend(point.features);
            labels.push(point.label);
        }
        if labels.is_empty() {
            return None;
        }
        let index = self.next_index;
        self.next_index += 1;
        let d = self.dimension.expect("set by the first point");
        let chunk = Dataset::new(values, d)
            .map_err(|e| IngestError::Malformed(e.to_string()))
            .map(|points| Chunk {
                index,
                points,
                labels: Some(labels),
            });
        Some(chunk)
    }
}
