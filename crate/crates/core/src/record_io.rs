//! On-disk data formats and dataset bookkeeping.
//!
//! Two text formats are supported:
//!
//! - **Beat CSV** — one beat per line, `segment_len` comma-separated voltages
//!   followed by an integer class code. No header, LF line endings, values
//!   rendered with 9 significant digits.
//! - **Raw record** — a header line `fs=<float>` followed by one voltage per
//!   line, paired with an annotation file of `<sample_index>,<class_code>`
//!   lines sorted by index.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A uniformly sampled single-lead voltage series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    /// Voltage samples in millivolts.
    pub samples: Vec<f64>,
    /// Sampling rate in Hz, strictly positive.
    pub fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Self {
        assert!(fs > 0.0, "sampling rate must be positive");
        Signal { samples, fs }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration of the record in seconds.
    pub fn seconds(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

/// The five beat classes.
///
/// The code↔name mapping is fixed: 0=N, 1=FN, 2=PVC, 3=AP, 4=FVN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    /// Normal beat (N).
    Normal,
    /// Fusion of paced and normal (FN).
    FusionPacedNormal,
    /// Premature ventricular contraction (PVC).
    PrematureVentricular,
    /// Atrial premature beat (AP).
    AtrialPremature,
    /// Fusion of ventricular and normal (FVN).
    FusionVentricularNormal,
}

impl ClassLabel {
    pub const COUNT: usize = 5;
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Normal,
        ClassLabel::FusionPacedNormal,
        ClassLabel::PrematureVentricular,
        ClassLabel::AtrialPremature,
        ClassLabel::FusionVentricularNormal,
    ];

    pub fn code(self) -> u8 {
        match self {
            ClassLabel::Normal => 0,
            ClassLabel::FusionPacedNormal => 1,
            ClassLabel::PrematureVentricular => 2,
            ClassLabel::AtrialPremature => 3,
            ClassLabel::FusionVentricularNormal => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<ClassLabel> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "N",
            ClassLabel::FusionPacedNormal => "FN",
            ClassLabel::PrematureVentricular => "PVC",
            ClassLabel::AtrialPremature => "AP",
            ClassLabel::FusionVentricularNormal => "FVN",
        }
    }
}

/// A raw signal plus its beat annotations, sorted by sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub signal: Signal,
    /// `(sample_index, label)` pairs, strictly increasing in index and all
    /// within the signal bounds.
    pub annotations: Vec<(usize, ClassLabel)>,
}

/// Fixed-width labeled beat segments, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatDataset {
    beats: Vec<f64>,
    labels: Vec<ClassLabel>,
    segment_len: usize,
}

impl BeatDataset {
    /// An empty dataset with the given segment length.
    pub fn empty(segment_len: usize) -> Self {
        BeatDataset {
            beats: Vec::new(),
            labels: Vec::new(),
            segment_len,
        }
    }

    /// Builds a dataset from parallel rows and labels.
    ///
    /// Panics if any row length differs from `segment_len` or the label count
    /// does not match the row count.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<ClassLabel>, segment_len: usize) -> Self {
        assert_eq!(rows.len(), labels.len(), "one label per beat");
        let mut beats = Vec::with_capacity(rows.len() * segment_len);
        for row in &rows {
            assert_eq!(row.len(), segment_len, "all rows share segment_len");
            beats.extend_from_slice(row);
        }
        BeatDataset {
            beats,
            labels,
            segment_len,
        }
    }

    pub fn push(&mut self, beat: &[f64], label: ClassLabel) {
        assert_eq!(beat.len(), self.segment_len);
        self.beats.extend_from_slice(beat);
        self.labels.push(label);
    }

    pub fn n_beats(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn beat(&self, i: usize) -> &[f64] {
        &self.beats[i * self.segment_len..(i + 1) * self.segment_len]
    }

    pub fn label(&self, i: usize) -> ClassLabel {
        self.labels[i]
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], ClassLabel)> {
        self.beats
            .chunks_exact(self.segment_len.max(1))
            .zip(self.labels.iter().copied())
    }

    /// Number of beats per class, indexed by class code.
    pub fn class_counts(&self) -> [usize; ClassLabel::COUNT] {
        let mut counts = [0usize; ClassLabel::COUNT];
        for &l in &self.labels {
            counts[l.code() as usize] += 1;
        }
        counts
    }

    /// Copies the given rows into a new dataset.
    pub fn select(&self, indices: &[usize]) -> BeatDataset {
        let mut out = BeatDataset::empty(self.segment_len);
        for &i in indices {
            out.push(self.beat(i), self.labels[i]);
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("class {class} has only {count} beats; stratified split needs at least 2")]
    InsufficientClass { class: u8, count: usize },
}

fn parse_err<T>(line: usize, reason: impl Into<String>) -> Result<T, RecordError> {
    Err(RecordError::Parse {
        line,
        reason: reason.into(),
    })
}

/// Parses a beat CSV stream.
///
/// Each non-empty line must hold `expected_len` numeric fields plus a final
/// integer class code in 0..=4. Empty input yields an empty dataset.
pub fn parse_beat_csv(bytes: &[u8], expected_len: usize) -> Result<BeatDataset, RecordError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| RecordError::Parse {
            line: 0,
            reason: format!("input is not UTF-8: {e}"),
        })?;
    let mut ds = BeatDataset::empty(expected_len);
    let mut row = Vec::with_capacity(expected_len);
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        row.clear();
        let mut label = None;
        let mut fields = 0usize;
        for field in line.split(',') {
            fields += 1;
            if fields > expected_len + 1 {
                return parse_err(lineno, format!("expected {} fields", expected_len + 1));
            }
            let field = field.trim();
            if fields == expected_len + 1 {
                let code: u8 = field
                    .parse()
                    .map_err(|_| RecordError::Parse {
                        line: lineno,
                        reason: format!("label {field:?} is not an integer"),
                    })?;
                label = Some(ClassLabel::from_code(code).ok_or(RecordError::Parse {
                    line: lineno,
                    reason: format!("label code {code} outside 0-4"),
                })?);
            } else {
                let v: f64 = field.parse().map_err(|_| RecordError::Parse {
                    line: lineno,
                    reason: format!("field {fields} ({field:?}) is not numeric"),
                })?;
                row.push(v);
            }
        }
        match label {
            Some(l) if row.len() == expected_len => ds.push(&row, l),
            _ => return parse_err(lineno, format!("expected {} fields, got {fields}", expected_len + 1)),
        }
    }
    Ok(ds)
}

/// Renders a value with 9 significant digits, `%g`-style.
pub fn format_g9(x: f64) -> String {
    format_g(x, 9)
}

fn format_g(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        let s = format!("{:.*e}", sig - 1, x);
        // trim trailing zeros in the mantissa: "1.200000000e-5" -> "1.2e-5"
        let (mant, e) = s.split_once('e').expect("exponent marker");
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}e{e}")
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

/// Writes a beat CSV stream; the inverse of [`parse_beat_csv`].
pub fn write_beat_csv(ds: &BeatDataset) -> Vec<u8> {
    let mut out = String::new();
    for (beat, label) in ds.iter() {
        for v in beat {
            out.push_str(&format_g9(*v));
            out.push(',');
        }
        out.push_str(&label.code().to_string());
        out.push('\n');
    }
    out.into_bytes()
}

/// Parses a raw record (samples stream + annotation stream).
///
/// The samples stream starts with `fs=<float>`, then one voltage per line.
/// Annotations are `<sample_index>,<class_code>` lines with strictly
/// increasing in-bounds indices.
pub fn parse_raw_record(samples_bytes: &[u8], ann_bytes: &[u8]) -> Result<RawRecord, RecordError> {
    let text = std::str::from_utf8(samples_bytes).map_err(|e| RecordError::Parse {
        line: 0,
        reason: format!("samples stream is not UTF-8: {e}"),
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| RecordError::Parse {
            line: 1,
            reason: "missing fs=<float> header".into(),
        })?;
    let fs: f64 = header
        .strip_prefix("fs=")
        .and_then(|v| v.trim().parse().ok())
        .filter(|&v: &f64| v > 0.0 && v.is_finite())
        .ok_or_else(|| RecordError::Parse {
            line: 1,
            reason: format!("bad header {header:?}, expected fs=<positive float>"),
        })?;

    let mut samples = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| RecordError::Parse {
            line: lineno + 1,
            reason: format!("voltage {line:?} is not numeric"),
        })?;
        samples.push(v);
    }

    let ann_text = std::str::from_utf8(ann_bytes).map_err(|e| RecordError::Parse {
        line: 0,
        reason: format!("annotation stream is not UTF-8: {e}"),
    })?;
    let mut annotations: Vec<(usize, ClassLabel)> = Vec::new();
    for (lineno, line) in ann_text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (idx_s, code_s) = line.split_once(',').ok_or_else(|| RecordError::Parse {
            line: lineno,
            reason: "expected <index>,<code>".into(),
        })?;
        let idx: usize = idx_s.trim().parse().map_err(|_| RecordError::Parse {
            line: lineno,
            reason: format!("index {idx_s:?} is not a non-negative integer"),
        })?;
        let code: u8 = code_s.trim().parse().map_err(|_| RecordError::Parse {
            line: lineno,
            reason: format!("code {code_s:?} is not an integer"),
        })?;
        let label = ClassLabel::from_code(code).ok_or(RecordError::Parse {
            line: lineno,
            reason: format!("label code {code} outside 0-4"),
        })?;
        if idx >= samples.len() {
            return parse_err(
                lineno,
                format!("annotation index {idx} beyond signal length {}", samples.len()),
            );
        }
        if let Some(&(prev, _)) = annotations.last() {
            if idx <= prev {
                return parse_err(
                    lineno,
                    format!("annotation indices must be strictly increasing ({prev} then {idx})"),
                );
            }
        }
        annotations.push((idx, label));
    }

    Ok(RawRecord {
        signal: Signal::new(samples, fs),
        annotations,
    })
}

/// Deterministic per-class split into train and test portions.
///
/// Every class contributes `round(train_fraction · count)` beats to the train
/// split, clamped so both splits stay non-empty per class. The two outputs
/// partition the input rows exactly; beat order within each split follows the
/// original row order.
pub fn stratified_split(
    ds: &BeatDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(BeatDataset, BeatDataset), RecordError> {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train_fraction must lie in (0,1)"
    );
    let counts = ds.class_counts();
    for (code, &count) in counts.iter().enumerate() {
        if count > 0 && count < 2 {
            return Err(RecordError::InsufficientClass {
                class: code as u8,
                count,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..ds.n_beats())
            .filter(|&i| ds.label(i) == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let take = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        train_idx.extend_from_slice(&members[..take]);
        test_idx.extend_from_slice(&members[take..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((ds.select(&train_idx), ds.select(&test_idx)))
}
