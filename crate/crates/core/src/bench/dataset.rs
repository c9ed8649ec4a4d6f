use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("byte {offset}: magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        offset: usize,
        found: u32,
        expected: u32,
    },
    #[error("byte {offset}: {what}")]
    BadDims { offset: usize, what: String },
    #[error("byte {offset}: truncated, needed {needed} more bytes, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("row {row}: expected {expected} columns, found {found}")]
    Ragged {
        row: u64,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column}: not a finite number: {token:?}")]
    NonNumeric {
        row: u64,
        column: usize,
        token: String,
    },
    #[error("row {row}: missing label in a labeled file")]
    MissingLabel { row: u64 },
    #[error("row {row}: {message}")]
    Csv { row: u64, message: String },
    #[error("dataset has no samples")]
    Empty,
    #[error("need at least one feature column plus the label column")]
    NoFeatures,
}

/// Feature vectors in `[0, 1]` with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
    feature_dim: usize,
}

impl Dataset {
    /// Panics when the samples disagree in length or labels do not align.
    pub fn new(samples: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Self {
        let feature_dim = samples.first().map_or(0, Vec::len);
        assert!(
            samples.iter().all(|s| s.len() == feature_dim),
            "samples must share one dimension"
        );
        if let Some(labels) = &labels {
            assert_eq!(
                labels.len(),
                samples.len(),
                "labels must align with samples"
            );
        }
        Dataset {
            samples,
            labels,
            feature_dim,
        }
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First `n` samples (or all of them).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            samples: self.samples[..n].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
            feature_dim: self.feature_dim,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let raw = fs::read(path).map_err(io_err)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(io_err)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(DataError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn magic(&mut self, expected: u32) -> Result<(), DataError> {
        let offset = self.pos;
        let found = self.u32()?;
        if found != expected {
            return Err(DataError::BadMagic {
                offset,
                found,
                expected,
            });
        }
        Ok(())
    }
}

/// Parses an IDX image file: pixels become `byte / 255`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Vec<f64>>, DataError> {
    let mut cur = Cursor { bytes, pos: 0 };
    cur.magic(IDX_IMAGES_MAGIC)?;
    let count = cur.u32()? as usize;
    let dims_at = cur.pos;
    let rows = cur.u32()? as usize;
    let cols = cur.u32()? as usize;
    let dim = rows
        .checked_mul(cols)
        .filter(|&d| d > 0)
        .ok_or_else(|| DataError::BadDims {
            offset: dims_at,
            what: format!("image dimensions {rows}x{cols}"),
        })?;
    let mut images = Vec::with_capacity(count.min(bytes.len() / dim));
    for _ in 0..count {
        images.push(
            cur.take(dim)?
                .iter()
                .map(|&b| f64::from(b) / 255.0)
                .collect(),
        );
    }
    Ok(images)
}

/// Parses an IDX label file into decimal label tokens.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<String>, DataError> {
    let mut cur = Cursor { bytes, pos: 0 };
    cur.magic(IDX_LABELS_MAGIC)?;
    let count = cur.u32()? as usize;
    Ok(cur.take(count)?.iter().map(|b| b.to_string()).collect())
}

/// Loads a paired IDX image/label file set. Gzip-compressed files are
/// detected by their magic bytes and inflated transparently.
pub fn load_idx(images: &Path, labels: Option<&Path>) -> Result<Dataset, DataError> {
    let samples = parse_idx_images(&read_file(images)?)?;
    let labels = match labels {
        Some(path) => {
            let labels = parse_idx_labels(&read_file(path)?)?;
            if labels.len() != samples.len() {
                return Err(DataError::CountMismatch {
                    images: samples.len(),
                    labels: labels.len(),
                });
            }
            Some(labels)
        }
        None => None,
    };
    if samples.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(Dataset::new(samples, labels))
}

/// Parses CSV text: every column but the last is a numeric feature, the
/// last holds the label. Features are min-max normalized per column; a
/// constant column maps to 0. When every label cell is empty the dataset is
/// unlabeled. Row numbers in errors are 1-based file lines.
pub fn parse_csv(text: &str, has_header: bool) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut raw: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<(u64, String)> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Csv {
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::Ragged {
                row,
                expected,
                found: record.len(),
            });
        }
        if expected < 2 {
            return Err(DataError::NoFeatures);
        }
        let features = record
            .iter()
            .take(expected - 1)
            .enumerate()
            .map(|(column, token)| {
                token
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::NonNumeric {
                        row,
                        column,
                        token: token.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        raw.push(features);
        labels.push((row, record[expected - 1].trim().to_string()));
    }
    if raw.is_empty() {
        return Err(DataError::Empty);
    }

    let dim = raw[0].len();
    for c in 0..dim {
        let (lo, hi) = raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[c]), hi.max(r[c]))
            });
        let span = hi - lo;
        for r in raw.iter_mut() {
            r[c] = if span > 0.0 { (r[c] - lo) / span } else { 0.0 };
        }
    }

    let labels = if labels.iter().all(|(_, l)| l.is_empty()) {
        None
    } else {
        if let Some((row, _)) = labels.iter().find(|(_, l)| l.is_empty()) {
            return Err(DataError::MissingLabel { row: *row });
        }
        Some(labels.into_iter().map(|(_, l)| l).collect())
    };
    Ok(Dataset::new(raw, labels))
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, has_header)
}

/// Writes features at full precision followed by the label (empty when
/// unlabeled), optionally preceded by a `f0,..,label` header.
pub fn write_csv<W: Write>(data: &Dataset, out: W, header: bool) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        let mut names: Vec<String> = (0..data.feature_dim()).map(|i| format!("f{i}")).collect();
        names.push("label".into());
        w.write_record(&names)?;
    }
    for (i, sample) in data.samples().iter().enumerate() {
        let mut row: Vec<String> = sample.iter().map(|v| v.to_string()).collect();
        row.push(data.labels().map_or(String::new(), |l| l[i].clone()));
        w.write_record(&row)?;
    }
    w.flush()
}
