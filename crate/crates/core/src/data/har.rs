//! HAR-2 ingestion.
//!
//! Feature file: one sample per line, 128 × 9 = 1152 numbers separated by commas
//! and/or whitespace. Values are time-major: the first 9 numbers are the inertial
//! channels at step 1 (`body_acc_{x,y,z}`, `body_gyro_{x,y,z}`, `total_acc_{x,y,z}`
//! in the UCI ordering), the next 9 are step 2, and so on.
//!
//! Label file: one UCI activity code per line (1 WALKING, 2 WALKING_UPSTAIRS,
//! 3 WALKING_DOWNSTAIRS, 4 SITTING, 5 STANDING, 6 LAYING). Codes 1–3 map to class 1
//! (moving) and 4–6 to class 0 (stationary). Any other value is rejected.
//!
//! Blank lines are skipped in both files.
//!
//! [`load_har2_uci`] reads an extracted `UCI HAR Dataset` directory directly: the nine
//! `Inertial Signals/<signal>_<split>.txt` files (128 values per line) are interleaved
//! into the layout above and `<split>/y_<split>.txt` supplies the labels.

use std::path::Path;

use crate::data::Dataset;
use crate::error::{DataError, Error, Result};
use crate::tensor::Matrix;

pub const HAR_STEPS: usize = 128;
pub const HAR_CHANNELS: usize = 9;

const STD_FLOOR: f64 = 1e-8;

/// Inertial signal files in channel order.
pub const UCI_SIGNALS: [&str; HAR_CHANNELS] = [
    "body_acc_x",
    "body_acc_y",
    "body_acc_z",
    "body_gyro_x",
    "body_gyro_y",
    "body_gyro_z",
    "total_acc_x",
    "total_acc_y",
    "total_acc_z",
];

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
}

pub fn parse_har2_features(text: &str) -> std::result::Result<Vec<Matrix>, DataError> {
    let width = HAR_STEPS * HAR_CHANNELS;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::with_capacity(width);
        for f in fields(line) {
            let v: f64 = f.parse().map_err(|_| DataError::Malformed {
                line: i + 1,
                detail: format!("non-numeric field {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(DataError::Malformed {
                    line: i + 1,
                    detail: format!("non-finite field {f:?}"),
                });
            }
            values.push(v);
        }
        if values.len() != width {
            return Err(DataError::Ragged {
                line: i + 1,
                expected: width,
                found: values.len(),
            });
        }
        out.push(Matrix::from_vec(HAR_STEPS, HAR_CHANNELS, values).expect("width checked"));
    }
    Ok(out)
}

pub fn parse_har2_labels(text: &str) -> std::result::Result<Vec<usize>, DataError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let v = line.trim();
        if v.is_empty() {
            continue;
        }
        let class = match v {
            "1" | "2" | "3" => 1,
            "4" | "5" | "6" => 0,
            _ => {
                return Err(DataError::UnknownLabel {
                    line: i + 1,
                    value: v.to_string(),
                })
            }
        };
        out.push(class);
    }
    Ok(out)
}

/// Interleaves nine per-signal texts (one sample of 128 values per line) into the
/// time-major feature format.
pub fn interleave_uci_signals(signals: &[&str]) -> std::result::Result<String, DataError> {
    if signals.len() != HAR_CHANNELS {
        return Err(DataError::Malformed {
            line: 0,
            detail: format!(
                "expected {HAR_CHANNELS} signal files, got {}",
                signals.len()
            ),
        });
    }
    let mut rows: Vec<Vec<Vec<&str>>> = Vec::with_capacity(HAR_CHANNELS);
    for text in signals {
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = fields(line).collect();
            if f.len() != HAR_STEPS {
                return Err(DataError::Ragged {
                    line: i + 1,
                    expected: HAR_STEPS,
                    found: f.len(),
                });
            }
            lines.push(f);
        }
        rows.push(lines);
    }
    let count = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != count) {
        return Err(DataError::CountMismatch {
            images: count,
            labels: bad.len(),
        });
    }
    let mut out = String::new();
    for sample in 0..count {
        for t in 0..HAR_STEPS {
            for (c, signal) in rows.iter().enumerate() {
                if t + c > 0 {
                    out.push(' ');
                }
                out.push_str(signal[sample][t]);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Loads `split` ("train" or "test") from an extracted UCI HAR directory. Statistics
/// work as in [`load_har2`].
pub fn load_har2_uci(
    root: impl AsRef<Path>,
    split: &str,
    stats: Option<&FeatureStats>,
) -> Result<(Dataset, FeatureStats)> {
    let dir = root.as_ref().join(split);
    let read = |p: std::path::PathBuf| std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e));
    let mut texts = Vec::with_capacity(HAR_CHANNELS);
    for name in UCI_SIGNALS {
        texts.push(read(
            dir.join("Inertial Signals")
                .join(format!("{name}_{split}.txt")),
        )?);
    }
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let features = interleave_uci_signals(&refs)?;
    let labels = read(dir.join(format!("y_{split}.txt")))?;
    har2_from_text(&features, &labels, stats)
}

/// Per-channel mean and standard deviation over every step of every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn fit(sequences: &[Matrix]) -> Result<Self> {
        let first = sequences.first().ok_or(DataError::Empty)?;
        let m = first.cols();
        let mut mean = vec![0.0; m];
        let mut count = 0usize;
        for s in sequences {
            for r in 0..s.rows() {
                for (acc, v) in mean.iter_mut().zip(s.row(r)) {
                    *acc += v;
                }
            }
            count += s.rows();
        }
        mean.iter_mut().for_each(|v| *v /= count as f64);
        let mut var = vec![0.0; m];
        for s in sequences {
            for r in 0..s.rows() {
                for ((acc, v), mu) in var.iter_mut().zip(s.row(r)).zip(&mean) {
                    *acc += (v - mu).powi(2);
                }
            }
        }
        let std = var.iter().map(|v| (v / count as f64).sqrt()).collect();
        Ok(FeatureStats { mean, std })
    }

    /// z-score; channels with (near) zero spread map to 0.
    pub fn apply(&self, s: &Matrix) -> Matrix {
        let mut out = s.clone();
        for r in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if *sd < STD_FLOOR { 0.0 } else { (*v - mu) / sd };
            }
        }
        out
    }
}

/// Loads and z-scores a HAR-2 split. Pass `None` for the training split (statistics
/// are fit on it and returned); pass the training statistics for the test split.
pub fn load_har2(
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    stats: Option<&FeatureStats>,
) -> Result<(Dataset, FeatureStats)> {
    let fp = features_path.as_ref();
    let lp = labels_path.as_ref();
    let features = std::fs::read_to_string(fp).map_err(|e| Error::io(fp, e))?;
    let labels = std::fs::read_to_string(lp).map_err(|e| Error::io(lp, e))?;
    har2_from_text(&features, &labels, stats)
}

pub fn har2_from_text(
    features: &str,
    labels: &str,
    stats: Option<&FeatureStats>,
) -> Result<(Dataset, FeatureStats)> {
    let raw = parse_har2_features(features)?;
    let labels = parse_har2_labels(labels)?;
    if raw.len() != labels.len() {
        return Err(DataError::CountMismatch {
            images: raw.len(),
            labels: labels.len(),
        }
        .into());
    }
    let stats = match stats {
        Some(s) => s.clone(),
        None => FeatureStats::fit(&raw)?,
    };
    let normalized = raw.iter().map(|s| stats.apply(s)).collect();
    Ok((Dataset::new("har2", normalized, labels, 2)?, stats))
}
