//! Window-to-feature conversion: nine time-domain statistics, eight
//! Daubechies sub-band energies, six EEMD mode energies, concatenated in
//! that order, plus column standardization of the assembled matrix.

pub mod dwt;
pub mod emd;

pub use emd::EemdParams;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Label, Window};
use crate::num::{mean, real, real_of, Real};
use crate::seed;

/// Total feature dimension: 9 time + 8 wavelet + 6 EEMD.
pub const FEATURE_DIM: usize = 23;

/// Number of time-domain features.
pub const TIME_FEATURES: usize = 9;

/// One extracted row, ordered [time(9) | DB(8) | EEMD(6)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureVector<T: Real> {
    pub values: [T; FEATURE_DIM],
}

/// Per-column standardization statistics (the JSON sidecar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormStats<T: Real> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub zero_columns: Vec<usize>,
}

/// Extracted features for a window set, with labels when known and the
/// standardization stats once [`standardize`] has run.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T: Real> {
    pub rows: Vec<FeatureVector<T>>,
    pub labels: Option<Vec<Label>>,
    pub norm_stats: Option<NormStats<T>>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i].values
    }

    /// Dense copy of the rows; handy for the network code.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        self.rows.iter().map(|r| r.values.to_vec()).collect()
    }
}

const DENOM_GUARD: f64 = 1e-12;

/// Nine time-domain statistics of one window, in Table-1 order:
/// [peak, std, mean-square, rms, crest, impulse, shape, kurtosis, skewness].
///
/// Peak is max |x|; the impulse and shape denominators use mean |x|; the
/// standard deviation uses the n-1 divisor while kurtosis/skewness use
/// population central moments. Any ratio whose denominator falls below
/// 1e-12 is guarded to 0, so every input yields finite output.
pub fn time_features<T: Real>(window: &[T]) -> [T; TIME_FEATURES] {
    let n = real_of::<T>(window.len());
    let guard = real::<T>(DENOM_GUARD);

    let peak = window
        .iter()
        .fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let mu = mean(window);
    let abs_mean = window.iter().fold(T::zero(), |a, &v| a + v.abs()) / n;
    let mean_sq = window.iter().fold(T::zero(), |a, &v| a + v * v) / n;
    let rms = mean_sq.sqrt();

    let mut m2 = T::zero();
    let mut m3 = T::zero();
    let mut m4 = T::zero();
    for &v in window {
        let d = v - mu;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let std = if window.len() > 1 {
        (m2 / real_of::<T>(window.len() - 1)).sqrt()
    } else {
        T::zero()
    };
    m2 = m2 / n;
    m3 = m3 / n;
    m4 = m4 / n;

    let ratio = |num: T, den: T| if den < guard { T::zero() } else { num / den };
    let crest = ratio(peak, rms);
    let impulse = ratio(peak, abs_mean);
    let shape = ratio(rms, abs_mean);
    let kurtosis = ratio(m4, m2 * m2);
    let skewness = ratio(m3, m2 * m2.sqrt());

    [peak, std, mean_sq, rms, crest, impulse, shape, kurtosis, skewness]
}

/// Full 23-feature extraction for one window.
pub fn extract<T: Real>(
    window: &Window<T>,
    params: &EemdParams,
    seed: u64,
) -> Result<FeatureVector<T>> {
    let mut values = [T::zero(); FEATURE_DIM];
    values[..TIME_FEATURES].copy_from_slice(&time_features(&window.values));
    let db = dwt::dwt_features(&window.values)?;
    values[TIME_FEATURES..TIME_FEATURES + dwt::FEATURE_LEVELS].copy_from_slice(&db);
    let ee = emd::eemd_features(&window.values, params, seed)?;
    values[TIME_FEATURES + dwt::FEATURE_LEVELS..].copy_from_slice(&ee);
    Ok(FeatureVector { values })
}

/// Extract every window of a set; row `i` gets its EEMD seed derived from
/// `(seed, i)` so rows are independent and the whole matrix is a pure
/// function of `(windows, params, seed)`.
pub fn extract_matrix<T: Real>(
    windows: &[Window<T>],
    params: &EemdParams,
    seed: u64,
) -> Result<FeatureMatrix<T>> {
    let mut rows = Vec::with_capacity(windows.len());
    let mut labels = Vec::with_capacity(windows.len());
    for (i, w) in windows.iter().enumerate() {
        rows.push(extract(w, params, seed::derive2(seed, seed::tag::FEATURE_ROW, i as u64))?);
        labels.push(w.label);
    }
    Ok(FeatureMatrix {
        rows,
        labels: Some(labels),
        norm_stats: None,
    })
}

/// Column z-score using the matrix's own mean and (n-1) standard
/// deviation. Columns with std below 1e-12 become all-zero and are listed
/// in `zero_columns`.
pub fn standardize<T: Real>(matrix: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    let m = matrix.m();
    if m < 2 {
        return Err(Error::Insufficient {
            what: "rows to standardize",
            needed: 2,
            got: m,
        });
    }
    let guard = real::<T>(DENOM_GUARD);
    let mf = real_of::<T>(m);
    let mut col_mean = vec![T::zero(); FEATURE_DIM];
    let mut col_std = vec![T::zero(); FEATURE_DIM];
    let mut zero_columns = Vec::new();

    for j in 0..FEATURE_DIM {
        let mut s = T::zero();
        for r in &matrix.rows {
            s = s + r.values[j];
        }
        col_mean[j] = s / mf;
        let mut v = T::zero();
        for r in &matrix.rows {
            let d = r.values[j] - col_mean[j];
            v = v + d * d;
        }
        col_std[j] = (v / real_of::<T>(m - 1)).sqrt();
        if col_std[j] < guard {
            zero_columns.push(j);
        }
    }

    let mut rows = matrix.rows.clone();
    for r in &mut rows {
        for j in 0..FEATURE_DIM {
            r.values[j] = if col_std[j] < guard {
                T::zero()
            } else {
                (r.values[j] - col_mean[j]) / col_std[j]
            };
        }
    }

    Ok(FeatureMatrix {
        rows,
        labels: matrix.labels.clone(),
        norm_stats: Some(NormStats {
            mean: col_mean,
            std: col_std,
            zero_columns,
        }),
    })
}

// ---------------------------------------------------------------------------
// File formats: feature CSV (f1..f23,label) and the stats JSON sidecar
// ---------------------------------------------------------------------------

/// Write the matrix as CSV with header `f1..f23,label` (label column only
/// when labels are present).
pub fn write_features_csv<T: Real>(matrix: &FeatureMatrix<T>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 1..=FEATURE_DIM {
        if j > 1 {
            out.push(',');
        }
        out.push_str(&format!("f{j}"));
    }
    if matrix.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, row) in matrix.rows.iter().enumerate() {
        for (j, v) in row.values.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v}"));
        }
        if let Some(labels) = &matrix.labels {
            out.push(',');
            out.push_str(labels[i].as_str());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a feature CSV produced by [`write_features_csv`].
pub fn read_features_csv<T: Real>(path: &Path) -> Result<FeatureMatrix<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "empty feature CSV".into(),
    })?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let has_labels = cols.last() == Some(&"label");
    let expected = FEATURE_DIM + usize::from(has_labels);
    if cols.len() != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected {expected} columns, header has {}", cols.len()),
        });
    }

    let mut rows = Vec::new();
    let mut labels = if has_labels { Some(Vec::new()) } else { None };
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: idx + 1,
                message: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        let mut values = [T::zero(); FEATURE_DIM];
        for (j, slot) in values.iter_mut().enumerate() {
            *slot = fields[j]
                .parse::<f64>()
                .map(real)
                .map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    row: idx + 1,
                    message: format!("non-numeric field {:?}", fields[j]),
                })?;
        }
        if let Some(labels) = labels.as_mut() {
            let label: Label = fields[FEATURE_DIM].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: idx + 1,
                message: format!("unknown label {:?}", fields[FEATURE_DIM]),
            })?;
            labels.push(label);
        }
        rows.push(FeatureVector { values });
    }
    Ok(FeatureMatrix {
        rows,
        labels,
        norm_stats: None,
    })
}

/// Write the standardization stats sidecar.
pub fn write_stats_json<T: Real>(stats: &NormStats<T>, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(stats).expect("stats serialize");
    fs::write(path, json).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_stats_json<T: Real>(path: &Path) -> Result<NormStats<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
