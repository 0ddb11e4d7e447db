//! Raw vibration records: loading, windowing, dataset assembly, and a
//! deterministic synthetic generator for tests and benchmarks.

mod mat;

pub use mat::load_mat_v5;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{real, Real};
use crate::seed;

/// Ground-truth condition of a record or window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Inner,
    Outer,
    Ball,
}

impl Label {
    pub fn is_fault(self) -> bool {
        self != Label::Normal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Inner => "inner",
            Label::Outer => "outer",
            Label::Ball => "ball",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Label::Normal),
            "inner" => Ok(Label::Inner),
            "outer" => Ok(Label::Outer),
            "ball" => Ok(Label::Ball),
            other => Err(Error::Invalid(format!("unknown label {other:?}"))),
        }
    }
}

/// A labeled 1-D acceleration record.
#[derive(Debug, Clone)]
pub struct RawSignal<T: Real> {
    pub samples: Vec<T>,
    /// Samples per second. Informational; windowing is sample-count based.
    pub sample_rate: f64,
    pub label: Label,
    /// Fault diameter in mm, when known (CWRU reports 0.1778/0.3556/0.5334).
    pub fault_diameter: Option<f64>,
}

impl<T: Real> RawSignal<T> {
    pub fn new(samples: Vec<T>, sample_rate: f64, label: Label) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Invalid("signal has no samples".into()));
        }
        if !sample_rate.is_finite() || sample_rate <= 0.0 {
            return Err(Error::InvalidParam {
                name: "sample_rate",
                message: format!("must be > 0, got {sample_rate}"),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            label,
            fault_diameter: None,
        })
    }
}

/// One fixed-width slice of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T: Real> {
    pub values: Vec<T>,
    pub label: Label,
    /// Sample index of the window start in its source signal.
    pub source_offset: usize,
}

/// The assembled evaluation set: normals first, then sampled faults.
#[derive(Debug, Clone)]
pub struct WindowSet<T: Real> {
    pub windows: Vec<Window<T>>,
    pub n_normal: usize,
    pub n_fault: usize,
    pub assembly_seed: u64,
}

impl<T: Real> WindowSet<T> {
    pub fn labels(&self) -> Vec<Label> {
        self.windows.iter().map(|w| w.label).collect()
    }
}

/// Minimum window width accepted by the feature formulas.
pub const MIN_WINDOW_WIDTH: usize = 8;

/// Default sliding-window width.
pub const DEFAULT_WINDOW_WIDTH: usize = 300;

/// Load a one-value-per-line CSV. A single non-numeric first line is
/// treated as a header and skipped; any later non-numeric row is an error
/// reported with its 1-based row number.
pub fn load_csv<T: Real>(path: &Path, label: Label) -> Result<RawSignal<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => samples.push(real(v)),
            Ok(v) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("non-finite value {v}"),
                })
            }
            Err(_) if row == 1 && samples.is_empty() => continue, // header
            Err(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("non-numeric value {field:?}"),
                })
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no numeric rows".into(),
        });
    }
    RawSignal::new(samples, 12_000.0, label)
}

/// Slice a signal into non-overlapping windows of `width` samples.
/// The trailing remainder is discarded.
pub fn slice_windows<T: Real>(signal: &RawSignal<T>, width: usize) -> Result<Vec<Window<T>>> {
    if width < MIN_WINDOW_WIDTH {
        return Err(Error::InvalidParam {
            name: "width",
            message: format!("must be >= {MIN_WINDOW_WIDTH}, got {width}"),
        });
    }
    if signal.samples.len() < width {
        return Err(Error::Insufficient {
            what: "samples",
            needed: width,
            got: signal.samples.len(),
        });
    }
    let count = signal.samples.len() / width;
    let mut windows = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * width;
        windows.push(Window {
            values: signal.samples[start..start + width].to_vec(),
            label: signal.label,
            source_offset: start,
        });
    }
    Ok(windows)
}

/// Assemble the evaluation set: the first `n_normal` normal windows, then
/// `n_fault` fault windows sampled uniformly without replacement (seeded),
/// appended in their original relative order.
pub fn assemble_dataset<T: Real>(
    normals: &[Window<T>],
    faults: &[Window<T>],
    n_normal: usize,
    n_fault: usize,
    seed: u64,
) -> Result<WindowSet<T>> {
    if normals.len() < n_normal {
        return Err(Error::Insufficient {
            what: "normal windows",
            needed: n_normal,
            got: normals.len(),
        });
    }
    if faults.len() < n_fault {
        return Err(Error::Insufficient {
            what: "fault windows",
            needed: n_fault,
            got: faults.len(),
        });
    }
    let mut windows: Vec<Window<T>> = normals[..n_normal].to_vec();
    let mut rng = seed::rng(seed, seed::tag::ASSEMBLE);
    let mut chosen = rand::seq::index::sample(&mut rng, faults.len(), n_fault).into_vec();
    chosen.sort_unstable();
    for idx in chosen {
        windows.push(faults[idx].clone());
    }
    Ok(WindowSet {
        windows,
        n_normal,
        n_fault,
        assembly_seed: seed,
    })
}

/// Fixed parameters of the synthetic generator. Only the seed and counts
/// are external; everything else is pinned here so runs are comparable.
pub mod synth_params {
    /// Primary carrier, cycles per sample.
    pub const CARRIER_FREQ: f64 = 0.03;
    /// Secondary tone, cycles per sample.
    pub const SECOND_FREQ: f64 = 0.095;
    /// Primary carrier amplitude.
    pub const CARRIER_AMP: f64 = 1.0;
    /// Secondary tone amplitude.
    pub const SECOND_AMP: f64 = 0.5;
    /// Gaussian noise standard deviation.
    pub const NOISE_STD: f64 = 0.1;
    /// Impulse amplitude as a multiple of the carrier amplitude.
    pub const IMPULSE_AMP_FACTOR: f64 = 5.0;
    /// Impulse decay time constant, samples.
    pub const IMPULSE_DECAY: f64 = 6.0;
}

/// Generate a (normal, fault) pair of synthetic signals.
///
/// Normal: two fixed-frequency sinusoids plus Gaussian noise. Fault: the
/// same carrier plus an exponentially decaying impulse train repeating
/// every `width / 4` samples. Fully determined by `seed`.
pub fn synth_signals<T: Real>(
    n_normal_windows: usize,
    n_fault_windows: usize,
    width: usize,
    seed: u64,
) -> Result<(RawSignal<T>, RawSignal<T>)> {
    if n_normal_windows == 0 || n_fault_windows == 0 || width == 0 {
        return Err(Error::InvalidParam {
            name: "counts",
            message: "window counts and width must be positive".into(),
        });
    }
    let normal = synth_one(
        n_normal_windows * width,
        width,
        false,
        seed::rng(seed, seed::tag::SYNTH_NORMAL),
        Label::Normal,
    );
    let fault = synth_one(
        n_fault_windows * width,
        width,
        true,
        seed::rng(seed, seed::tag::SYNTH_FAULT),
        Label::Inner,
    );
    Ok((normal, fault))
}

fn synth_one<T: Real, R: Rng>(
    len: usize,
    width: usize,
    with_impulses: bool,
    mut rng: R,
    label: Label,
) -> RawSignal<T> {
    use synth_params::*;
    let period = (width / 4).max(1);
    let two_pi = std::f64::consts::TAU;
    let mut samples = Vec::with_capacity(len);
    for t in 0..len {
        let tf = t as f64;
        let mut v = CARRIER_AMP * (two_pi * CARRIER_FREQ * tf).sin()
            + SECOND_AMP * (two_pi * SECOND_FREQ * tf).sin();
        let noise: f64 = StandardNormal.sample(&mut rng);
        v += NOISE_STD * noise;
        if with_impulses {
            let phase = t % period;
            v += IMPULSE_AMP_FACTOR * CARRIER_AMP * (-(phase as f64) / IMPULSE_DECAY).exp();
        }
        samples.push(real(v));
    }
    RawSignal {
        samples,
        sample_rate: 12_000.0,
        label,
        fault_diameter: None,
    }
}

/// Write a signal as a one-value-per-line CSV (no header).
pub fn write_signal_csv<T: Real>(signal: &RawSignal<T>, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(signal.samples.len() * 8);
    for v in &signal.samples {
        out.push_str(&format!("{v}\n"));
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a raw record, dispatching on extension: `.mat` goes through the
/// MAT-v5 reader, everything else is read as CSV.
pub fn load_signal<T: Real>(path: &Path, label: Label, mat_var: &str) -> Result<RawSignal<T>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mat") => load_mat_v5(path, mat_var, label),
        _ => load_csv(path, label),
    }
}

// Used by tests and downstream sanity checks: population kurtosis of a slice.
#[cfg(test)]
fn kurtosis<T: Real>(values: &[T]) -> T {
    use crate::num::real_of;
    let n = real_of::<T>(values.len());
    let mu = crate::num::mean(values);
    let m2 = values
        .iter()
        .fold(T::zero(), |a, &v| a + (v - mu) * (v - mu))
        / n;
    let m4 = values.iter().fold(T::zero(), |a, &v| {
        let d = v - mu;
        a + d * d * d * d
    }) / n;
    if m2 < real(1e-12) {
        T::zero()
    } else {
        m4 / (m2 * m2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::NamedTempFile;

    fn tmp_csv(contents: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_csv_plain_values() {
        let f = tmp_csv("1.0\n-2.5\n");
        let sig: RawSignal<f64> = load_csv(f.path(), Label::Normal).unwrap();
        assert_eq!(sig.samples, vec![1.0, -2.5]);
    }

    #[test]
    fn load_csv_skips_header() {
        let f = tmp_csv("DE_time\n0.1\n0.2\n0.3\n");
        let sig: RawSignal<f64> = load_csv(f.path(), Label::Normal).unwrap();
        assert_eq!(sig.samples.len(), 3);
    }

    #[test]
    fn load_csv_reports_bad_row() {
        let f = tmp_csv("1\n2\n3\n4\n5\n6\nabc\n8\n");
        let err = load_csv::<f64>(f.path(), Label::Normal).unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 7),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_csv_empty_file_errors() {
        let f = tmp_csv("");
        assert!(load_csv::<f64>(f.path(), Label::Normal).is_err());
    }

    #[test]
    fn load_csv_crlf() {
        let f = tmp_csv("value\r\n1.5\r\n2.5\r\n");
        let sig: RawSignal<f64> = load_csv(f.path(), Label::Normal).unwrap();
        assert_eq!(sig.samples, vec![1.5, 2.5]);
    }

    #[test]
    fn slice_window_counts_match_protocol() {
        let sig = RawSignal::<f64>::new(vec![0.5; 243_938], 12_000.0, Label::Normal).unwrap();
        let windows = slice_windows(&sig, 300).unwrap();
        assert_eq!(windows.len(), 813);

        let sig = RawSignal::<f64>::new(vec![0.5; 120_000], 12_000.0, Label::Inner).unwrap();
        assert_eq!(slice_windows(&sig, 300).unwrap().len(), 400);
    }

    #[test]
    fn slice_too_short_errors() {
        let sig = RawSignal::<f64>::new(vec![0.5; 299], 12_000.0, Label::Normal).unwrap();
        assert!(slice_windows(&sig, 300).is_err());
    }

    #[test]
    fn slices_tile_the_prefix() {
        let samples: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        let sig = RawSignal::new(samples.clone(), 1.0, Label::Normal).unwrap();
        let windows = slice_windows(&sig, 300).unwrap();
        let rebuilt: Vec<f64> = windows.iter().flat_map(|w| w.values.clone()).collect();
        assert_eq!(rebuilt, samples[..900]);
        assert_eq!(windows[2].source_offset, 600);
    }

    #[test]
    fn assemble_counts_and_no_duplicates() {
        let normals: Vec<Window<f64>> = (0..813)
            .map(|i| Window {
                values: vec![i as f64; 8],
                label: Label::Normal,
                source_offset: i * 8,
            })
            .collect();
        let faults: Vec<Window<f64>> = (0..400)
            .map(|i| Window {
                values: vec![-(i as f64); 8],
                label: Label::Inner,
                source_offset: i * 8,
            })
            .collect();
        let set = assemble_dataset(&normals, &faults, 800, 60, 7).unwrap();
        assert_eq!(set.windows.len(), 860);
        assert_eq!(set.n_normal, 800);
        assert_eq!(set.n_fault, 60);
        assert!(set.windows[..800].iter().all(|w| w.label == Label::Normal));
        assert!(set.windows[800..].iter().all(|w| w.label == Label::Inner));

        // no fault chosen twice (brute-force scan over source identity)
        let offsets: Vec<usize> = set.windows[800..].iter().map(|w| w.source_offset).collect();
        for (i, a) in offsets.iter().enumerate() {
            for b in &offsets[i + 1..] {
                assert_ne!(a, b, "fault window repeated");
            }
        }
        // original relative order preserved
        assert!(offsets.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn assemble_zero_faults() {
        let normals: Vec<Window<f64>> = (0..800)
            .map(|i| Window {
                values: vec![0.0; 8],
                label: Label::Normal,
                source_offset: i,
            })
            .collect();
        let set = assemble_dataset(&normals, &[], 800, 0, 1).unwrap();
        assert_eq!(set.windows.len(), 800);
    }

    #[test]
    fn assemble_is_deterministic() {
        let normals: Vec<Window<f64>> = (0..100)
            .map(|i| Window {
                values: vec![i as f64; 8],
                label: Label::Normal,
                source_offset: i,
            })
            .collect();
        let faults: Vec<Window<f64>> = (0..50)
            .map(|i| Window {
                values: vec![-(i as f64); 8],
                label: Label::Outer,
                source_offset: i,
            })
            .collect();
        let a = assemble_dataset(&normals, &faults, 90, 10, 99).unwrap();
        let b = assemble_dataset(&normals, &faults, 90, 10, 99).unwrap();
        assert_eq!(a.windows, b.windows);
        let c = assemble_dataset(&normals, &faults, 90, 10, 100).unwrap();
        assert_ne!(
            a.windows[90..].iter().map(|w| w.source_offset).collect::<Vec<_>>(),
            c.windows[90..].iter().map(|w| w.source_offset).collect::<Vec<_>>(),
        );
    }

    #[test]
    fn assemble_insufficient_errors() {
        let normals: Vec<Window<f64>> = vec![];
        assert!(assemble_dataset::<f64>(&normals, &[], 1, 0, 0).is_err());
    }

    #[test]
    fn synth_lengths_and_determinism() {
        let (n, f) = synth_signals::<f64>(800, 60, 300, 1).unwrap();
        assert_eq!(n.samples.len(), 240_000);
        assert_eq!(f.samples.len(), 18_000);

        let (n2, f2) = synth_signals::<f64>(800, 60, 300, 1).unwrap();
        assert_eq!(n.samples, n2.samples);
        assert_eq!(f.samples, f2.samples);

        let (n3, _) = synth_signals::<f64>(800, 60, 300, 2).unwrap();
        assert_ne!(n.samples, n3.samples);
    }

    #[test]
    fn synth_fault_windows_have_higher_kurtosis() {
        let (normal, fault) = synth_signals::<f64>(50, 50, 300, 11).unwrap();
        let nw = slice_windows(&normal, 300).unwrap();
        let fw = slice_windows(&fault, 300).unwrap();
        let mean_k = |ws: &[Window<f64>]| {
            ws.iter().map(|w| kurtosis(&w.values)).sum::<f64>() / ws.len() as f64
        };
        assert!(
            mean_k(&fw) > mean_k(&nw),
            "fault kurtosis {} <= normal {}",
            mean_k(&fw),
            mean_k(&nw)
        );
    }

    #[test]
    fn signal_csv_roundtrip() {
        let (n, _) = synth_signals::<f64>(2, 1, 32, 5).unwrap();
        let f = NamedTempFile::new().unwrap();
        write_signal_csv(&n, f.path()).unwrap();
        let back: RawSignal<f64> = load_csv(f.path(), Label::Normal).unwrap();
        assert_eq!(back.samples, n.samples);
    }
}
