//! Run configuration: defaults, the flat key = value config file, and the
//! CLI flag overrides. Precedence is defaults < file < flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gsabfd_core::error::{Error, Result};
use gsabfd_core::features::EemdParams;
use gsabfd_core::sage::SageHyper;

/// Everything a pipeline run can be told. One struct, flat, serializable
/// back to the same key = value format it is parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub window_width: usize,
    pub k: usize,
    pub sampling_ratio: f64,
    pub depth: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub contamination: f64,
    pub weighted_mean: bool,
    pub n_normal: usize,
    pub n_fault: usize,
    pub reps: usize,
    pub mat_var: String,
    pub trees: usize,
    pub subsample: usize,
    pub eemd_ensemble: usize,
    pub eemd_noise_ratio: f64,
    pub eemd_max_sift_iters: usize,
    pub eemd_sift_sd_threshold: f64,
    pub eemd_max_imfs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window_width: 300,
            k: 20,
            sampling_ratio: 0.5,
            depth: 2,
            hidden_dim: 32,
            embed_dim: 16,
            epochs: 100,
            lr: 0.003,
            seed: 42,
            contamination: 60.0 / 860.0,
            weighted_mean: false,
            n_normal: 800,
            n_fault: 60,
            reps: 10,
            mat_var: "DE_time".to_string(),
            trees: 256,
            subsample: 256,
            eemd_ensemble: 50,
            eemd_noise_ratio: 0.2,
            eemd_max_sift_iters: 10,
            eemd_sift_sd_threshold: 0.3,
            eemd_max_imfs: 6,
        }
    }
}

fn parse_val<T: std::str::FromStr>(path: &Path, row: usize, key: &str, val: &str) -> Result<T> {
    val.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        row,
        message: format!("bad value {val:?} for key {key}"),
    })
}

impl RunConfig {
    /// Apply a flat `key = value` file on top of the current values.
    /// Lines starting with `#` and blank lines are ignored; unknown keys
    /// are an error so typos do not silently disappear.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for (idx, line) in text.lines().enumerate() {
            let row = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let key = key.trim();
            let val = val.trim().trim_matches('"');
            match key {
                "window_width" => self.window_width = parse_val(path, row, key, val)?,
                "k" => self.k = parse_val(path, row, key, val)?,
                "sampling_ratio" => self.sampling_ratio = parse_val(path, row, key, val)?,
                "depth" => self.depth = parse_val(path, row, key, val)?,
                "hidden_dim" => self.hidden_dim = parse_val(path, row, key, val)?,
                "embed_dim" => self.embed_dim = parse_val(path, row, key, val)?,
                "epochs" => self.epochs = parse_val(path, row, key, val)?,
                "lr" => self.lr = parse_val(path, row, key, val)?,
                "seed" => self.seed = parse_val(path, row, key, val)?,
                "contamination" => self.contamination = parse_val(path, row, key, val)?,
                "weighted_mean" => self.weighted_mean = parse_val(path, row, key, val)?,
                "n_normal" => self.n_normal = parse_val(path, row, key, val)?,
                "n_fault" => self.n_fault = parse_val(path, row, key, val)?,
                "reps" => self.reps = parse_val(path, row, key, val)?,
                "mat_var" => self.mat_var = val.to_string(),
                "trees" => self.trees = parse_val(path, row, key, val)?,
                "subsample" => self.subsample = parse_val(path, row, key, val)?,
                "eemd_ensemble" => self.eemd_ensemble = parse_val(path, row, key, val)?,
                "eemd_noise_ratio" => self.eemd_noise_ratio = parse_val(path, row, key, val)?,
                "eemd_max_sift_iters" => {
                    self.eemd_max_sift_iters = parse_val(path, row, key, val)?
                }
                "eemd_sift_sd_threshold" => {
                    self.eemd_sift_sd_threshold = parse_val(path, row, key, val)?
                }
                "eemd_max_imfs" => self.eemd_max_imfs = parse_val(path, row, key, val)?,
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row,
                        message: format!("unknown config key {other:?}"),
                    })
                }
            }
        }
        Ok(())
    }

    /// Render in the same format `apply_file` reads.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "window_width = {}", self.window_width);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "sampling_ratio = {}", self.sampling_ratio);
        let _ = writeln!(s, "depth = {}", self.depth);
        let _ = writeln!(s, "hidden_dim = {}", self.hidden_dim);
        let _ = writeln!(s, "embed_dim = {}", self.embed_dim);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "contamination = {}", self.contamination);
        let _ = writeln!(s, "weighted_mean = {}", self.weighted_mean);
        let _ = writeln!(s, "n_normal = {}", self.n_normal);
        let _ = writeln!(s, "n_fault = {}", self.n_fault);
        let _ = writeln!(s, "reps = {}", self.reps);
        let _ = writeln!(s, "mat_var = {}", self.mat_var);
        let _ = writeln!(s, "trees = {}", self.trees);
        let _ = writeln!(s, "subsample = {}", self.subsample);
        let _ = writeln!(s, "eemd_ensemble = {}", self.eemd_ensemble);
        let _ = writeln!(s, "eemd_noise_ratio = {}", self.eemd_noise_ratio);
        let _ = writeln!(s, "eemd_max_sift_iters = {}", self.eemd_max_sift_iters);
        let _ = writeln!(s, "eemd_sift_sd_threshold = {}", self.eemd_sift_sd_threshold);
        let _ = writeln!(s, "eemd_max_imfs = {}", self.eemd_max_imfs);
        s
    }

    pub fn eemd_params(&self) -> EemdParams {
        EemdParams {
            ensemble_size: self.eemd_ensemble,
            noise_ratio: self.eemd_noise_ratio,
            max_sift_iters: self.eemd_max_sift_iters,
            sift_sd_threshold: self.eemd_sift_sd_threshold,
            max_imfs: self.eemd_max_imfs,
        }
    }

    pub fn sage_hyper(&self) -> SageHyper {
        SageHyper {
            depth: self.depth,
            hidden_dim: self.hidden_dim,
            embed_dim: self.embed_dim,
            k: self.k,
            sampling_ratio: self.sampling_ratio,
            epochs: self.epochs,
            lr: self.lr,
            seed: self.seed,
            weighted_mean: self.weighted_mean,
        }
    }
}

/// Join an output directory with a file name, creating the directory.
pub fn out_path(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir.join(name))
}
