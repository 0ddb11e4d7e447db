//! The eight pipeline commands. Each one reads files named on the
//! command line, calls into the core crate, and writes its artifacts
//! under the output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gsabfd_core::baselines::{self, AeHyper};
use gsabfd_core::diagnose::{self, FaultReport};
use gsabfd_core::error::{Error, Result};
use gsabfd_core::features::{self, FeatureMatrix};
use gsabfd_core::graph::{self, AttributedGraph};
use gsabfd_core::ingest::{self, Label};
use gsabfd_core::sage::{self, EncodeMode};
use gsabfd_core::seed;

use crate::config::{out_path, RunConfig};

fn require_exists(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    Ok(())
}

fn read_features(path: &Path) -> Result<FeatureMatrix<f64>> {
    require_exists(path)?;
    features::read_features_csv(path)
}

fn read_graph(path: &Path, m: usize) -> Result<AttributedGraph<f64>> {
    require_exists(path)?;
    graph::read_graph_csv(path, m)
}

/// Sample mean and (n-1) standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// synth / convert
// ---------------------------------------------------------------------------

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (normal, fault) =
        ingest::synth_signals::<f64>(cfg.n_normal, cfg.n_fault, cfg.window_width, cfg.seed)?;
    let normal_path = out_path(out, "normal.csv")?;
    let fault_path = out_path(out, "fault.csv")?;
    ingest::write_signal_csv(&normal, &normal_path)?;
    ingest::write_signal_csv(&fault, &fault_path)?;
    println!(
        "wrote {} ({} samples) and {} ({} samples)",
        normal_path.display(),
        normal.samples.len(),
        fault_path.display(),
        fault.samples.len()
    );
    Ok(())
}

pub fn cmd_convert(
    cfg: &RunConfig,
    normal_paths: &[PathBuf],
    fault_paths: &[PathBuf],
    fault_label: Label,
    out: &Path,
) -> Result<()> {
    for p in normal_paths.iter().chain(fault_paths) {
        require_exists(p)?;
    }
    if normal_paths.is_empty() {
        return Err(Error::InvalidParam {
            name: "normal",
            message: "at least one normal input is required".into(),
        });
    }

    let mut normals = Vec::new();
    for p in normal_paths {
        let sig = ingest::load_signal::<f64>(p, Label::Normal, &cfg.mat_var)?;
        normals.extend(ingest::slice_windows(&sig, cfg.window_width)?);
    }
    let mut faults = Vec::new();
    for p in fault_paths {
        let sig = ingest::load_signal::<f64>(p, fault_label, &cfg.mat_var)?;
        faults.extend(ingest::slice_windows(&sig, cfg.window_width)?);
    }

    let set = ingest::assemble_dataset(&normals, &faults, cfg.n_normal, cfg.n_fault, cfg.seed)?;
    let raw = features::extract_matrix(&set.windows, &cfg.eemd_params(), cfg.seed)?;
    let standardized = features::standardize(&raw)?;

    let features_path = out_path(out, "features.csv")?;
    features::write_features_csv(&standardized, &features_path)?;
    let stats_path = out_path(out, "features_stats.json")?;
    features::write_stats_json(standardized.norm_stats.as_ref().unwrap(), &stats_path)?;
    // provenance: the resolved configuration that produced this dataset
    let cfg_path = out_path(out, "run_config.txt")?;
    std::fs::write(&cfg_path, cfg.to_file_string()).map_err(|source| Error::Io {
        path: cfg_path,
        source,
    })?;
    println!(
        "wrote {} ({} rows: {} normal + {} fault) and {}",
        features_path.display(),
        standardized.m(),
        set.n_normal,
        set.n_fault,
        stats_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// graph / train / score / eval
// ---------------------------------------------------------------------------

pub fn cmd_graph(cfg: &RunConfig, features_path: &Path, dense: bool, out: &Path) -> Result<()> {
    let matrix = read_features(features_path)?;
    let g = graph::build_graph(&matrix, cfg.k)?;
    let graph_path = out_path(out, "graph.csv")?;
    graph::write_graph_csv(&g, &graph_path)?;
    println!(
        "wrote {} ({} nodes, out-degree {})",
        graph_path.display(),
        g.m,
        g.k
    );
    if dense {
        let dense_path = out_path(out, "dense_m.csv")?;
        graph::write_dense_m_csv(&g, &dense_path)?;
        println!("wrote {}", dense_path.display());
    }
    Ok(())
}

pub fn cmd_train(
    cfg: &RunConfig,
    features_path: &Path,
    graph_path: &Path,
    stats_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut matrix = read_features(features_path)?;
    // Attach the standardization sidecar so the checkpoint can score new
    // data: an explicit --stats wins, otherwise look next to features.csv.
    let sidecar = stats_path.map(Path::to_path_buf).or_else(|| {
        let candidate = features_path.with_file_name("features_stats.json");
        candidate.exists().then_some(candidate)
    });
    if let Some(p) = sidecar {
        matrix.norm_stats = Some(features::read_stats_json(&p)?);
    }
    let g = read_graph(graph_path, matrix.m())?;
    let outcome = sage::train(&g, &matrix, &cfg.sage_hyper())?;

    let ckpt_path = out_path(out, "checkpoint.json")?;
    sage::save_checkpoint(&outcome.model, &outcome.adam, &ckpt_path)?;
    let log_path = out_path(out, "train_log.csv")?;
    sage::write_loss_curve(&outcome.loss_curve, &log_path)?;
    println!(
        "wrote {} and {} (final loss {})",
        ckpt_path.display(),
        log_path.display(),
        outcome.loss_curve.last().unwrap()
    );
    Ok(())
}

/// Score a feature matrix with a trained model; returns the report and
/// the wall-clock seconds spent in the scoring pipeline (data load
/// excluded).
pub fn score_with_model(
    model: &gsabfd_core::SageModel64,
    g: &AttributedGraph<f64>,
    matrix: &FeatureMatrix<f64>,
    contamination: f64,
) -> Result<FaultReport<f64>> {
    let x = matrix.to_dense();
    let started = Instant::now();
    let xhat = sage::reconstruct(g, &x, model, EncodeMode::Inference)?;
    let scores = diagnose::fault_degree(&x, &xhat)?;
    let runtime = started.elapsed().as_secs_f64();
    diagnose::evaluate(&scores, matrix.labels.as_deref(), contamination, Some(runtime))
}

pub fn cmd_score(
    cfg: &RunConfig,
    checkpoint_path: &Path,
    features_path: &Path,
    graph_path: &Path,
    out: &Path,
) -> Result<()> {
    require_exists(checkpoint_path)?;
    let ckpt = sage::load_checkpoint::<f64>(checkpoint_path)?;
    let matrix = read_features(features_path)?;
    let g = read_graph(graph_path, matrix.m())?;
    let report = score_with_model(&ckpt.model, &g, &matrix, cfg.contamination)?;

    let json_path = out_path(out, "report.json")?;
    diagnose::write_report_json(&report, &json_path)?;
    let csv_path = out_path(out, "report.csv")?;
    diagnose::write_report_csv(&report, &csv_path)?;
    let runtime = report
        .metrics
        .as_ref()
        .and_then(|m| m.runtime_seconds)
        .unwrap_or(0.0);
    println!(
        "wrote {} and {} ({} nodes flagged, scoring took {runtime:.3}s)",
        json_path.display(),
        csv_path.display(),
        report.flags.iter().filter(|&&f| f).count()
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |x| format!("{x:.4}"))
}

pub fn cmd_eval(report_path: &Path, out: &Path) -> Result<()> {
    require_exists(report_path)?;
    let report = diagnose::read_report_json::<f64>(report_path)?;
    let metrics_path = out_path(out, "metrics.csv")?;
    let m = report.metrics.clone().unwrap_or(diagnose::Metrics {
        auc: None,
        acc: None,
        dr: None,
        runtime_seconds: None,
    });
    let mut text = String::from("auc,acc,dr,runtime_seconds\n");
    let cell = |v: Option<f64>| v.map_or_else(|| "na".to_string(), |x| format!("{x}"));
    text.push_str(&format!(
        "{},{},{},{}\n",
        cell(m.auc),
        cell(m.acc),
        cell(m.dr),
        cell(m.runtime_seconds)
    ));
    std::fs::write(&metrics_path, text).map_err(|source| Error::Io {
        path: metrics_path.clone(),
        source,
    })?;
    println!(
        "AUC={}, ACC={}, DR={}, time={}s",
        fmt_opt(m.auc),
        fmt_opt(m.acc),
        fmt_opt(m.dr),
        fmt_opt(m.runtime_seconds)
    );
    println!("wrote {}", metrics_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bench / sweep
// ---------------------------------------------------------------------------

const BENCH_METHODS: [&str; 5] = ["gsabfd", "ae", "lof", "knn", "iforest"];

/// One full GSABFD run (graph build + train + score) on a prepared
/// matrix; returns (auc, acc, dr, runtime_seconds).
fn run_gsabfd_once(
    cfg: &RunConfig,
    matrix: &FeatureMatrix<f64>,
    truth: &[Label],
    run_seed: u64,
) -> Result<(f64, f64, f64, f64)> {
    let started = Instant::now();
    let g = graph::build_graph(matrix, cfg.k)?;
    let mut hyper = cfg.sage_hyper();
    hyper.seed = run_seed;
    let outcome = sage::train(&g, matrix, &hyper)?;
    let x = matrix.to_dense();
    let xhat = sage::reconstruct(&g, &x, &outcome.model, EncodeMode::Inference)?;
    let scores = diagnose::fault_degree(&x, &xhat)?;
    let runtime = started.elapsed().as_secs_f64();
    let report = diagnose::evaluate(&scores, Some(truth), cfg.contamination, Some(runtime))?;
    let m = report.metrics.unwrap();
    Ok((m.auc.unwrap(), m.acc.unwrap(), m.dr.unwrap(), runtime))
}

fn run_baseline_once(
    method: &str,
    cfg: &RunConfig,
    matrix: &FeatureMatrix<f64>,
    truth: &[Label],
    run_seed: u64,
) -> Result<(f64, f64, f64, f64)> {
    let started = Instant::now();
    let scores = match method {
        "ae" => baselines::ae_scores(
            matrix,
            &AeHyper {
                hidden_dim: cfg.hidden_dim,
                embed_dim: cfg.embed_dim,
                epochs: cfg.epochs,
                lr: cfg.lr,
            },
            run_seed,
        )?,
        "lof" => baselines::lof_scores(matrix, cfg.k)?,
        "knn" => baselines::knn_scores(matrix, cfg.k)?,
        "iforest" => {
            baselines::iforest_scores(matrix, cfg.trees, cfg.subsample.min(matrix.m()), run_seed)?
        }
        other => return Err(Error::Invalid(format!("unknown method {other}"))),
    };
    let runtime = started.elapsed().as_secs_f64();
    let report = diagnose::evaluate(&scores, Some(truth), cfg.contamination, Some(runtime))?;
    let m = report.metrics.unwrap();
    Ok((m.auc.unwrap(), m.acc.unwrap(), m.dr.unwrap(), runtime))
}

pub fn cmd_bench(cfg: &RunConfig, features_path: &Path, dataset: &str, out: &Path) -> Result<()> {
    let matrix = read_features(features_path)?;
    let truth = matrix.labels.clone().ok_or_else(|| {
        Error::Invalid("bench needs a labeled feature CSV (label column missing)".into())
    })?;

    let mut rows = String::from(
        "method,dataset,auc,auc_std,acc,acc_std,dr,dr_std,runtime_seconds,runtime_std\n",
    );
    for method in BENCH_METHODS {
        let mut aucs = Vec::new();
        let mut accs = Vec::new();
        let mut drs = Vec::new();
        let mut times = Vec::new();
        let mut failed = false;
        for rep in 0..cfg.reps {
            let run_seed = seed::derive2(cfg.seed, seed::tag::BENCH_REP, rep as u64);
            let result = if method == "gsabfd" {
                run_gsabfd_once(cfg, &matrix, &truth, run_seed)
            } else {
                run_baseline_once(method, cfg, &matrix, &truth, run_seed)
            };
            match result {
                Ok((auc, acc, dr, time)) => {
                    aucs.push(auc);
                    accs.push(acc);
                    drs.push(dr);
                    times.push(time);
                }
                Err(e) => {
                    eprintln!("bench: {method} rep {rep} failed: {e}");
                    failed = true;
                    break;
                }
            }
        }
        if failed || aucs.is_empty() {
            rows.push_str(&format!("{method},{dataset},nan,nan,nan,nan,nan,nan,nan,nan\n"));
            continue;
        }
        let (am, asd) = mean_std(&aucs);
        let (cm, csd) = mean_std(&accs);
        let (dm, dsd) = mean_std(&drs);
        let (tm, tsd) = mean_std(&times);
        rows.push_str(&format!(
            "{method},{dataset},{am},{asd},{cm},{csd},{dm},{dsd},{tm},{tsd}\n"
        ));
        println!(
            "{method}: AUC={am:.4}±{asd:.4}, ACC={cm:.4}, DR={dm:.4}, time={tm:.3}s ({} reps)",
            aucs.len()
        );
    }
    let bench_path = out_path(out, "bench.csv")?;
    std::fs::write(&bench_path, rows).map_err(|source| Error::Io {
        path: bench_path.clone(),
        source,
    })?;
    println!("wrote {}", bench_path.display());
    Ok(())
}

/// Which hyperparameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    SamplingRatio,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "k" => Ok(SweepParam::K),
            "sampling-ratio" | "sampling_ratio" => Ok(SweepParam::SamplingRatio),
            other => Err(format!("unknown sweep param {other:?} (use k or sampling-ratio)")),
        }
    }
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    param: SweepParam,
    grid: Option<&str>,
    features_path: &Path,
    out: &Path,
) -> Result<()> {
    let matrix = read_features(features_path)?;
    let truth = matrix.labels.clone().ok_or_else(|| {
        Error::Invalid("sweep needs a labeled feature CSV (label column missing)".into())
    })?;

    let values: Vec<f64> = match grid {
        Some(spec) => spec
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| Error::InvalidParam {
                    name: "grid",
                    message: format!("bad grid value {v:?}"),
                })
            })
            .collect::<Result<_>>()?,
        None => match param {
            SweepParam::K => (1..=10).map(|i| (i * 10) as f64).collect(),
            SweepParam::SamplingRatio => (1..=10).map(|i| i as f64 / 10.0).collect(),
        },
    };
    // range checks up front so a bad grid fails before any work
    for &v in &values {
        match param {
            SweepParam::K => {
                let k = v as usize;
                if v.fract() != 0.0 || k < 1 || k >= matrix.m() {
                    return Err(Error::InvalidParam {
                        name: "grid",
                        message: format!("k = {v} outside 1..{}", matrix.m()),
                    });
                }
            }
            SweepParam::SamplingRatio => {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::InvalidParam {
                        name: "grid",
                        message: format!("sampling ratio {v} outside (0, 1]"),
                    });
                }
            }
        }
    }

    let mut rows = String::from("value,auc_mean,auc_std\n");
    for (vi, &value) in values.iter().enumerate() {
        let mut point_cfg = cfg.clone();
        match param {
            SweepParam::K => point_cfg.k = value as usize,
            SweepParam::SamplingRatio => point_cfg.sampling_ratio = value,
        }
        let mut aucs = Vec::new();
        for rep in 0..cfg.reps {
            let run_seed = seed::derive2(
                cfg.seed,
                seed::tag::SWEEP,
                (vi * 10_000 + rep) as u64,
            );
            let (auc, _, _, _) = run_gsabfd_once(&point_cfg, &matrix, &truth, run_seed)?;
            aucs.push(auc);
        }
        let (mean, std) = mean_std(&aucs);
        rows.push_str(&format!("{value},{mean},{std}\n"));
        println!("{param:?} = {value}: AUC {mean:.4} ± {std:.4}");
    }
    let name = match param {
        SweepParam::K => "sweep_k.csv",
        SweepParam::SamplingRatio => "sweep_sampling_ratio.csv",
    };
    let sweep_path = out_path(out, name)?;
    std::fs::write(&sweep_path, rows).map_err(|source| Error::Io {
        path: sweep_path.clone(),
        source,
    })?;
    println!("wrote {}", sweep_path.display());
    Ok(())
}
