//! `gsabfd` — bearing-fault detection pipeline on vibration data.
//!
//! The pipeline is staged through files so every intermediate can be
//! inspected: `synth`/`convert` produce feature CSVs, `graph` links them,
//! `train` fits the model, `score` writes per-node fault reports, `eval`
//! prints metrics, and `bench`/`sweep` reproduce the comparison and
//! sensitivity tables.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::SweepParam;
use config::RunConfig;
use gsabfd_core::error::Result;
use gsabfd_core::ingest::Label;

#[derive(Parser)]
#[command(name = "gsabfd", version, about = "graph-based bearing fault detection")]
struct Cli {
    /// Flat key = value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed; fully determines every stochastic choice.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    window_width: Option<usize>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    sampling_ratio: Option<f64>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    hidden_dim: Option<usize>,
    #[arg(long, global = true)]
    embed_dim: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    contamination: Option<f64>,
    #[arg(long, global = true)]
    weighted_mean: Option<bool>,
    #[arg(long, global = true)]
    n_normal: Option<usize>,
    #[arg(long, global = true)]
    n_fault: Option<usize>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    mat_var: Option<String>,
    #[arg(long, global = true)]
    trees: Option<usize>,
    #[arg(long, global = true)]
    subsample: Option<usize>,
    #[arg(long, global = true)]
    eemd_ensemble: Option<usize>,
    #[arg(long, global = true)]
    eemd_noise_ratio: Option<f64>,
    #[arg(long, global = true)]
    eemd_max_sift_iters: Option<usize>,
    #[arg(long, global = true)]
    eemd_sift_sd_threshold: Option<f64>,
    #[arg(long, global = true)]
    eemd_max_imfs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate deterministic synthetic normal/fault signals.
    Synth,
    /// Slice raw records, assemble the dataset, extract and standardize
    /// features.
    Convert {
        /// Normal-condition records (CSV or MAT), windows pooled in order.
        #[arg(long, required = true, num_args = 1..)]
        normal: Vec<PathBuf>,
        /// Fault-condition records.
        #[arg(long, num_args = 0..)]
        fault: Vec<PathBuf>,
        /// Ground-truth label for the fault records.
        #[arg(long, default_value = "inner")]
        fault_label: Label,
    },
    /// Build the cosine k-NN attributed graph from a feature CSV.
    Graph {
        #[arg(long)]
        features: PathBuf,
        /// Also export the dense initialized matrix (small graphs only).
        #[arg(long)]
        dense: bool,
    },
    /// Train the graph autoencoder.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Standardization sidecar to embed in the checkpoint
        /// (default: features_stats.json beside the features file).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Score nodes with a trained checkpoint.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        graph: PathBuf,
    },
    /// Summarize a fault report into metrics.
    Eval {
        #[arg(long)]
        report: PathBuf,
    },
    /// Run every method on one dataset, repeated and averaged.
    Bench {
        #[arg(long)]
        features: PathBuf,
        /// Dataset name recorded in the output rows.
        #[arg(long, default_value = "synthetic")]
        dataset: String,
    },
    /// Sensitivity sweep over k or the sampling ratio.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        #[arg(long)]
        features: PathBuf,
        /// Comma-separated grid; defaults to the standard ranges
        /// (k: 10..100 step 10, ratio: 0.1..1.0 step 0.1).
        #[arg(long)]
        grid: Option<String>,
    },
}

impl Cli {
    fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        macro_rules! merge {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        merge!(
            window_width,
            k,
            sampling_ratio,
            depth,
            hidden_dim,
            embed_dim,
            epochs,
            lr,
            seed,
            contamination,
            weighted_mean,
            n_normal,
            n_fault,
            reps,
            mat_var,
            trees,
            subsample,
            eemd_ensemble,
            eemd_noise_ratio,
            eemd_max_sift_iters,
            eemd_sift_sd_threshold,
            eemd_max_imfs
        );
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve_config()?;
    let out = &cli.out;
    match &cli.command {
        Command::Synth => commands::cmd_synth(&cfg, out),
        Command::Convert {
            normal,
            fault,
            fault_label,
        } => commands::cmd_convert(&cfg, normal, fault, *fault_label, out),
        Command::Graph { features, dense } => commands::cmd_graph(&cfg, features, *dense, out),
        Command::Train {
            features,
            graph,
            stats,
        } => commands::cmd_train(&cfg, features, graph, stats.as_deref(), out),
        Command::Score {
            checkpoint,
            features,
            graph,
        } => commands::cmd_score(&cfg, checkpoint, features, graph, out),
        Command::Eval { report } => commands::cmd_eval(report, out),
        Command::Bench { features, dataset } => commands::cmd_bench(&cfg, features, dataset, out),
        Command::Sweep {
            param,
            features,
            grid,
        } => commands::cmd_sweep(&cfg, *param, grid.as_deref(), features, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
