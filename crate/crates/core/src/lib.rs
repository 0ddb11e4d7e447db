//! Bearing-fault detection on vibration signals.
//!
//! The pipeline slices raw acceleration records into fixed windows,
//! converts each window into a 23-dimensional feature vector (time-domain
//! statistics, Daubechies sub-band energies, EEMD mode energies), links
//! the standardized rows into a cosine k-nearest-neighbor attributed
//! graph, trains a GraphSAGE-style autoencoder on it, and scores each
//! node by its reconstruction error. Higher score = more likely faulty.
//!
//! Classic detectors (plain autoencoder, LOF, k-NN distance, isolation
//! forest) are included for benchmarking, plus AUC/ACC/DR evaluation.
//!
//! All numeric code is generic over the scalar type via [`num::Real`];
//! the `*64` aliases below pin `f64`, which is what the CLI uses.

#![allow(clippy::needless_range_loop)] // index loops couple multiple arrays throughout

pub mod baselines;
pub mod diagnose;
pub mod error;
pub mod features;
pub mod graph;
pub mod ingest;
pub mod nnmath;
pub mod num;
pub mod sage;
pub mod seed;

pub use error::{Error, Result};
pub use num::Real;

/// `f64` instantiations of the pipeline types.
pub type RawSignal64 = ingest::RawSignal<f64>;
pub type Window64 = ingest::Window<f64>;
pub type WindowSet64 = ingest::WindowSet<f64>;
pub type FeatureVector64 = features::FeatureVector<f64>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type AttributedGraph64 = graph::AttributedGraph<f64>;
pub type SageModel64 = sage::SageModel<f64>;
pub type FaultReport64 = diagnose::FaultReport<f64>;
