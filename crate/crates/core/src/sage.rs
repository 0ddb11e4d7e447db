//! GraphSAGE-style encoder with a fully connected decoder, trained to
//! reconstruct the standardized feature rows.
//!
//! Each hop samples a subset of a node's k stored neighbors, averages the
//! node's own vector with the sampled neighbor vectors (the self-loop of
//! the initialized adjacency matrix lives here, not in the neighbor
//! lists), concatenates that aggregate back onto the node's vector, and
//! applies a learned affine map plus activation. The final hop is L2
//! row-normalized. Edge weights are carried by the graph but the default
//! aggregation is the unweighted mean; `weighted_mean` switches the
//! experimental weighted variant on.
//!
//! Training is full-batch, single-threaded, and completely determined by
//! the seed: layer init, per-epoch neighbor draws, and the fixed reduction
//! order leave no room for run-to-run drift.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, NormStats, FEATURE_DIM};
use crate::graph::AttributedGraph;
use crate::nnmath::{mse_loss, Activation, AdamState, DenseLayer, GradCheckable};
use crate::num::{real, real_of, Real};
use crate::seed;

/// Training and architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageHyper {
    /// Aggregation hops.
    pub depth: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    /// Graph neighbor count (recorded for provenance; the graph carries it).
    pub k: usize,
    /// Fraction of the k neighbors sampled per layer per epoch.
    pub sampling_ratio: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Use the stored edge weights in the aggregation instead of the
    /// unweighted mean.
    pub weighted_mean: bool,
}

impl Default for SageHyper {
    fn default() -> Self {
        Self {
            depth: 2,
            hidden_dim: 32,
            embed_dim: 16,
            k: 20,
            sampling_ratio: 0.5,
            epochs: 100,
            lr: 0.003,
            seed: 42,
            weighted_mean: false,
        }
    }
}

impl SageHyper {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::InvalidParam {
                name: "depth",
                message: "must be >= 1".into(),
            });
        }
        if self.hidden_dim < 1 || self.embed_dim < 1 {
            return Err(Error::InvalidParam {
                name: "dims",
                message: "must be >= 1".into(),
            });
        }
        if !(self.sampling_ratio > 0.0 && self.sampling_ratio <= 1.0) {
            return Err(Error::InvalidParam {
                name: "sampling_ratio",
                message: format!("need 0 < ratio <= 1, got {}", self.sampling_ratio),
            });
        }
        if self.epochs < 1 {
            return Err(Error::InvalidParam {
                name: "epochs",
                message: "must be >= 1".into(),
            });
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::InvalidParam {
                name: "lr",
                message: "must be > 0".into(),
            });
        }
        Ok(())
    }
}

/// Encoder hops + decoder. Hop `l` maps `concat(h_v, aggregate)` of width
/// `2 * dim_l` to the next width; the decoder mirrors embed -> hidden ->
/// feature space with an identity output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SageModel<T: Real> {
    pub hops: Vec<DenseLayer<T>>,
    pub decoder: Vec<DenseLayer<T>>,
    pub hidden_activation: Activation,
    /// Diagnostic ablation: turning this off makes the identity-activation
    /// model exactly quadratic, which the gradient checker exploits.
    pub normalize_embeddings: bool,
    pub hyper: SageHyper,
    pub norm_stats: Option<NormStats<T>>,
}

/// Forward mode: inference uses full neighborhoods, training samples them
/// with a per-epoch derived stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeMode {
    Inference,
    Train { epoch: u64 },
}

const NORM_GUARD: f64 = 1e-12;

impl<T: Real> SageModel<T> {
    /// Build a model with Xavier-initialized layers from the hyper seed.
    pub fn init(hyper: &SageHyper, norm_stats: Option<NormStats<T>>) -> Result<Self> {
        hyper.validate()?;
        let mut rng = seed::rng(hyper.seed, seed::tag::MODEL_INIT);
        let mut hops = Vec::with_capacity(hyper.depth);
        let mut dim = FEATURE_DIM;
        for l in 0..hyper.depth {
            let out = if l + 1 == hyper.depth {
                hyper.embed_dim
            } else {
                hyper.hidden_dim
            };
            let mut layer = DenseLayer::zeros(2 * dim, out);
            layer.init_xavier(&mut rng);
            hops.push(layer);
            dim = out;
        }
        let mut dec1 = DenseLayer::zeros(hyper.embed_dim, hyper.hidden_dim);
        let mut dec2 = DenseLayer::zeros(hyper.hidden_dim, FEATURE_DIM);
        dec1.init_xavier(&mut rng);
        dec2.init_xavier(&mut rng);
        Ok(Self {
            hops,
            decoder: vec![dec1, dec2],
            hidden_activation: Activation::Relu,
            normalize_embeddings: true,
            hyper: hyper.clone(),
            norm_stats,
        })
    }

    fn layers(&self) -> Vec<&DenseLayer<T>> {
        self.hops.iter().chain(self.decoder.iter()).collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer<T>> {
        self.hops.iter_mut().chain(self.decoder.iter_mut()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|l| l.n_params()).sum()
    }

    /// Names for the Adam parameter blocks, two per layer (w then b).
    fn block_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.hops.len() {
            names.push(format!("hop{l}.w"));
            names.push(format!("hop{l}.b"));
        }
        for l in 0..self.decoder.len() {
            names.push(format!("decoder{l}.w"));
            names.push(format!("decoder{l}.b"));
        }
        names
    }
}

/// Number of neighbors a ratio draws from a k-list: ceil(ratio * k),
/// clamped into 1..=k.
fn sample_count(ratio: f64, k: usize) -> usize {
    let raw = ((ratio * k as f64) - 1e-9).ceil().max(1.0) as usize;
    raw.min(k).max(1)
}

/// Positions (indices into the stored neighbor list) drawn uniformly
/// without replacement, returned in stored order.
fn sample_positions<R: Rng>(k: usize, ratio: f64, rng: &mut R) -> Vec<usize> {
    let take = sample_count(ratio, k);
    if take >= k {
        return (0..k).collect();
    }
    let mut positions = rand::seq::index::sample(rng, k, take).into_vec();
    positions.sort_unstable();
    positions
}

/// Draw `ceil(ratio * k)` of node `v`'s stored neighbors uniformly without
/// replacement; `ratio = 1` returns the full list in stored order.
pub fn sample_neighbors<T: Real, R: Rng>(
    graph: &AttributedGraph<T>,
    v: usize,
    ratio: f64,
    rng: &mut R,
) -> Vec<usize> {
    sample_positions(graph.neighbors[v].len(), ratio, rng)
        .into_iter()
        .map(|p| graph.neighbors[v][p])
        .collect()
}

/// Unweighted arithmetic mean of the node's own vector and its sampled
/// neighbor vectors.
pub fn aggregate_mean<T: Real>(h_v: &[T], h_neighbors: &[&[T]]) -> Result<Vec<T>> {
    let d = h_v.len();
    for n in h_neighbors {
        if n.len() != d {
            return Err(Error::DimMismatch {
                context: "aggregate_mean",
                expected: d,
                got: n.len(),
            });
        }
    }
    let count = real_of::<T>(h_neighbors.len() + 1);
    let mut out = h_v.to_vec();
    for n in h_neighbors {
        for (slot, &v) in out.iter_mut().zip(*n) {
            *slot = *slot + v;
        }
    }
    for slot in out.iter_mut() {
        *slot = *slot / count;
    }
    Ok(out)
}

/// Mixing coefficients (self, per sampled position) for the aggregation.
fn mix_coeffs<T: Real>(
    graph: &AttributedGraph<T>,
    v: usize,
    positions: &[usize],
    weighted: bool,
) -> (T, Vec<T>) {
    if weighted {
        let mut total = T::one();
        for &p in positions {
            total = total + graph.weights[v][p];
        }
        let self_c = T::one() / total;
        let neigh = positions.iter().map(|&p| graph.weights[v][p] / total).collect();
        (self_c, neigh)
    } else {
        let c = T::one() / real_of::<T>(positions.len() + 1);
        (c, vec![c; positions.len()])
    }
}

/// Everything the backward pass needs from one forward pass.
struct Trace<T: Real> {
    /// Node representations per level: `depth + 1` matrices, h[0] = X.
    h: Vec<Vec<Vec<T>>>,
    /// Concat inputs and preactivations per hop.
    concat: Vec<Vec<Vec<T>>>,
    pre: Vec<Vec<Vec<T>>>,
    /// Sampled neighbor-list positions per hop per node.
    positions: Vec<Vec<Vec<usize>>>,
    /// Unnormalized final representations and their norms.
    norms: Vec<T>,
    /// Normalized embeddings.
    z: Vec<Vec<T>>,
    /// Decoder intermediates.
    dec_pre1: Vec<Vec<T>>,
    dec_h1: Vec<Vec<T>>,
    xhat: Vec<Vec<T>>,
}

fn draw_positions<T: Real>(
    graph: &AttributedGraph<T>,
    model: &SageModel<T>,
    mode: EncodeMode,
) -> Vec<Vec<Vec<usize>>> {
    let m = graph.m;
    match mode {
        EncodeMode::Inference => {
            let full: Vec<Vec<usize>> = (0..m)
                .map(|v| (0..graph.neighbors[v].len()).collect())
                .collect();
            vec![full; model.hyper.depth]
        }
        EncodeMode::Train { epoch } => {
            let mut rng = seed::rng2(model.hyper.seed, seed::tag::NEIGHBOR_SAMPLING, epoch);
            (0..model.hyper.depth)
                .map(|_| {
                    (0..m)
                        .map(|v| {
                            sample_positions(
                                graph.neighbors[v].len(),
                                model.hyper.sampling_ratio,
                                &mut rng,
                            )
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// One hop applied to all rows: aggregate, concat, affine, activation.
/// Returns (concat inputs, preactivations, outputs); the first two feed
/// the backward pass.
#[allow(clippy::type_complexity)]
fn hop_apply<T: Real>(
    graph: &AttributedGraph<T>,
    cur: &[Vec<T>],
    layer: &DenseLayer<T>,
    act: Activation,
    weighted: bool,
    positions: &[Vec<usize>],
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>, Vec<Vec<T>>)> {
    let m = graph.m;
    if cur.len() != m {
        return Err(Error::DimMismatch {
            context: "sage_layer rows",
            expected: m,
            got: cur.len(),
        });
    }
    let d = cur[0].len();
    let mut concat_rows = Vec::with_capacity(m);
    let mut pre_rows = Vec::with_capacity(m);
    let mut out_rows = Vec::with_capacity(m);
    for v in 0..m {
        let (self_c, neigh_c) = mix_coeffs(graph, v, &positions[v], weighted);
        let mut agg: Vec<T> = cur[v].iter().map(|&val| val * self_c).collect();
        for (&p, &c) in positions[v].iter().zip(&neigh_c) {
            let u = graph.neighbors[v][p];
            for (slot, &val) in agg.iter_mut().zip(&cur[u]) {
                *slot = *slot + val * c;
            }
        }
        let mut cat = Vec::with_capacity(2 * d);
        cat.extend_from_slice(&cur[v]);
        cat.extend_from_slice(&agg);
        let pre = layer.forward(&cat)?;
        out_rows.push(pre.iter().map(|&p| act.apply(p)).collect());
        concat_rows.push(cat);
        pre_rows.push(pre);
    }
    Ok((concat_rows, pre_rows, out_rows))
}

fn full_positions<T: Real>(graph: &AttributedGraph<T>) -> Vec<Vec<usize>> {
    (0..graph.m)
        .map(|v| (0..graph.neighbors[v].len()).collect())
        .collect()
}

/// One aggregation hop over the full neighborhoods (deterministic).
pub fn sage_layer_full<T: Real>(
    graph: &AttributedGraph<T>,
    h: &[Vec<T>],
    layer: &DenseLayer<T>,
    activation: Activation,
    weighted_mean: bool,
) -> Result<Vec<Vec<T>>> {
    let positions = full_positions(graph);
    Ok(hop_apply(graph, h, layer, activation, weighted_mean, &positions)?.2)
}

/// One aggregation hop with per-node neighbor sampling at the given
/// ratio.
pub fn sage_layer_sampled<T: Real, R: Rng>(
    graph: &AttributedGraph<T>,
    h: &[Vec<T>],
    layer: &DenseLayer<T>,
    activation: Activation,
    weighted_mean: bool,
    ratio: f64,
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    let positions: Vec<Vec<usize>> = (0..graph.m)
        .map(|v| sample_positions(graph.neighbors[v].len(), ratio, rng))
        .collect();
    Ok(hop_apply(graph, h, layer, activation, weighted_mean, &positions)?.2)
}

fn forward<T: Real>(
    graph: &AttributedGraph<T>,
    x: &[Vec<T>],
    model: &SageModel<T>,
    mode: EncodeMode,
) -> Result<Trace<T>> {
    let m = graph.m;
    if x.len() != m {
        return Err(Error::DimMismatch {
            context: "encode rows",
            expected: m,
            got: x.len(),
        });
    }
    let positions = draw_positions(graph, model, mode);
    let act = model.hidden_activation;
    let guard = real::<T>(NORM_GUARD);

    let mut h: Vec<Vec<Vec<T>>> = vec![x.to_vec()];
    let mut concat_levels = Vec::with_capacity(model.hops.len());
    let mut pre_levels = Vec::with_capacity(model.hops.len());
    for (l, layer) in model.hops.iter().enumerate() {
        let (concat_rows, pre_rows, next) = hop_apply(
            graph,
            &h[l],
            layer,
            act,
            model.hyper.weighted_mean,
            &positions[l],
        )?;
        concat_levels.push(concat_rows);
        pre_levels.push(pre_rows);
        h.push(next);
    }

    // L2 row normalization; rows below the guard stay zero.
    let last = h.last().unwrap();
    let mut norms = Vec::with_capacity(m);
    let mut z = Vec::with_capacity(m);
    for row in last {
        if !model.normalize_embeddings {
            norms.push(T::one());
            z.push(row.clone());
            continue;
        }
        let n = crate::num::norm(row);
        if n < guard {
            norms.push(T::zero());
            z.push(vec![T::zero(); row.len()]);
        } else {
            norms.push(n);
            z.push(row.iter().map(|&v| v / n).collect());
        }
    }

    // decoder: embed -> hidden (activation) -> features (identity)
    let mut dec_pre1 = Vec::with_capacity(m);
    let mut dec_h1 = Vec::with_capacity(m);
    let mut xhat = Vec::with_capacity(m);
    for row in &z {
        let pre1 = model.decoder[0].forward(row)?;
        let h1: Vec<T> = pre1.iter().map(|&p| act.apply(p)).collect();
        xhat.push(model.decoder[1].forward(&h1)?);
        dec_pre1.push(pre1);
        dec_h1.push(h1);
    }

    Ok(Trace {
        h,
        concat: concat_levels,
        pre: pre_levels,
        positions,
        norms,
        z,
        dec_pre1,
        dec_h1,
        xhat,
    })
}

/// Encode all nodes into unit-norm embeddings (zero rows stay zero).
pub fn encode<T: Real>(
    graph: &AttributedGraph<T>,
    x: &[Vec<T>],
    model: &SageModel<T>,
    mode: EncodeMode,
) -> Result<Vec<Vec<T>>> {
    Ok(forward(graph, x, model, mode)?.z)
}

/// Decode embeddings back into standardized feature space.
pub fn decode<T: Real>(z: &[Vec<T>], model: &SageModel<T>) -> Result<Vec<Vec<T>>> {
    let act = model.hidden_activation;
    let mut out = Vec::with_capacity(z.len());
    for row in z {
        let pre1 = model.decoder[0].forward(row)?;
        let h1: Vec<T> = pre1.iter().map(|&p| act.apply(p)).collect();
        out.push(model.decoder[1].forward(&h1)?);
    }
    Ok(out)
}

/// Full reconstruction pass in the given mode.
pub fn reconstruct<T: Real>(
    graph: &AttributedGraph<T>,
    x: &[Vec<T>],
    model: &SageModel<T>,
    mode: EncodeMode,
) -> Result<Vec<Vec<T>>> {
    Ok(forward(graph, x, model, mode)?.xhat)
}

/// Backward through the whole model, accumulating layer gradients.
fn backward<T: Real>(
    graph: &AttributedGraph<T>,
    model: &mut SageModel<T>,
    trace: &Trace<T>,
    d_xhat: &[Vec<T>],
) {
    let m = graph.m;
    let act = model.hidden_activation;
    let guard = real::<T>(NORM_GUARD);

    // decoder output layer (identity activation)
    let mut d_h1 = Vec::with_capacity(m);
    for v in 0..m {
        d_h1.push(model.decoder[1].backward(&trace.dec_h1[v], &d_xhat[v]));
    }
    // decoder hidden layer
    let mut d_z = Vec::with_capacity(m);
    for v in 0..m {
        let d_pre: Vec<T> = d_h1[v]
            .iter()
            .zip(&trace.dec_pre1[v])
            .map(|(&g, &p)| g * act.grad(p))
            .collect();
        d_z.push(model.decoder[0].backward(&trace.z[v], &d_pre));
    }

    // through the L2 normalization: d_u = (d_z - (d_z . z) z) / ||u||
    let last = trace.h.last().unwrap();
    let mut d_h: Vec<Vec<T>> = Vec::with_capacity(m);
    for v in 0..m {
        if !model.normalize_embeddings {
            d_h.push(d_z[v].clone());
        } else if trace.norms[v] < guard {
            d_h.push(vec![T::zero(); last[v].len()]);
        } else {
            let dz = &d_z[v];
            let z = &trace.z[v];
            let proj = crate::num::dot(dz, z);
            d_h.push(
                dz.iter()
                    .zip(z)
                    .map(|(&g, &zi)| (g - proj * zi) / trace.norms[v])
                    .collect(),
            );
        }
    }

    // hops in reverse
    for l in (0..model.hops.len()).rev() {
        let d_in = trace.h[l][0].len();
        let mut d_prev = vec![vec![T::zero(); d_in]; m];
        for v in 0..m {
            let d_pre: Vec<T> = d_h[v]
                .iter()
                .zip(&trace.pre[l][v])
                .map(|(&g, &p)| g * act.grad(p))
                .collect();
            let d_cat = model.hops[l].backward(&trace.concat[l][v], &d_pre);
            let (d_self, d_agg) = d_cat.split_at(d_in);
            let (self_c, neigh_c) =
                mix_coeffs(graph, v, &trace.positions[l][v], model.hyper.weighted_mean);
            for i in 0..d_in {
                d_prev[v][i] = d_prev[v][i] + d_self[i] + d_agg[i] * self_c;
            }
            for (&p, &c) in trace.positions[l][v].iter().zip(&neigh_c) {
                let u = graph.neighbors[v][p];
                for i in 0..d_in {
                    d_prev[u][i] = d_prev[u][i] + d_agg[i] * c;
                }
            }
        }
        d_h = d_prev;
    }
}

/// Training outcome: the model, the per-epoch loss curve, and the Adam
/// states (two blocks per layer, w then b).
pub struct TrainOutcome<T: Real> {
    pub model: SageModel<T>,
    pub loss_curve: Vec<T>,
    pub adam: Vec<AdamState<T>>,
}

/// Train a fresh model on the standardized matrix and its graph.
pub fn train<T: Real>(
    graph: &AttributedGraph<T>,
    matrix: &FeatureMatrix<T>,
    hyper: &SageHyper,
) -> Result<TrainOutcome<T>> {
    let x = matrix.to_dense();
    let mut model = SageModel::init(hyper, matrix.norm_stats.clone())?;
    let lr = real::<T>(hyper.lr);
    let names = model.block_names();
    let mut adam: Vec<AdamState<T>> = model
        .layers()
        .iter()
        .flat_map(|l| [AdamState::new(l.w.len()), AdamState::new(l.b.len())])
        .collect();

    let mut loss_curve = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let trace = forward(graph, &x, &model, EncodeMode::Train { epoch: epoch as u64 })?;
        let loss = mse_loss(&trace.xhat, &x)?;
        if !loss.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                what: "training loss",
                epoch,
            });
        }
        for layer in model.layers_mut() {
            layer.zero_grads();
        }
        backward(graph, &mut model, &trace, &loss.grad);
        for (li, layer) in model.layers_mut().into_iter().enumerate() {
            let gw = layer.grad_w.clone();
            let gb = layer.grad_b.clone();
            crate::nnmath::adam_step(&mut layer.w, &gw, &mut adam[2 * li], lr, &names[2 * li])?;
            crate::nnmath::adam_step(&mut layer.b, &gb, &mut adam[2 * li + 1], lr, &names[2 * li + 1])?;
        }
        loss_curve.push(loss.loss);
    }
    Ok(TrainOutcome {
        model,
        loss_curve,
        adam,
    })
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// [`GradCheckable`] wrapper: deterministic full-neighborhood loss of a
/// model against fixed inputs.
pub struct SageObjective<'a, T: Real> {
    pub model: &'a mut SageModel<T>,
    pub graph: &'a AttributedGraph<T>,
    pub x: &'a [Vec<T>],
}

impl<T: Real> SageObjective<'_, T> {
    fn locate(&self, idx: usize) -> (usize, bool, usize) {
        // (layer index, is_weight, offset)
        let mut rest = idx;
        for (li, layer) in self.model.layers().iter().enumerate() {
            if rest < layer.w.len() {
                return (li, true, rest);
            }
            rest -= layer.w.len();
            if rest < layer.b.len() {
                return (li, false, rest);
            }
            rest -= layer.b.len();
        }
        panic!("parameter index {idx} out of range");
    }
}

impl<T: Real> GradCheckable<T> for SageObjective<'_, T> {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn get_param(&self, idx: usize) -> T {
        let (li, is_w, off) = self.locate(idx);
        let layer = self.model.layers()[li];
        if is_w {
            layer.w[off]
        } else {
            layer.b[off]
        }
    }

    fn set_param(&mut self, idx: usize, value: T) {
        let (li, is_w, off) = self.locate(idx);
        let layer = self.model.layers_mut().into_iter().nth(li).unwrap();
        if is_w {
            layer.w[off] = value;
        } else {
            layer.b[off] = value;
        }
    }

    fn loss(&mut self) -> T {
        let trace = forward(self.graph, self.x, self.model, EncodeMode::Inference).unwrap();
        mse_loss(&trace.xhat, self.x).unwrap().loss
    }

    fn gradients(&mut self) -> Vec<T> {
        for layer in self.model.layers_mut() {
            layer.zero_grads();
        }
        let trace = forward(self.graph, self.x, self.model, EncodeMode::Inference).unwrap();
        let loss = mse_loss(&trace.xhat, self.x).unwrap();
        backward(self.graph, self.model, &trace, &loss.grad);
        let mut g = Vec::with_capacity(self.model.n_params());
        for layer in self.model.layers() {
            g.extend_from_slice(&layer.grad_w);
            g.extend_from_slice(&layer.grad_b);
        }
        g
    }
}

/// Max relative error between analytic and central-difference gradients
/// over every parameter, in full-neighborhood mode.
pub fn grad_check_model<T: Real>(
    model: &mut SageModel<T>,
    graph: &AttributedGraph<T>,
    x: &[Vec<T>],
    eps: T,
) -> T {
    let mut objective = SageObjective { model, graph, x };
    crate::nnmath::grad_check(&mut objective, eps)
}

// ---------------------------------------------------------------------------
// Checkpoint and training-log formats
// ---------------------------------------------------------------------------

pub const CHECKPOINT_FORMAT: &str = "gsabfd-checkpoint-v1";

/// Serialized training state: model parameters, optimizer state, and the
/// normalization stats needed to score new data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Checkpoint<T: Real> {
    pub format: String,
    pub model: SageModel<T>,
    pub adam: Vec<AdamState<T>>,
}

pub fn save_checkpoint<T: Real>(
    model: &SageModel<T>,
    adam: &[AdamState<T>],
    path: &Path,
) -> Result<()> {
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        model: model.clone(),
        adam: adam.to_vec(),
    };
    let json = serde_json::to_string(&ckpt).expect("checkpoint serialize");
    fs::write(path, json).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut ckpt: Checkpoint<T> = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if ckpt.format != CHECKPOINT_FORMAT {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unknown checkpoint format {:?}", ckpt.format),
        });
    }
    for layer in ckpt.model.layers_mut() {
        layer.restore_grad_buffers();
    }
    Ok(ckpt)
}

/// Training log as CSV `epoch,loss`.
pub fn write_loss_curve<T: Real>(curve: &[T], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (epoch, loss) in curve.iter().enumerate() {
        out.push_str(&format!("{epoch},{loss}\n"));
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::graph::build_graph;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use tempfile::NamedTempFile;

    fn random_matrix(m: usize, seed: u64) -> FeatureMatrix<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let rows = (0..m)
            .map(|_| {
                let mut values = [0.0; FEATURE_DIM];
                for v in values.iter_mut() {
                    *v = rng.random::<f64>() * 2.0 - 1.0;
                }
                FeatureVector { values }
            })
            .collect();
        FeatureMatrix {
            rows,
            labels: None,
            norm_stats: None,
        }
    }

    fn small_hyper(seed: u64) -> SageHyper {
        SageHyper {
            hidden_dim: 8,
            embed_dim: 4,
            k: 3,
            epochs: 5,
            seed,
            ..SageHyper::default()
        }
    }

    #[test]
    fn sample_full_ratio_returns_stored_order() {
        let m = random_matrix(10, 1);
        let g = build_graph(&m, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert_eq!(sample_neighbors(&g, 3, 1.0, &mut rng), g.neighbors[3]);
    }

    #[test]
    fn sample_counts_and_membership() {
        let m = random_matrix(30, 2);
        let g = build_graph(&m, 20).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let s = sample_neighbors(&g, 0, 0.1, &mut rng);
        assert_eq!(s.len(), 2); // ceil(0.1 * 20)
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 2);
        assert!(s.iter().all(|id| g.neighbors[0].contains(id)));
    }

    #[test]
    fn sampling_replays_under_fixed_seed() {
        let m = random_matrix(12, 3);
        let g = build_graph(&m, 6).unwrap();
        let draw = || {
            let mut rng = ChaCha12Rng::seed_from_u64(9);
            sample_neighbors(&g, 2, 0.5, &mut rng)
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn aggregate_mean_hand_case() {
        let n1 = [3.0, 1.0];
        let n2 = [5.0, 3.0];
        let out = aggregate_mean(&[1.0, 1.0], &[&n1, &n2]).unwrap();
        assert_eq!(out, vec![3.0, 5.0 / 3.0]);
    }

    #[test]
    fn aggregate_mean_degenerate_and_idempotent() {
        assert_eq!(aggregate_mean(&[2.0, -1.0], &[]).unwrap(), vec![2.0, -1.0]);
        let same = [4.0, 4.0];
        assert_eq!(
            aggregate_mean(&same, &[&same, &same]).unwrap(),
            vec![4.0, 4.0]
        );
        assert!(aggregate_mean(&[1.0], &[&same[..]]).is_err());
    }

    /// Hand-computed 2-node hop with a crafted weight matrix.
    #[test]
    fn two_node_layer_forward() {
        let m = random_matrix(2, 4);
        let g = build_graph(&m, 1).unwrap();
        // single hop 2*2 -> 2 on 2-wide inputs; W = [[1,0,0.5,0],[0,1,0,0.5]]
        let mut layer = DenseLayer::<f64>::zeros(4, 2);
        layer.w = vec![1.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.5];
        let x = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let out = sage_layer_full(&g, &x, &layer, Activation::Relu, false).unwrap();
        // node 0: concat([1,2], mean([1,2],[3,4])=[2,3]) -> [1+1, 2+1.5]
        assert_eq!(out[0], vec![2.0, 3.5]);
        assert_eq!(out[1], vec![4.0, 5.5]);
    }

    #[test]
    fn layer_zero_input_zero_bias_is_zero() {
        let m = random_matrix(5, 6);
        let g = build_graph(&m, 2).unwrap();
        let mut layer = DenseLayer::<f64>::zeros(6, 4);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        layer.init_xavier(&mut rng); // biases stay zero
        let x = vec![vec![0.0; 3]; 5];
        let out = sage_layer_full(&g, &x, &layer, Activation::Relu, false).unwrap();
        assert!(out.iter().all(|row| row.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn sampled_layer_at_full_ratio_matches_full_mode() {
        let m = random_matrix(12, 7);
        let g = build_graph(&m, 4).unwrap();
        let mut layer = DenseLayer::<f64>::zeros(2 * FEATURE_DIM, 5);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        layer.init_xavier(&mut rng);
        let x = m.to_dense();
        let full = sage_layer_full(&g, &x, &layer, Activation::Relu, false).unwrap();
        // ratio 1 keeps every neighbor, so the rng cannot matter
        for seed in [3u64, 4, 5] {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let sampled =
                sage_layer_sampled(&g, &x, &layer, Activation::Relu, false, 1.0, &mut rng)
                    .unwrap();
            assert_eq!(sampled, full);
        }
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_rows() {
        let m = random_matrix(4, 7);
        let g = build_graph(&m, 2).unwrap();
        let hyper = small_hyper(1);
        let model = SageModel::<f64>::init(&hyper, None).unwrap();
        let x = vec![vec![0.0; FEATURE_DIM]; 4];
        let z = encode(&g, &x, &model, EncodeMode::Inference).unwrap();
        for row in &z {
            assert!(row.iter().all(|&v| v == 0.0));
        }
        let xhat = decode(&z, &model).unwrap();
        assert_eq!(xhat.len(), 4);
        assert_eq!(xhat[0].len(), FEATURE_DIM);
    }

    #[test]
    fn embeddings_are_unit_or_zero() {
        let m = random_matrix(20, 8);
        let g = build_graph(&m, 5).unwrap();
        let model = SageModel::<f64>::init(&small_hyper(3), None).unwrap();
        let z = encode(&g, &m.to_dense(), &model, EncodeMode::Inference).unwrap();
        for row in &z {
            let n = crate::num::norm(row);
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-9, "norm {n}");
        }
    }

    #[test]
    fn inference_is_deterministic() {
        let m = random_matrix(15, 9);
        let g = build_graph(&m, 4).unwrap();
        let model = SageModel::<f64>::init(&small_hyper(5), None).unwrap();
        let x = m.to_dense();
        let a = encode(&g, &x, &model, EncodeMode::Inference).unwrap();
        let b = encode(&g, &x, &model, EncodeMode::Inference).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn twin_nodes_get_identical_embeddings() {
        // nodes 0 and 1: identical features and identical neighbor lists
        let mut matrix = random_matrix(5, 11);
        matrix.rows[1] = matrix.rows[0];
        let x = matrix.to_dense();
        let graph = AttributedGraph {
            m: 5,
            k: 2,
            neighbors: vec![
                vec![2, 3],
                vec![2, 3],
                vec![3, 4],
                vec![2, 4],
                vec![2, 3],
            ],
            weights: vec![vec![0.5, 0.5]; 5],
            self_loop: true,
        };
        let model = SageModel::<f64>::init(&small_hyper(2), None).unwrap();
        let z = encode(&graph, &x, &model, EncodeMode::Inference).unwrap();
        assert_eq!(z[0], z[1]);
    }

    #[test]
    fn node_permutation_equivariance_full_mode() {
        let matrix = random_matrix(30, 14);
        let g = build_graph(&matrix, 5).unwrap();
        let model = SageModel::<f64>::init(&small_hyper(6), None).unwrap();
        let z = encode(&g, &matrix.to_dense(), &model, EncodeMode::Inference).unwrap();

        let mut perm: Vec<usize> = (0..30).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted = FeatureMatrix {
            rows: perm.iter().map(|&old| matrix.rows[old]).collect(),
            labels: None,
            norm_stats: None,
        };
        let gp = build_graph(&permuted, 5).unwrap();
        let zp = encode(&gp, &permuted.to_dense(), &model, EncodeMode::Inference).unwrap();
        for new_i in 0..30 {
            for (a, b) in zp[new_i].iter().zip(&z[perm[new_i]]) {
                assert!((a - b).abs() < 1e-9, "node {new_i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn train_curve_and_determinism() {
        let matrix = random_matrix(25, 20);
        let g = build_graph(&matrix, 6).unwrap();
        let hyper = SageHyper {
            epochs: 12,
            k: 6,
            ..small_hyper(77)
        };
        let a = train(&g, &matrix, &hyper).unwrap();
        assert_eq!(a.loss_curve.len(), 12);
        let b = train(&g, &matrix, &hyper).unwrap();
        for (la, lb) in a.model.layers().iter().zip(b.model.layers().iter()) {
            assert_eq!(la.w, lb.w);
            assert_eq!(la.b, lb.b);
        }
        assert_eq!(a.loss_curve, b.loss_curve);
        assert!(
            a.loss_curve.last().unwrap() < a.loss_curve.first().unwrap(),
            "loss did not improve: {:?}",
            a.loss_curve
        );
    }

    #[test]
    fn training_with_weighted_mean_runs() {
        let matrix = random_matrix(12, 21);
        let g = build_graph(&matrix, 3).unwrap();
        let hyper = SageHyper {
            weighted_mean: true,
            epochs: 4,
            k: 3,
            ..small_hyper(5)
        };
        let out = train(&g, &matrix, &hyper).unwrap();
        assert_eq!(out.loss_curve.len(), 4);
        assert!(out.loss_curve.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn grad_check_default_model_10_nodes() {
        let matrix = random_matrix(10, 30);
        let g = build_graph(&matrix, 3).unwrap();
        let hyper = SageHyper {
            k: 3,
            ..small_hyper(40)
        };
        let mut model = SageModel::<f64>::init(&hyper, None).unwrap();
        let x = matrix.to_dense();
        let err = grad_check_model(&mut model, &g, &x, 1e-5);
        assert!(err <= 1e-4, "grad check error {err}");
    }

    #[test]
    fn grad_check_linear_activations_is_tight() {
        // identity activations + no normalization = quadratic loss, on
        // which central differences are exact up to O(eps^2)
        let matrix = random_matrix(8, 31);
        let g = build_graph(&matrix, 3).unwrap();
        let hyper = SageHyper {
            k: 3,
            ..small_hyper(41)
        };
        let mut model = SageModel::<f64>::init(&hyper, None).unwrap();
        model.hidden_activation = Activation::Identity;
        model.normalize_embeddings = false;
        let x = matrix.to_dense();
        let err = grad_check_model(&mut model, &g, &x, 1e-5);
        assert!(err <= 1e-7, "linear grad check error {err}");
    }

    #[test]
    fn grad_check_weighted_mean_variant() {
        let matrix = random_matrix(9, 32);
        let g = build_graph(&matrix, 3).unwrap();
        let hyper = SageHyper {
            k: 3,
            weighted_mean: true,
            ..small_hyper(42)
        };
        let mut model = SageModel::<f64>::init(&hyper, None).unwrap();
        let x = matrix.to_dense();
        let err = grad_check_model(&mut model, &g, &x, 1e-5);
        assert!(err <= 1e-4, "weighted grad check error {err}");
    }

    #[test]
    fn checkpoint_roundtrip() {
        let matrix = random_matrix(10, 50);
        let g = build_graph(&matrix, 3).unwrap();
        let hyper = SageHyper {
            epochs: 3,
            k: 3,
            ..small_hyper(51)
        };
        let out = train(&g, &matrix, &hyper).unwrap();
        let f = NamedTempFile::new().unwrap();
        save_checkpoint(&out.model, &out.adam, f.path()).unwrap();
        let back: Checkpoint<f64> = load_checkpoint(f.path()).unwrap();
        assert_eq!(back.format, CHECKPOINT_FORMAT);
        assert_eq!(back.model.hyper, out.model.hyper);
        for (a, b) in back.model.layers().iter().zip(out.model.layers().iter()) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.b, b.b);
        }
        assert_eq!(back.adam.len(), out.adam.len());
        assert_eq!(back.adam[0].step, out.adam[0].step);

        // scoring continues to work from the reloaded model
        let z = encode(&g, &matrix.to_dense(), &back.model, EncodeMode::Inference).unwrap();
        assert_eq!(z.len(), 10);
    }

    #[test]
    fn loss_curve_csv() {
        let f = NamedTempFile::new().unwrap();
        write_loss_curve(&[0.5f64, 0.25, 0.125], f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text, "epoch,loss\n0,0.5\n1,0.25\n2,0.125\n");
    }
}
