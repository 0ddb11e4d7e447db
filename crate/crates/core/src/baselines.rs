//! Reference anomaly detectors run against the same standardized feature
//! matrix as the graph model: a plain autoencoder, LOF, k-NN distance,
//! and an isolation forest. LOF and kNN use the Euclidean metric, their
//! canonical setting.

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FEATURE_DIM};
use crate::nnmath::{adam_step, mse_loss, Activation, AdamState, DenseLayer};
use crate::num::{dist_sq, real, real_of, Real};
use crate::seed;

/// Which reference detector to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Ae,
    Lof,
    Knn,
    IForest,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Ae => "ae",
            BaselineMethod::Lof => "lof",
            BaselineMethod::Knn => "knn",
            BaselineMethod::IForest => "iforest",
        }
    }
}

/// Autoencoder hyperparameters (mirrors the graph model minus the graph).
#[derive(Debug, Clone, PartialEq)]
pub struct AeHyper {
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for AeHyper {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            embed_dim: 16,
            epochs: 100,
            lr: 0.003,
        }
    }
}

/// One configured baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// Neighbor count for LOF / kNN.
    pub k: usize,
    /// Isolation-forest ensemble size.
    pub trees: usize,
    /// Isolation-forest subsample size.
    pub subsample: usize,
    pub ae: AeHyper,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            method: BaselineMethod::IForest,
            k: 20,
            trees: 256,
            subsample: 256,
            ae: AeHyper::default(),
            seed: 42,
        }
    }
}

/// Dispatch on the configured method.
pub fn score<T: Real>(matrix: &FeatureMatrix<T>, config: &BaselineConfig) -> Result<Vec<T>> {
    match config.method {
        BaselineMethod::Ae => ae_scores(matrix, &config.ae, config.seed),
        BaselineMethod::Lof => lof_scores(matrix, config.k),
        BaselineMethod::Knn => knn_scores(matrix, config.k),
        BaselineMethod::IForest => {
            iforest_scores(matrix, config.trees, config.subsample, config.seed)
        }
    }
}

// ---------------------------------------------------------------------------
// Plain autoencoder
// ---------------------------------------------------------------------------

/// Reconstruction scores from a plain MLP autoencoder
/// (23 -> hidden -> embed -> hidden -> 23, ReLU inside, identity out),
/// trained full-batch with Adam; same scoring rule as the graph model but
/// with no neighbor aggregation.
pub fn ae_scores<T: Real>(matrix: &FeatureMatrix<T>, hyper: &AeHyper, seed: u64) -> Result<Vec<T>> {
    if matrix.m() == 0 {
        return Err(Error::Insufficient {
            what: "rows",
            needed: 1,
            got: 0,
        });
    }
    let mut rng = seed::rng(seed, seed::tag::MODEL_INIT);
    let dims = [
        (FEATURE_DIM, hyper.hidden_dim, Activation::Relu),
        (hyper.hidden_dim, hyper.embed_dim, Activation::Relu),
        (hyper.embed_dim, hyper.hidden_dim, Activation::Relu),
        (hyper.hidden_dim, FEATURE_DIM, Activation::Identity),
    ];
    let mut layers: Vec<(DenseLayer<T>, Activation)> = dims
        .iter()
        .map(|&(i, o, a)| {
            let mut l = DenseLayer::zeros(i, o);
            l.init_xavier(&mut rng);
            (l, a)
        })
        .collect();
    let mut adam: Vec<AdamState<T>> = layers
        .iter()
        .flat_map(|(l, _)| [AdamState::new(l.w.len()), AdamState::new(l.b.len())])
        .collect();

    let x = matrix.to_dense();
    let lr = real::<T>(hyper.lr);
    for epoch in 0..hyper.epochs {
        // forward with caches
        let mut inputs: Vec<Vec<Vec<T>>> = vec![x.clone()];
        let mut pres: Vec<Vec<Vec<T>>> = Vec::with_capacity(layers.len());
        for (layer, act) in &layers {
            let cur = inputs.last().unwrap();
            let mut pre_rows = Vec::with_capacity(cur.len());
            let mut out_rows = Vec::with_capacity(cur.len());
            for row in cur {
                let pre = layer.forward(row)?;
                out_rows.push(pre.iter().map(|&p| act.apply(p)).collect::<Vec<T>>());
                pre_rows.push(pre);
            }
            pres.push(pre_rows);
            inputs.push(out_rows);
        }
        let loss = mse_loss(inputs.last().unwrap(), &x)?;
        if !loss.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                what: "autoencoder loss",
                epoch,
            });
        }
        // backward
        for (layer, _) in layers.iter_mut() {
            layer.zero_grads();
        }
        let mut d_out = loss.grad;
        for (li, (layer, act)) in layers.iter_mut().enumerate().rev() {
            let mut d_in = Vec::with_capacity(d_out.len());
            for (row_idx, d_row) in d_out.iter().enumerate() {
                let d_pre: Vec<T> = d_row
                    .iter()
                    .zip(&pres[li][row_idx])
                    .map(|(&g, &p)| g * act.grad(p))
                    .collect();
                d_in.push(layer.backward(&inputs[li][row_idx], &d_pre));
            }
            d_out = d_in;
        }
        for (li, (layer, _)) in layers.iter_mut().enumerate() {
            let gw = layer.grad_w.clone();
            let gb = layer.grad_b.clone();
            adam_step(&mut layer.w, &gw, &mut adam[2 * li], lr, &format!("ae{li}.w"))?;
            adam_step(&mut layer.b, &gb, &mut adam[2 * li + 1], lr, &format!("ae{li}.b"))?;
        }
    }

    // score with the trained net
    let mut scores = Vec::with_capacity(x.len());
    for row in &x {
        let mut cur = row.clone();
        for (layer, act) in &layers {
            cur = layer.forward(&cur)?.iter().map(|&p| act.apply(p)).collect();
        }
        scores.push(
            row.iter()
                .zip(&cur)
                .fold(T::zero(), |acc, (&a, &b)| {
                    let d = a - b;
                    acc + real::<T>(0.5) * d * d
                }),
        );
    }
    Ok(scores)
}

// ---------------------------------------------------------------------------
// LOF and kNN distance
// ---------------------------------------------------------------------------

/// Cap standing in for an infinite local reachability density when every
/// reachability distance in a neighborhood is zero (duplicate clusters).
/// Ratios of capped densities still cancel to 1.
pub const LRD_CAP: f64 = 1e30;

fn pairwise_distances<T: Real>(matrix: &FeatureMatrix<T>) -> Vec<Vec<T>> {
    let m = matrix.m();
    let mut d = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = dist_sq(matrix.row(i), matrix.row(j)).sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k < 1 || k >= m {
        return Err(Error::InvalidParam {
            name: "k",
            message: format!("need 1 <= k < m = {m}, got {k}"),
        });
    }
    Ok(())
}

/// Classic LOF: k-distance (with the standard tie convention including
/// every neighbor at exactly the k-distance), reachability distance,
/// local reachability density, and the final density ratio. Higher = more
/// anomalous.
pub fn lof_scores<T: Real>(matrix: &FeatureMatrix<T>, k: usize) -> Result<Vec<T>> {
    let m = matrix.m();
    check_k(k, m)?;
    let dist = pairwise_distances(matrix);

    // k-distance per point
    let mut k_dist = vec![T::zero(); m];
    for i in 0..m {
        let mut others: Vec<T> = (0..m).filter(|&j| j != i).map(|j| dist[i][j]).collect();
        others.sort_by(|a, b| a.partial_cmp(b).unwrap());
        k_dist[i] = others[k - 1];
    }
    // neighborhoods: every other point within the k-distance, ascending id
    let neighborhoods: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i && dist[i][j] <= k_dist[i])
                .collect()
        })
        .collect();
    // local reachability density
    let cap = real::<T>(LRD_CAP);
    let mut lrd = vec![T::zero(); m];
    for i in 0..m {
        let mut total = T::zero();
        for &j in &neighborhoods[i] {
            total = total + k_dist[j].max(dist[i][j]);
        }
        lrd[i] = if total > T::zero() {
            real_of::<T>(neighborhoods[i].len()) / total
        } else {
            cap
        };
    }
    // density ratio
    let mut scores = Vec::with_capacity(m);
    for i in 0..m {
        let mut total = T::zero();
        for &j in &neighborhoods[i] {
            total = total + lrd[j];
        }
        scores.push(total / (real_of::<T>(neighborhoods[i].len()) * lrd[i]));
    }
    Ok(scores)
}

/// Euclidean distance to the k-th nearest neighbor (self excluded).
pub fn knn_scores<T: Real>(matrix: &FeatureMatrix<T>, k: usize) -> Result<Vec<T>> {
    let m = matrix.m();
    check_k(k, m)?;
    let dist = pairwise_distances(matrix);
    let mut scores = Vec::with_capacity(m);
    for i in 0..m {
        let mut others: Vec<T> = (0..m).filter(|&j| j != i).map(|j| dist[i][j]).collect();
        others.sort_by(|a, b| a.partial_cmp(b).unwrap());
        scores.push(others[k - 1]);
    }
    Ok(scores)
}

// ---------------------------------------------------------------------------
// Isolation forest
// ---------------------------------------------------------------------------

enum IsoNode<T> {
    Split {
        feature: usize,
        value: T,
        left: Box<IsoNode<T>>,
        right: Box<IsoNode<T>>,
    },
    Leaf {
        size: usize,
    },
}

/// Euler-Mascheroni constant, for the harmonic-number approximation.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length in a BST of n nodes.
fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let nf = n as f64;
            2.0 * ((nf - 1.0).ln() + EULER_GAMMA) - 2.0 * (nf - 1.0) / nf
        }
    }
}

fn build_tree<T: Real, R: Rng>(
    matrix: &FeatureMatrix<T>,
    indices: &[usize],
    depth: usize,
    max_depth: usize,
    rng: &mut R,
) -> IsoNode<T> {
    if depth >= max_depth || indices.len() <= 1 {
        return IsoNode::Leaf {
            size: indices.len(),
        };
    }
    // candidate features must actually spread over this partition
    let mut spread = Vec::new();
    for f in 0..FEATURE_DIM {
        let mut lo = matrix.row(indices[0])[f];
        let mut hi = lo;
        for &i in &indices[1..] {
            lo = lo.min(matrix.row(i)[f]);
            hi = hi.max(matrix.row(i)[f]);
        }
        if hi > lo {
            spread.push((f, lo, hi));
        }
    }
    if spread.is_empty() {
        return IsoNode::Leaf {
            size: indices.len(),
        };
    }
    let (feature, lo, hi) = spread[rng.random_range(0..spread.len())];
    let value = lo + (hi - lo) * real::<T>(rng.random::<f64>());
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| matrix.row(i)[feature] < value);
    if left_idx.is_empty() || right_idx.is_empty() {
        return IsoNode::Leaf {
            size: indices.len(),
        };
    }
    IsoNode::Split {
        feature,
        value,
        left: Box::new(build_tree(matrix, &left_idx, depth + 1, max_depth, rng)),
        right: Box::new(build_tree(matrix, &right_idx, depth + 1, max_depth, rng)),
    }
}

fn path_length<T: Real>(node: &IsoNode<T>, row: &[T], depth: usize) -> f64 {
    match node {
        IsoNode::Leaf { size } => depth as f64 + c_factor(*size),
        IsoNode::Split {
            feature,
            value,
            left,
            right,
        } => {
            if row[*feature] < *value {
                path_length(left, row, depth + 1)
            } else {
                path_length(right, row, depth + 1)
            }
        }
    }
}

/// Standard isolation-forest scores 2^(-E[h] / c(subsample)), in (0, 1);
/// higher = easier to isolate = more anomalous. Trees get per-tree
/// derived seeds and are merged in fixed tree order.
pub fn iforest_scores<T: Real>(
    matrix: &FeatureMatrix<T>,
    trees: usize,
    subsample: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let m = matrix.m();
    if subsample < 2 || subsample > m {
        return Err(Error::InvalidParam {
            name: "subsample",
            message: format!("need 2 <= subsample <= m = {m}, got {subsample}"),
        });
    }
    if trees == 0 {
        return Err(Error::InvalidParam {
            name: "trees",
            message: "must be >= 1".into(),
        });
    }
    let max_depth = (subsample as f64).log2().ceil() as usize;
    let forest: Vec<IsoNode<T>> = (0..trees)
        .map(|t| {
            let mut rng = seed::rng2(seed, seed::tag::IFOREST, t as u64);
            let sample = rand::seq::index::sample(&mut rng, m, subsample).into_vec();
            build_tree(matrix, &sample, 0, max_depth, &mut rng)
        })
        .collect();

    let norm = c_factor(subsample);
    let mut scores = Vec::with_capacity(m);
    for i in 0..m {
        let total: f64 = forest
            .iter()
            .map(|tree| path_length(tree, matrix.row(i), 0))
            .sum();
        let mean_path = total / trees as f64;
        scores.push(real(2.0f64.powf(-mean_path / norm)));
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn matrix_from(rows: Vec<[f64; FEATURE_DIM]>) -> FeatureMatrix<f64> {
        FeatureMatrix {
            rows: rows.into_iter().map(|values| FeatureVector { values }).collect(),
            labels: None,
            norm_stats: None,
        }
    }

    fn point2(x: f64, y: f64) -> [f64; FEATURE_DIM] {
        let mut v = [0.0; FEATURE_DIM];
        v[0] = x;
        v[1] = y;
        v
    }

    fn random_matrix(m: usize, seed: u64) -> FeatureMatrix<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let rows = (0..m)
            .map(|_| {
                let mut values = [0.0; FEATURE_DIM];
                for v in values.iter_mut() {
                    *v = rng.random::<f64>() * 2.0 - 1.0;
                }
                values
            })
            .collect();
        matrix_from(rows)
    }

    #[test]
    fn ae_constant_data_scores_near_zero() {
        // identical rows standardize to the zero matrix
        let rows = vec![point2(3.0, -1.0); 10];
        let m = crate::features::standardize(&matrix_from(rows)).unwrap();
        let hyper = AeHyper {
            epochs: 20,
            ..AeHyper::default()
        };
        let scores = ae_scores(&m, &hyper, 7).unwrap();
        let max = scores.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!(max < 1e-3, "max constant-data score {max}");
    }

    #[test]
    fn ae_is_deterministic_and_learns() {
        let m = crate::features::standardize(&random_matrix(30, 3)).unwrap();
        let hyper = AeHyper {
            hidden_dim: 12,
            embed_dim: 4,
            epochs: 30,
            lr: 0.01,
        };
        let a = ae_scores(&m, &hyper, 5).unwrap();
        let b = ae_scores(&m, &hyper, 5).unwrap();
        assert_eq!(a, b);
        let c = ae_scores(&m, &hyper, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn lof_interior_grid_point_is_unity() {
        let mut rows = Vec::new();
        for gx in 0..7 {
            for gy in 0..7 {
                rows.push(point2(gx as f64, gy as f64));
            }
        }
        let m = matrix_from(rows);
        let scores = lof_scores(&m, 8).unwrap();
        // center of the grid: index of (3,3)
        let center = 3 * 7 + 3;
        assert!(
            (scores[center] - 1.0).abs() < 0.2,
            "interior LOF {}",
            scores[center]
        );
    }

    #[test]
    fn lof_flags_far_point() {
        let mut rows: Vec<[f64; FEATURE_DIM]> = Vec::new();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..30 {
            rows.push(point2(rng.random::<f64>(), rng.random::<f64>()));
        }
        rows.push(point2(10.0, 10.0));
        let m = matrix_from(rows);
        let scores = lof_scores(&m, 5).unwrap();
        assert!(scores[30] > 1.5, "outlier LOF {}", scores[30]);
    }

    #[test]
    fn lof_handles_duplicates() {
        let mut rows = vec![point2(1.0, 1.0); 6];
        rows.push(point2(2.0, 2.0));
        rows.push(point2(3.0, 1.0));
        let m = matrix_from(rows);
        let scores = lof_scores(&m, 3).unwrap();
        assert!(scores.iter().all(|s| s.is_finite()));
        // duplicate cluster members score 1 (capped densities cancel)
        for s in &scores[..6] {
            assert!((s - 1.0).abs() < 1e-9, "duplicate LOF {s}");
        }
    }

    #[test]
    fn knn_duplicated_point_scores_zero() {
        let mut rows = vec![point2(0.5, 0.5); 4]; // self + 3 duplicates
        rows.push(point2(4.0, 4.0));
        let m = matrix_from(rows);
        let scores = knn_scores(&m, 3).unwrap();
        assert_eq!(scores[0], 0.0);
    }

    #[test]
    fn knn_collinear_points() {
        let m = matrix_from(vec![point2(0.0, 0.0), point2(1.0, 0.0), point2(2.0, 0.0)]);
        let scores = knn_scores(&m, 1).unwrap();
        assert_eq!(scores, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn knn_remote_point_is_max() {
        let mut m = random_matrix(20, 9);
        let mut far = [0.0; FEATURE_DIM];
        far[0] = 50.0;
        m.rows.push(FeatureVector { values: far });
        let scores = knn_scores(&m, 4).unwrap();
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 20);
    }

    #[test]
    fn k_range_checks() {
        let m = random_matrix(5, 1);
        assert!(lof_scores(&m, 0).is_err());
        assert!(lof_scores(&m, 5).is_err());
        assert!(knn_scores(&m, 5).is_err());
    }

    /// Independent quadratic re-derivations of LOF and kNN used as exact
    /// oracles.
    mod oracle {
        use super::*;

        pub fn knn(m: &FeatureMatrix<f64>, k: usize) -> Vec<f64> {
            let n = m.m();
            (0..n)
                .map(|i| {
                    let mut ds: Vec<f64> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| {
                            let mut s = 0.0;
                            for f in 0..FEATURE_DIM {
                                s += (m.row(i)[f] - m.row(j)[f]).powi(2);
                            }
                            s.sqrt()
                        })
                        .collect();
                    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    ds[k - 1]
                })
                .collect()
        }

        pub fn lof(m: &FeatureMatrix<f64>, k: usize) -> Vec<f64> {
            let n = m.m();
            let d = |i: usize, j: usize| -> f64 {
                let mut s = 0.0;
                for f in 0..FEATURE_DIM {
                    s += (m.row(i)[f] - m.row(j)[f]).powi(2);
                }
                s.sqrt()
            };
            let mut kd = vec![0.0f64; n];
            for i in 0..n {
                let mut ds: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d(i, j)).collect();
                ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                kd[i] = ds[k - 1];
            }
            let nb: Vec<Vec<usize>> = (0..n)
                .map(|i| (0..n).filter(|&j| j != i && d(i, j) <= kd[i]).collect())
                .collect();
            let lrd: Vec<f64> = (0..n)
                .map(|i| {
                    let total: f64 = nb[i].iter().map(|&j| kd[j].max(d(i, j))).sum();
                    if total > 0.0 {
                        nb[i].len() as f64 / total
                    } else {
                        LRD_CAP
                    }
                })
                .collect();
            (0..n)
                .map(|i| {
                    let total: f64 = nb[i].iter().map(|&j| lrd[j]).sum();
                    total / (nb[i].len() as f64 * lrd[i])
                })
                .collect()
        }
    }

    #[test]
    fn lof_and_knn_match_quadratic_oracles_exactly() {
        for seed in 0..5 {
            let m = random_matrix(60, 100 + seed);
            for k in [1, 5, 20] {
                assert_eq!(knn_scores(&m, k).unwrap(), oracle::knn(&m, k), "knn k={k}");
                assert_eq!(lof_scores(&m, k).unwrap(), oracle::lof(&m, k), "lof k={k}");
            }
        }
    }

    #[test]
    fn iforest_scores_in_unit_interval_and_deterministic() {
        let m = random_matrix(64, 13);
        let a = iforest_scores(&m, 50, 32, 3).unwrap();
        let b = iforest_scores(&m, 50, 32, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&s| s > 0.0 && s < 1.0));
    }

    #[test]
    fn iforest_isolates_planted_outlier() {
        let mut hits = 0;
        for seed in 0..10 {
            let mut rng = ChaCha12Rng::seed_from_u64(500 + seed);
            let mut rows: Vec<[f64; FEATURE_DIM]> = Vec::new();
            for _ in 0..100 {
                let mut v = [0.0; FEATURE_DIM];
                for slot in v.iter_mut() {
                    let g: f64 = rng.random::<f64>() - 0.5;
                    *slot = g * 0.5;
                }
                rows.push(v);
            }
            let mut far = [0.0; FEATURE_DIM];
            for slot in far.iter_mut() {
                *slot = 6.0;
            }
            rows.push(far);
            let m = matrix_from(rows);
            let scores = iforest_scores(&m, 100, 64, seed).unwrap();
            let best = scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            if best.0 == 100 {
                hits += 1;
                assert!(*best.1 > 0.6, "outlier score {}", best.1);
            }
        }
        assert!(hits >= 8, "outlier ranked first in only {hits}/10 seeds");
    }

    #[test]
    fn iforest_param_checks() {
        let m = random_matrix(10, 2);
        assert!(iforest_scores(&m, 0, 8, 1).is_err());
        assert!(iforest_scores(&m, 10, 1, 1).is_err());
        assert!(iforest_scores(&m, 10, 11, 1).is_err());
    }
}
