//! Dense neural-network numerics: affine layers, activations, MSE loss,
//! Adam, and a finite-difference gradient checker. Backward passes are
//! hand-chained per layer; no tape.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{real, real_of, Real};

/// Layer activation. The decoder output stays `Identity` because the
/// reconstruction targets are z-scored and can be negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::Identity => v,
        }
    }

    /// Derivative with respect to the preactivation; the ReLU subgradient
    /// at exactly 0 is taken as 0.
    #[inline]
    pub fn grad<T: Real>(self, pre: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

/// Elementwise max(0, x).
pub fn relu<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| Activation::Relu.apply(v)).collect()
}

/// Affine layer with gradient accumulators. Weights are row-major
/// `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DenseLayer<T: Real> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
    #[serde(skip)]
    pub grad_w: Vec<T>,
    #[serde(skip)]
    pub grad_b: Vec<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            w: vec![T::zero(); in_dim * out_dim],
            b: vec![T::zero(); out_dim],
            grad_w: vec![T::zero(); in_dim * out_dim],
            grad_b: vec![T::zero(); out_dim],
        }
    }

    /// Xavier-uniform init: U(-l, l) with l = sqrt(6 / (in + out)).
    pub fn init_xavier<R: Rng>(&mut self, rng: &mut R) {
        let limit = (6.0 / (self.in_dim + self.out_dim) as f64).sqrt();
        for w in self.w.iter_mut() {
            *w = real((rng.random::<f64>() * 2.0 - 1.0) * limit);
        }
        for b in self.b.iter_mut() {
            *b = T::zero();
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim {
            return Err(Error::DimMismatch {
                context: "dense_forward",
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let mut y = self.b.clone();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            y[o] = y[o] + crate::num::dot(row, x);
        }
        Ok(y)
    }

    /// Accumulate parameter gradients for one sample and return the
    /// gradient with respect to the input.
    pub fn backward(&mut self, x: &[T], d_out: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(d_out.len(), self.out_dim);
        let mut d_x = vec![T::zero(); self.in_dim];
        for o in 0..self.out_dim {
            let g = d_out[o];
            let row_start = o * self.in_dim;
            for i in 0..self.in_dim {
                self.grad_w[row_start + i] = self.grad_w[row_start + i] + g * x[i];
                d_x[i] = d_x[i] + self.w[row_start + i] * g;
            }
            self.grad_b[o] = self.grad_b[o] + g;
        }
        d_x
    }

    pub fn zero_grads(&mut self) {
        self.grad_w.iter_mut().for_each(|g| *g = T::zero());
        self.grad_b.iter_mut().for_each(|g| *g = T::zero());
    }

    /// Ensure the (serde-skipped) accumulators match the parameter shapes.
    pub fn restore_grad_buffers(&mut self) {
        self.grad_w = vec![T::zero(); self.in_dim * self.out_dim];
        self.grad_b = vec![T::zero(); self.out_dim];
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// `y = Wx + b`.
pub fn dense_forward<T: Real>(x: &[T], layer: &DenseLayer<T>) -> Result<Vec<T>> {
    layer.forward(x)
}

/// Mean reconstruction loss over an `m x d` batch and its gradient with
/// respect to the reconstruction.
#[derive(Debug, Clone)]
pub struct MseLoss<T: Real> {
    pub loss: T,
    /// dL/dXhat, same shape as the inputs.
    pub grad: Vec<Vec<T>>,
}

/// `(1 / (m * d)) * sum of (1/2)(x - xhat)^2`, with the per-element
/// residual exposed for the backward pass.
pub fn mse_loss<T: Real>(xhat: &[Vec<T>], x: &[Vec<T>]) -> Result<MseLoss<T>> {
    if xhat.len() != x.len() {
        return Err(Error::DimMismatch {
            context: "mse_loss rows",
            expected: x.len(),
            got: xhat.len(),
        });
    }
    let m = x.len();
    let d = x.first().map_or(0, |r| r.len());
    let scale = T::one() / real_of::<T>(m.max(1) * d.max(1));
    let half = real::<T>(0.5);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(m);
    for (rh, rx) in xhat.iter().zip(x) {
        if rh.len() != d || rx.len() != d {
            return Err(Error::DimMismatch {
                context: "mse_loss cols",
                expected: d,
                got: rh.len().max(rx.len()),
            });
        }
        let mut g_row = Vec::with_capacity(d);
        for (&h, &t) in rh.iter().zip(rx) {
            let r = t - h;
            loss = loss + half * r * r * scale;
            g_row.push((h - t) * scale);
        }
        grad.push(g_row);
    }
    Ok(MseLoss { loss, grad })
}

/// Adam moment estimates for one parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AdamState<T: Real> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// One bias-corrected Adam update of a parameter block. `block` names the
/// parameters in the non-finite-gradient error.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    lr: T,
    block: &str,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimMismatch {
            context: "adam_step",
            expected: params.len(),
            got: grads.len(),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            block: format!("{block}[{i}]"),
        });
    }
    state.step += 1;
    let b1 = real::<T>(ADAM_BETA1);
    let b2 = real::<T>(ADAM_BETA2);
    let eps = real::<T>(ADAM_EPS);
    let t = state.step as i32;
    let corr1 = T::one() - b1.powi(t);
    let corr2 = T::one() - b2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] / corr1;
        let v_hat = state.v[i] / corr2;
        params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Anything whose scalar loss and analytic gradients can be evaluated at
/// its current parameters. The loss must be deterministic (for the graph
/// model that means full-neighborhood mode).
pub trait GradCheckable<T: Real> {
    fn n_params(&self) -> usize;
    fn get_param(&self, idx: usize) -> T;
    fn set_param(&mut self, idx: usize, value: T);
    fn loss(&mut self) -> T;
    /// Analytic dLoss/dparam for every parameter, in index order.
    fn gradients(&mut self) -> Vec<T>;
}

/// Compare analytic gradients against central finite differences and
/// return the max over parameters of |a - n| / max(1e-8, |a| + |n|).
pub fn grad_check<T: Real, M: GradCheckable<T>>(model: &mut M, eps: T) -> T {
    let analytic = model.gradients();
    let floor = real::<T>(1e-8);
    let two = real::<T>(2.0);
    let mut max_rel = T::zero();
    for idx in 0..model.n_params() {
        let orig = model.get_param(idx);
        model.set_param(idx, orig + eps);
        let up = model.loss();
        model.set_param(idx, orig - eps);
        let down = model.loss();
        model.set_param(idx, orig);
        let numeric = (up - down) / (two * eps);
        let denom = floor.max(analytic[idx].abs() + numeric.abs());
        let rel = (analytic[idx] - numeric).abs() / denom;
        max_rel = max_rel.max(rel);
    }
    max_rel
}
