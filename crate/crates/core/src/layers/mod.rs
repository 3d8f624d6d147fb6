//! Network layers: forward and reverse passes for every layer kind the
//! three architectures use.
//!
//! Layers cache what their backward pass needs on a small internal stack:
//! each training-mode `forward` pushes one cache entry and each `backward`
//! pops one, so a layer applied several times (e.g. under
//! [`TimeDistributed`]) unwinds in reverse order. Inference-mode forwards
//! cache nothing and cannot be backpropagated.

mod check;
mod conv;
mod dense;
mod dropout;
mod flatten;
mod lstm;
mod pool;
mod time_distributed;

pub use check::{grad_check, grad_check_with, GradCheckEntry, GradCheckReport, GRAD_CHECK_STEP,
                GRAD_CHECK_TOLERANCE};
pub use conv::{Conv1d, Conv2d};
pub use dense::Dense;
pub use dropout::Dropout;
pub use flatten::Flatten;
pub use lstm::{Lstm, LstmParams, LstmState};
pub use pool::{MaxPool1d, MaxPool2d};
pub use time_distributed::TimeDistributed;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Whether a forward pass records state for backprop and applies dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A parameter tensor paired with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param<S: Scalar> {
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
}

impl<S: Scalar> Param<S> {
    pub fn new(value: Tensor<S>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        for g in self.grad.data_mut() {
            *g = S::zero();
        }
    }
}

/// Activation applied after a layer's affine part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
    Softmax,
}

impl Activation {
    pub fn apply<S: Scalar>(self, pre: &Tensor<S>) -> Tensor<S> {
        match self {
            Activation::Linear => pre.clone(),
            Activation::Relu => pre.relu(),
            Activation::Sigmoid => pre.sigmoid(),
            Activation::Tanh => pre.tanh(),
            Activation::Softmax => softmax(pre),
        }
    }

    /// Gradient w.r.t. the pre-activation, given the gradient w.r.t. the
    /// post-activation output. Every case only needs the cached output.
    /// ReLU uses derivative 0 at the kink.
    pub fn backward<S: Scalar>(self, grad_post: &Tensor<S>, post: &Tensor<S>) -> Tensor<S> {
        match self {
            Activation::Linear => grad_post.clone(),
            Activation::Relu => {
                let mut out = grad_post.clone();
                for (g, &y) in out.data_mut().iter_mut().zip(post.data().iter()) {
                    if y <= S::zero() {
                        *g = S::zero();
                    }
                }
                out
            }
            Activation::Sigmoid => {
                let mut out = grad_post.clone();
                for (g, &y) in out.data_mut().iter_mut().zip(post.data().iter()) {
                    *g = *g * y * (S::one() - y);
                }
                out
            }
            Activation::Tanh => {
                let mut out = grad_post.clone();
                for (g, &y) in out.data_mut().iter_mut().zip(post.data().iter()) {
                    *g = *g * (S::one() - y * y);
                }
                out
            }
            Activation::Softmax => {
                // dpre_i = y_i * (dpost_i - sum_j dpost_j y_j)
                let mut dot = S::zero();
                for (&g, &y) in grad_post.data().iter().zip(post.data().iter()) {
                    dot += g * y;
                }
                let mut out = grad_post.clone();
                for (g, &y) in out.data_mut().iter_mut().zip(post.data().iter()) {
                    *g = y * (*g - dot);
                }
                out
            }
        }
    }
}

/// Numerically stable softmax over a rank-1 tensor.
pub fn softmax<S: Scalar>(pre: &Tensor<S>) -> Tensor<S> {
    let max = pre
        .data()
        .iter()
        .fold(S::neg_infinity(), |m, &x| if x > m { x } else { m });
    let exps: Vec<S> = pre.data().iter().map(|&x| (x - max).exp()).collect();
    let total: S = exps.iter().fold(S::zero(), |a, &e| a + e);
    Tensor::new(pre.shape().to_vec(), exps.iter().map(|&e| e / total).collect())
        .expect("softmax preserves shape")
}

/// One layer of a sequential model.
pub trait Layer<S: Scalar>: Send + Sync {
    fn kind(&self) -> &'static str;

    /// Run the layer. Training mode records backprop state and applies
    /// dropout; inference mode is pure.
    fn forward(&mut self, input: &Tensor<S>, mode: Mode, rng: &mut Rng) -> Result<Tensor<S>>;

    /// Consume the most recent cached forward and return the gradient
    /// w.r.t. that forward's input, accumulating parameter gradients.
    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>>;

    /// Output shape for a given input shape, without running the layer.
    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>>;

    fn visit_params(&self, _f: &mut dyn FnMut(&str, &Param<S>)) {}

    fn visit_params_mut(&mut self, _f: &mut dyn FnMut(&str, &mut Param<S>)) {}

    /// Drop any cached forward state (used between gradient-check probes).
    fn clear_cache(&mut self) {}

    fn clone_box(&self) -> Box<dyn Layer<S>>;

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.len());
        n
    }
}

impl<S: Scalar> Clone for Box<dyn Layer<S>> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

pub(crate) fn missing_forward(kind: &str) -> Error {
    Error::Contract(format!("{kind}: backward called without a matching forward"))
}
