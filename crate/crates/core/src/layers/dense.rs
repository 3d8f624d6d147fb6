//! Fully-connected layer.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::{fmadd, Scalar};
use crate::tensor::{Init, Tensor};

use super::{missing_forward, Activation, Layer, Mode, Param};

/// `out = activation(W^T x + b)` with `W: [in, units]`, `b: [units]`.
#[derive(Debug, Clone)]
pub struct Dense<S: Scalar> {
    pub weights: Param<S>,
    pub bias: Param<S>,
    pub activation: Activation,
    in_dim: usize,
    units: usize,
    cache: Vec<DenseCache<S>>,
}

#[derive(Debug, Clone)]
struct DenseCache<S: Scalar> {
    input: Tensor<S>,
    post: Tensor<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(in_dim: usize, units: usize, activation: Activation, rng: &mut Rng) -> Self {
        Dense {
            weights: Param::new(Tensor::init(&[in_dim, units], Init::GlorotUniform, rng)),
            bias: Param::new(Tensor::zeros(&[units])),
            activation,
            in_dim,
            units,
            cache: Vec::new(),
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }
}

impl<S: Scalar> Layer<S> for Dense<S> {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, _rng: &mut Rng) -> Result<Tensor<S>> {
        if input.shape() != [self.in_dim] {
            return Err(Error::ShapeMismatch {
                op: "dense forward",
                lhs: input.shape().to_vec(),
                rhs: vec![self.in_dim],
            });
        }
        let mut pre = self.weights.value.matvec_t(input)?;
        for (p, &b) in pre.data_mut().iter_mut().zip(self.bias.value.data()) {
            *p += b;
        }
        let post = self.activation.apply(&pre);
        if mode == Mode::Train {
            self.cache.push(DenseCache {
                input: input.clone(),
                post: post.clone(),
            });
        }
        Ok(post)
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let cache = self.cache.pop().ok_or_else(|| missing_forward("dense"))?;
        let dpre = self.activation.backward(grad_output, &cache.post);

        // dW[i][j] += x[i] * dpre[j]; db += dpre; dx = W dpre.
        let units = self.units;
        let dw = self.weights.grad.data_mut();
        for (i, &x) in cache.input.data().iter().enumerate() {
            let row = &mut dw[i * units..(i + 1) * units];
            for (w, &d) in row.iter_mut().zip(dpre.data()) {
                *w = fmadd(x, d, *w);
            }
        }
        for (b, &d) in self.bias.grad.data_mut().iter_mut().zip(dpre.data()) {
            *b += d;
        }
        self.weights.value.matvec(&dpre)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        if input_shape != [self.in_dim] {
            return Err(Error::ShapeMismatch {
                op: "dense output_shape",
                lhs: input_shape.to_vec(),
                rhs: vec![self.in_dim],
            });
        }
        Ok(vec![self.units])
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<S>)) {
        f("weights", &self.weights);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        f("weights", &mut self.weights);
        f("bias", &mut self.bias);
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn clone_box(&self) -> Box<dyn Layer<S>> {
        Box::new(self.clone())
    }
}
