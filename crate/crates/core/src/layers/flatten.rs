//! Flatten to rank 1; backward restores the recorded input shape.

use crate::error::Result;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{missing_forward, Layer, Mode};

#[derive(Debug, Clone, Default)]
pub struct Flatten {
    shapes: Vec<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Flatten::default()
    }
}

impl<S: Scalar> Layer<S> for Flatten {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, _rng: &mut Rng) -> Result<Tensor<S>> {
        if mode == Mode::Train {
            self.shapes.push(input.shape().to_vec());
        }
        input.reshape(&[input.len()])
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let shape = self.shapes.pop().ok_or_else(|| missing_forward("flatten"))?;
        grad_output.reshape(&shape)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input_shape.iter().product()])
    }

    fn clear_cache(&mut self) {
        self.shapes.clear();
    }

    fn clone_box(&self) -> Box<dyn Layer<S>> {
        Box::new(self.clone())
    }
}
