//! Inverted dropout: train-time zeroing with `1/(1-rate)` rescaling so
//! inference is a bitwise identity.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::{cast, Scalar};
use crate::tensor::Tensor;

use super::{missing_forward, Layer, Mode};

#[derive(Debug, Clone)]
pub struct Dropout<S: Scalar> {
    rate: f64,
    masks: Vec<Tensor<S>>,
}

impl<S: Scalar> Dropout<S> {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Contract(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout {
            rate,
            masks: Vec::new(),
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl<S: Scalar> Layer<S> for Dropout<S> {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, rng: &mut Rng) -> Result<Tensor<S>> {
        if mode == Mode::Infer {
            return Ok(input.clone());
        }
        let keep_scale: S = cast(1.0 / (1.0 - self.rate));
        let mask = Tensor::from_fn(input.shape(), |_| {
            if rng.next_f64() < self.rate {
                S::zero()
            } else {
                keep_scale
            }
        });
        let out = input.mul(&mask)?;
        self.masks.push(mask);
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let mask = self.masks.pop().ok_or_else(|| missing_forward("dropout"))?;
        grad_output.mul(&mask)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        Ok(input_shape.to_vec())
    }

    fn clear_cache(&mut self) {
        self.masks.clear();
    }

    fn clone_box(&self) -> Box<dyn Layer<S>> {
        Box::new(self.clone())
    }
}
