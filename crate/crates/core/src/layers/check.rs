//! Gradient verification against central finite differences.
//!
//! The probe loss is `L = sum(output (*) r)` for a fixed random `r`, so the
//! upstream gradient of the layer output is exactly `r`. Layers that draw
//! randomness during the forward pass (dropout) see an identical generator
//! on every probe, which keeps the function being differenced fixed.

use crate::error::Result;
use crate::rng::Rng;
use crate::scalar::{cast, Scalar};
use crate::tensor::Tensor;

use super::{Layer, Mode};

/// Relative-error tolerance for a passing check.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;
/// Central-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    /// Parameter tensor name, or `"input"` for the input gradient.
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }
}

/// Relative error with an absolute floor so near-zero gradient pairs are
/// compared absolutely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Check a layer's analytic gradients on a random instance with the default
/// tolerance and step.
pub fn grad_check<S: Scalar>(
    layer: &mut dyn Layer<S>,
    input_shape: &[usize],
    seed: u64,
) -> Result<GradCheckReport> {
    grad_check_with(layer, input_shape, seed, GRAD_CHECK_TOLERANCE, GRAD_CHECK_STEP)
}

pub fn grad_check_with<S: Scalar>(
    layer: &mut dyn Layer<S>,
    input_shape: &[usize],
    seed: u64,
    tolerance: f64,
    step: f64,
) -> Result<GradCheckReport> {
    let mut data_rng = Rng::from_seed(seed);
    let mut input = Tensor::<S>::from_fn(input_shape, |_| cast(data_rng.uniform(-1.0, 1.0)));

    // Forward once to learn the output shape and draw the probe direction.
    let out = {
        let mut rng = Rng::from_seed(seed ^ 0x5eed);
        let out = layer.forward(&input, Mode::Train, &mut rng)?;
        layer.clear_cache();
        out
    };
    let r = Tensor::<S>::from_fn(out.shape(), |_| cast(data_rng.uniform(-1.0, 1.0)));

    // Analytic pass.
    layer.clear_cache();
    {
        let mut rng = Rng::from_seed(seed ^ 0x5eed);
        layer.forward(&input, Mode::Train, &mut rng)?;
    }
    layer.visit_params_mut(&mut |_, p| p.zero_grad());
    let din = layer.backward(&r)?;

    let mut analytic: Vec<(String, Tensor<S>)> = Vec::new();
    layer.visit_params(&mut |name, p| analytic.push((name.to_string(), p.grad.clone())));
    analytic.push(("input".to_string(), din));

    let h: f64 = step;
    let mut entries = Vec::new();

    // Parameter tensors, element by element.
    let param_count = analytic.len() - 1;
    for (pi, (name, grad)) in analytic.iter().take(param_count).enumerate() {
        let mut max_err = 0.0f64;
        for e in 0..grad.len() {
            let num = central_diff(layer, &input, &r, seed, h, |l, delta| {
                let mut idx = 0;
                l.visit_params_mut(&mut |_, p| {
                    if idx == pi {
                        let v = p.value.data()[e].to_f64().unwrap();
                        p.value.data_mut()[e] = cast(v + delta);
                    }
                    idx += 1;
                });
            })?;
            let a = grad.data()[e].to_f64().unwrap();
            max_err = max_err.max(rel_err(a, num));
        }
        entries.push(GradCheckEntry {
            name: name.clone(),
            max_rel_err: max_err,
        });
    }

    // Input gradient.
    {
        let grad = &analytic[param_count].1;
        let mut max_err = 0.0f64;
        for e in 0..input.len() {
            let orig = input.data()[e].to_f64().unwrap();
            input.data_mut()[e] = cast(orig + h);
            let lp = probe_loss(layer, &input, &r, seed)?;
            input.data_mut()[e] = cast(orig - h);
            let lm = probe_loss(layer, &input, &r, seed)?;
            input.data_mut()[e] = cast(orig);
            let num = (lp - lm) / (2.0 * h);
            let a = grad.data()[e].to_f64().unwrap();
            max_err = max_err.max(rel_err(a, num));
        }
        entries.push(GradCheckEntry {
            name: "input".to_string(),
            max_rel_err: max_err,
        });
    }

    let pass = entries.iter().all(|e| e.max_rel_err < tolerance);
    Ok(GradCheckReport {
        entries,
        tolerance,
        pass,
    })
}

fn central_diff<S: Scalar>(
    layer: &mut dyn Layer<S>,
    input: &Tensor<S>,
    r: &Tensor<S>,
    seed: u64,
    h: f64,
    perturb: impl Fn(&mut dyn Layer<S>, f64),
) -> Result<f64> {
    perturb(layer, h);
    let lp = probe_loss(layer, input, r, seed)?;
    perturb(layer, -2.0 * h);
    let lm = probe_loss(layer, input, r, seed)?;
    perturb(layer, h);
    Ok((lp - lm) / (2.0 * h))
}

fn probe_loss<S: Scalar>(
    layer: &mut dyn Layer<S>,
    input: &Tensor<S>,
    r: &Tensor<S>,
    seed: u64,
) -> Result<f64> {
    let mut rng = Rng::from_seed(seed ^ 0x5eed);
    let out = layer.forward(input, Mode::Train, &mut rng)?;
    layer.clear_cache();
    Ok(out.mul(r)?.sum().to_f64().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{
        Activation, Conv1d, Conv2d, Dense, Dropout, Flatten, Lstm, MaxPool1d, MaxPool2d,
        TimeDistributed,
    };

    fn assert_passes(report: &GradCheckReport) {
        assert!(
            report.pass,
            "gradient check failed: {:?}",
            report
                .entries
                .iter()
                .filter(|e| e.max_rel_err >= report.tolerance)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn dense_5_to_3_passes() {
        let mut rng = Rng::from_seed(10);
        for act in [
            Activation::Linear,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Softmax,
        ] {
            let mut layer = Dense::<f64>::new(5, 3, act, &mut rng);
            let report = grad_check(&mut layer, &[5], 100).unwrap();
            assert_passes(&report);
        }
    }

    #[test]
    fn conv2d_passes() {
        let mut rng = Rng::from_seed(11);
        let mut layer = Conv2d::<f64>::new(2, 3, 3, Activation::Relu, &mut rng).unwrap();
        let report = grad_check(&mut layer, &[6, 6, 2], 101).unwrap();
        assert_passes(&report);
    }

    #[test]
    fn conv1d_passes() {
        let mut rng = Rng::from_seed(12);
        let mut layer = Conv1d::<f64>::new(2, 4, 3, Activation::Tanh, &mut rng).unwrap();
        let report = grad_check(&mut layer, &[7, 2], 102).unwrap();
        assert_passes(&report);
    }

    #[test]
    fn lstm_passes() {
        let mut rng = Rng::from_seed(13);
        let mut layer = Lstm::<f64>::new(3, 4, &mut rng);
        let report = grad_check(&mut layer, &[5, 3], 103).unwrap();
        assert_passes(&report);
    }

    #[test]
    fn pooling_passes() {
        let mut p2 = MaxPool2d::<f64>::new(2);
        let report = grad_check(&mut p2, &[5, 6, 2], 104).unwrap();
        assert_passes(&report);
        let mut p1 = MaxPool1d::<f64>::new(2);
        let report = grad_check(&mut p1, &[9, 3], 105).unwrap();
        assert_passes(&report);
    }

    #[test]
    fn dropout_passes_with_fixed_probe_seed() {
        let mut layer = Dropout::<f64>::new(0.4).unwrap();
        let report = grad_check(&mut layer, &[24], 106).unwrap();
        assert_passes(&report);
    }

    #[test]
    fn flatten_and_time_distributed_pass() {
        let mut f = Flatten::new();
        let report = grad_check::<f64>(&mut f, &[3, 4, 2], 107).unwrap();
        assert_passes(&report);

        let mut rng = Rng::from_seed(14);
        let conv = Conv1d::<f64>::new(1, 2, 3, Activation::Relu, &mut rng).unwrap();
        let mut td = TimeDistributed::<f64>::new(Box::new(conv));
        let report = grad_check(&mut td, &[3, 6, 1], 108).unwrap();
        assert_passes(&report);
    }
}
