//! Declarative model specs, the three reference architectures, and the
//! sequential model runtime.

pub mod container;
mod loss;

pub use loss::{Loss, Target};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    Activation, Conv1d, Conv2d, Dense, Dropout, Flatten, Layer, Lstm, MaxPool1d, MaxPool2d, Mode,
    Param, TimeDistributed,
};
use crate::rng::Rng;
use crate::scalar::{cast, Scalar};
use crate::tensor::Tensor;

/// Fixed number of gradient-accumulation groups per batch. Per-sample
/// gradients are summed within each group and the group sums are combined
/// in ascending order, so batch gradients are bitwise identical whether the
/// groups run sequentially or on threads.
pub const GRAD_CHUNKS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchName {
    Cnn,
    Lstm,
    CnnLstm,
}

impl std::fmt::Display for ArchName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArchName::Cnn => write!(f, "cnn"),
            ArchName::Lstm => write!(f, "lstm"),
            ArchName::CnnLstm => write!(f, "cnn_lstm"),
        }
    }
}

/// Output head: one sigmoid unit for continuous indicators, a 4-way softmax
/// for the two discrete level codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Regression1,
    Classification4,
}

impl Head {
    pub fn units(self) -> usize {
        match self {
            Head::Regression1 => 1,
            Head::Classification4 => 4,
        }
    }

    pub fn default_loss(self) -> Loss {
        match self {
            Head::Regression1 => Loss::Mse,
            Head::Classification4 => Loss::CategoricalCrossEntropy,
        }
    }
}

/// One layer of a declarative architecture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel_size: usize,
        activation: Activation,
    },
    Conv1d {
        filters: usize,
        kernel_size: usize,
        activation: Activation,
    },
    MaxPool2d {
        pool: usize,
    },
    MaxPool1d {
        pool: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
    Lstm {
        units: usize,
    },
    TimeDistributed {
        inner: Box<LayerSpec>,
    },
}

impl LayerSpec {
    /// Instantiate a parameterized layer for the given input shape.
    fn build<S: Scalar>(&self, input_shape: &[usize], rng: &mut Rng) -> Result<Box<dyn Layer<S>>> {
        Ok(match self {
            LayerSpec::Conv2d {
                filters,
                kernel_size,
                activation,
            } => {
                let c_in = *input_shape.last().ok_or_else(|| bad_input(input_shape))?;
                if input_shape.len() != 3 {
                    return Err(bad_input(input_shape));
                }
                Box::new(Conv2d::new(c_in, *filters, *kernel_size, *activation, rng)?)
            }
            LayerSpec::Conv1d {
                filters,
                kernel_size,
                activation,
            } => {
                let c_in = *input_shape.last().ok_or_else(|| bad_input(input_shape))?;
                if input_shape.len() != 2 {
                    return Err(bad_input(input_shape));
                }
                Box::new(Conv1d::new(c_in, *filters, *kernel_size, *activation, rng)?)
            }
            LayerSpec::MaxPool2d { pool } => Box::new(MaxPool2d::new(*pool)),
            LayerSpec::MaxPool1d { pool } => Box::new(MaxPool1d::new(*pool)),
            LayerSpec::Dropout { rate } => Box::new(Dropout::new(*rate)?),
            LayerSpec::Flatten => Box::new(Flatten::new()),
            LayerSpec::Dense { units, activation } => {
                let &[n] = input_shape else {
                    return Err(bad_input(input_shape));
                };
                Box::new(Dense::new(n, *units, *activation, rng))
            }
            LayerSpec::Lstm { units } => {
                let &[_, input] = input_shape else {
                    return Err(bad_input(input_shape));
                };
                Box::new(Lstm::new(input, *units, rng))
            }
            LayerSpec::TimeDistributed { inner } => {
                let rest = input_shape.get(1..).ok_or_else(|| bad_input(input_shape))?;
                if rest.is_empty() {
                    return Err(bad_input(input_shape));
                }
                Box::new(TimeDistributed::new(inner.build(rest, rng)?))
            }
        })
    }
}

fn bad_input(shape: &[usize]) -> Error {
    Error::Contract(format!("layer cannot accept input shape {shape:?}"))
}

/// Declarative description of an architecture: body layers plus head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: ArchName,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub head: Head,
}

impl ModelSpec {
    /// Three Conv2D/MaxPool/Dropout stages, a 128-unit dense stage, and the
    /// head, over the `(18, 42, 1)` feature image.
    pub fn cnn(head: Head) -> Self {
        let conv = |filters| LayerSpec::Conv2d {
            filters,
            kernel_size: 3,
            activation: Activation::Relu,
        };
        ModelSpec {
            name: ArchName::Cnn,
            input_shape: vec![18, 42, 1],
            layers: vec![
                conv(32),
                LayerSpec::MaxPool2d { pool: 2 },
                LayerSpec::Dropout { rate: 0.25 },
                conv(64),
                LayerSpec::MaxPool2d { pool: 2 },
                LayerSpec::Dropout { rate: 0.25 },
                conv(128),
                LayerSpec::MaxPool2d { pool: 2 },
                LayerSpec::Dropout { rate: 0.4 },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 128,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { rate: 0.3 },
            ],
            head,
        }
    }

    /// A single 50-block LSTM over the `(18, 42)` sequence, then the head.
    pub fn lstm(head: Head) -> Self {
        ModelSpec {
            name: ArchName::Lstm,
            input_shape: vec![18, 42],
            layers: vec![LayerSpec::Lstm { units: 50 }],
            head,
        }
    }

    /// Shared Conv1D + pooling + flatten applied per timestep, then the
    /// 50-block LSTM and the head.
    pub fn cnn_lstm(head: Head) -> Self {
        ModelSpec {
            name: ArchName::CnnLstm,
            input_shape: vec![18, 42, 1],
            layers: vec![
                LayerSpec::TimeDistributed {
                    inner: Box::new(LayerSpec::Conv1d {
                        filters: 32,
                        kernel_size: 3,
                        activation: Activation::Relu,
                    }),
                },
                LayerSpec::TimeDistributed {
                    inner: Box::new(LayerSpec::MaxPool1d { pool: 2 }),
                },
                LayerSpec::TimeDistributed {
                    inner: Box::new(LayerSpec::Flatten),
                },
                LayerSpec::Lstm { units: 50 },
            ],
            head,
        }
    }

    fn head_spec(&self) -> LayerSpec {
        match self.head {
            Head::Regression1 => LayerSpec::Dense {
                units: 1,
                activation: Activation::Sigmoid,
            },
            Head::Classification4 => LayerSpec::Dense {
                units: 4,
                activation: Activation::Softmax,
            },
        }
    }
}

/// An instantiated, parameterized model.
pub struct Model<S: Scalar> {
    spec: ModelSpec,
    layers: Vec<Box<dyn Layer<S>>>,
    mode: Mode,
}

impl<S: Scalar> Clone for Model<S> {
    fn clone(&self) -> Self {
        Model {
            spec: self.spec.clone(),
            layers: self.layers.clone(),
            mode: self.mode,
        }
    }
}

/// Build the reference CNN with freshly initialized parameters.
pub fn build_cnn<S: Scalar>(head: Head, rng: &mut Rng) -> Result<Model<S>> {
    Model::new(ModelSpec::cnn(head), rng)
}

pub fn build_lstm<S: Scalar>(head: Head, rng: &mut Rng) -> Result<Model<S>> {
    Model::new(ModelSpec::lstm(head), rng)
}

pub fn build_cnn_lstm<S: Scalar>(head: Head, rng: &mut Rng) -> Result<Model<S>> {
    Model::new(ModelSpec::cnn_lstm(head), rng)
}

impl<S: Scalar> Model<S> {
    /// Instantiate every layer in `spec` (plus the head) with glorot-uniform
    /// weights drawn from `rng`.
    pub fn new(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        let mut layers: Vec<Box<dyn Layer<S>>> = Vec::with_capacity(spec.layers.len() + 1);
        let mut shape = spec.input_shape.clone();
        for layer_spec in spec.layers.iter().chain(std::iter::once(&spec.head_spec())) {
            let layer = layer_spec.build::<S>(&shape, rng)?;
            shape = layer.output_shape(&shape)?;
            layers.push(layer);
        }
        Ok(Model {
            spec,
            layers,
            mode: Mode::Train,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Shapes after every layer (head included), starting from the spec input.
    pub fn layer_output_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.spec.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    /// Parameter count per layer (head included).
    pub fn layer_param_counts(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.param_count()).collect()
    }

    pub fn count_params(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }

    fn adapt_input(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        if input.shape() == self.spec.input_shape.as_slice() {
            return Ok(input.clone());
        }
        if input.len() == self.spec.input_shape.iter().product::<usize>() {
            return input.reshape(&self.spec.input_shape);
        }
        Err(Error::ShapeMismatch {
            op: "model forward",
            lhs: input.shape().to_vec(),
            rhs: self.spec.input_shape.clone(),
        })
    }

    /// Run the network. In inference mode this is deterministic and caches
    /// nothing; `rng` is only consumed by dropout in training mode.
    pub fn forward(&mut self, input: &Tensor<S>, rng: &mut Rng) -> Result<Tensor<S>> {
        let mut x = self.adapt_input(input)?;
        let mode = self.mode;
        for layer in &mut self.layers {
            x = layer.forward(&x, mode, rng)?;
        }
        Ok(x)
    }

    /// Backpropagate from the head output gradient; parameter gradients
    /// accumulate, parameter values stay untouched.
    pub fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let mut g = grad_output.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            layer.visit_params_mut(&mut |_, p| p.zero_grad());
        }
    }

    pub fn clear_caches(&mut self) {
        for layer in &mut self.layers {
            layer.clear_cache();
        }
    }

    /// Visit every parameter as `(qualified_name, param)` in declaration
    /// order; this order defines optimizer-state and container layout.
    pub fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<S>)) {
        for (i, layer) in self.layers.iter().enumerate() {
            let kind = layer.kind();
            layer.visit_params(&mut |name, p| f(&format!("l{i}.{kind}.{name}"), p));
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let kind = layer.kind();
            layer.visit_params_mut(&mut |name, p| f(&format!("l{i}.{kind}.{name}"), p));
        }
    }

    /// Mean loss over a batch plus accumulated parameter gradients, using
    /// the canonical chunked accumulation order. Per-sample dropout seeds
    /// are drawn sequentially from `rng` before any work runs.
    pub fn loss_and_grad(
        &mut self,
        inputs: &[&Tensor<S>],
        targets: &[Target],
        loss: Loss,
        rng: &mut Rng,
    ) -> Result<f64> {
        let seeds: Vec<u64> = (0..inputs.len()).map(|_| rng.next_u64()).collect();
        chunked_batch_step(self, inputs, targets, loss, &seeds, false)
    }

    /// Mean loss over a batch without touching gradients (used by the
    /// finite-difference whole-model checks). Same dropout seeds, same value.
    pub fn batch_loss(
        &mut self,
        inputs: &[&Tensor<S>],
        targets: &[Target],
        loss: Loss,
        seeds: &[u64],
    ) -> Result<f64> {
        check_batch(inputs, targets, seeds)?;
        let mode = self.mode;
        self.set_mode(Mode::Train);
        let mut total = 0.0;
        for ((input, target), &seed) in inputs.iter().zip(targets).zip(seeds) {
            let mut sample_rng = Rng::from_seed(seed);
            let pred = self.forward(input, &mut sample_rng)?;
            self.clear_caches();
            let (l, _) = loss.eval(&pred, target)?;
            total += l;
        }
        self.set_mode(mode);
        Ok(total / inputs.len() as f64)
    }
}

fn check_batch<S: Scalar>(
    inputs: &[&Tensor<S>],
    targets: &[Target],
    seeds: &[u64],
) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Contract("batch must be nonempty".to_string()));
    }
    if inputs.len() != targets.len() || inputs.len() != seeds.len() {
        return Err(Error::Contract(format!(
            "batch arity mismatch: {} inputs, {} targets, {} seeds",
            inputs.len(),
            targets.len(),
            seeds.len()
        )));
    }
    Ok(())
}

/// Contiguous near-equal split of `0..n` into [`GRAD_CHUNKS`] ranges.
fn chunk_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / GRAD_CHUNKS;
    let extra = n % GRAD_CHUNKS;
    let mut ranges = Vec::with_capacity(GRAD_CHUNKS);
    let mut start = 0;
    for c in 0..GRAD_CHUNKS {
        let len = base + usize::from(c < extra);
        ranges.push(start..start + len);
        start += len;
    }
    ranges
}

/// One batch gradient step: per-sample forward/backward on model replicas,
/// one replica per chunk, then chunk gradients combined in fixed order into
/// `master`. With `threads` the chunks run on scoped OS threads; the math
/// and the result are identical either way.
pub fn chunked_batch_step<S: Scalar>(
    master: &mut Model<S>,
    inputs: &[&Tensor<S>],
    targets: &[Target],
    loss: Loss,
    sample_seeds: &[u64],
    threads: bool,
) -> Result<f64> {
    check_batch(inputs, targets, sample_seeds)?;
    let n = inputs.len();
    let inv_n: S = cast(1.0 / n as f64);
    let ranges = chunk_ranges(n);

    type ChunkOut<S> = Option<(Vec<f64>, Vec<Tensor<S>>)>;
    let results: Vec<Result<ChunkOut<S>>> = {
        let master = &*master;
        let run_chunk = move |range: std::ops::Range<usize>| -> Result<ChunkOut<S>> {
            if range.is_empty() {
                return Ok(None);
            }
            let mut replica = master.clone();
            replica.set_mode(Mode::Train);
            replica.zero_grads();
            replica.clear_caches();
            let mut losses = Vec::with_capacity(range.len());
            for i in range {
                let mut sample_rng = Rng::from_seed(sample_seeds[i]);
                let pred = replica.forward(inputs[i], &mut sample_rng)?;
                let (l, dpred) = loss.eval(&pred, &targets[i])?;
                replica.backward(&dpred.scale(inv_n))?;
                losses.push(l);
            }
            let mut grads = Vec::new();
            replica.visit_params(&mut |_, p| grads.push(p.grad.clone()));
            Ok(Some((losses, grads)))
        };

        if threads {
            std::thread::scope(|scope| {
                let handles: Vec<_> = ranges
                    .iter()
                    .cloned()
                    .map(|r| scope.spawn(move || run_chunk(r)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("chunk thread panicked"))
                    .collect()
            })
        } else {
            ranges.iter().cloned().map(run_chunk).collect()
        }
    };

    // Combine: losses in sample order, gradients in chunk order.
    let mut total_loss = 0.0;
    let mut chunk_grads: Vec<Vec<Tensor<S>>> = Vec::with_capacity(GRAD_CHUNKS);
    for res in results {
        let Some((losses, grads)) = res? else {
            continue;
        };
        for l in losses {
            total_loss += l;
        }
        chunk_grads.push(grads);
    }
    for grads in &chunk_grads {
        let mut idx = 0;
        master.visit_params_mut(&mut |_, p| {
            p.grad
                .add_scaled(&grads[idx], S::one())
                .expect("replica gradient shape matches master");
            idx += 1;
        });
    }
    Ok(total_loss / n as f64)
}
