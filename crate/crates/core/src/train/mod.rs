//! The training loop: seeded shuffling, minibatch steps, per-epoch metric
//! history, and inference-mode evaluation.

mod metrics;
mod optim;

pub use metrics::{accuracy, r2_score};
pub use optim::{Optimizer, OptimizerKind};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Normalizer, Sample, VariableKind};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::model::{chunked_batch_step, Head, Loss, Model, Target, GRAD_CHUNKS};
use crate::rng::{Rng, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Loss override; the head's standard pairing when absent.
    pub loss: Option<Loss>,
    /// Force a single-threaded run. Gradient accumulation is chunk-ordered
    /// either way, so results are bitwise identical with or without threads.
    pub deterministic: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 100,
            batch_size: 64,
            optimizer: OptimizerKind::adam_default(),
            seed: 0,
            loss: None,
            deterministic: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Contract("batch size must be >= 1".to_string()));
        }
        self.optimizer.validate()
    }
}

/// Metrics of one completed epoch. Test metrics come from inference-mode
/// passes over the held-out partition; `None` marks an undefined R².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_metric: Option<f64>,
    pub test_metric: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingRun {
    pub config: TrainingConfig,
    pub metric_kind: MetricKind,
    pub history: Vec<EpochRecord>,
    pub wall_time_secs: f64,
}

impl TrainingRun {
    pub fn final_train_metric(&self) -> Option<f64> {
        self.history.last().and_then(|r| r.train_metric)
    }

    pub fn final_test_metric(&self) -> Option<f64> {
        self.history.last().and_then(|r| r.test_metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    R2,
    Accuracy,
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricKind::R2 => write!(f, "r2"),
            MetricKind::Accuracy => write!(f, "accuracy"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPair {
    pub section_id: String,
    pub actual: f64,
    pub predicted: f64,
}

/// Inference-mode evaluation of one dataset partition: the metric plus the
/// per-section (actual, predicted) pairs in original units (levels for the
/// discrete indicators).
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub kind: MetricKind,
    /// `None` when the R² is undefined (constant actuals).
    pub value: Option<f64>,
    pub pairs: Vec<PredictionPair>,
}

/// Argmax over a probability vector; first maximum wins ties.
fn argmax<S: Scalar>(data: &[S]) -> usize {
    let mut best = 0;
    for (i, v) in data.iter().enumerate() {
        if *v > data[best] {
            best = i;
        }
    }
    best
}

fn head_matches_indicator(head: Head, kind: VariableKind) -> bool {
    matches!(
        (head, kind),
        (Head::Classification4, VariableKind::Discrete)
            | (Head::Regression1, VariableKind::Continuous)
    )
}

/// Evaluate `model` on the given samples. `parallel` splits the samples
/// over [`GRAD_CHUNKS`] replica threads; outputs are ordered by sample
/// index, so the result does not depend on the execution mode.
pub fn evaluate<S: Scalar>(
    model: &Model<S>,
    samples: &[&Sample<S>],
    norm: &Normalizer,
    indicator0: usize,
    kind: MetricKind,
    parallel: bool,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Contract(
            "evaluation partition must be nonempty".to_string(),
        ));
    }

    let predict_range = |range: std::ops::Range<usize>| -> Result<Vec<f64>> {
        let mut replica = model.clone();
        replica.set_mode(Mode::Infer);
        let mut rng = Rng::from_seed(0); // unused in inference mode
        let mut out = Vec::with_capacity(range.len());
        for i in range {
            let pred = replica.forward(&samples[i].features, &mut rng)?;
            let value = match kind {
                MetricKind::R2 => norm.denormalize(indicator0, pred.data()[0].to_f64().unwrap()),
                MetricKind::Accuracy => (argmax(pred.data()) + 1) as f64,
            };
            out.push(value);
        }
        Ok(out)
    };

    let n = samples.len();
    let chunk = n.div_ceil(GRAD_CHUNKS);
    let ranges: Vec<std::ops::Range<usize>> = (0..n.div_ceil(chunk.max(1)))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect();
    let chunks: Vec<Result<Vec<f64>>> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .iter()
                .cloned()
                .map(|r| scope.spawn(|| predict_range(r)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation thread panicked"))
                .collect()
        })
    } else {
        ranges.iter().cloned().map(predict_range).collect()
    };

    let mut predicted = Vec::with_capacity(n);
    for c in chunks {
        predicted.extend(c?);
    }

    let pairs: Vec<PredictionPair> = samples
        .iter()
        .zip(&predicted)
        .map(|(s, &p)| PredictionPair {
            section_id: s.section_id.clone(),
            actual: match s.target {
                Target::Class(c) => (c + 1) as f64,
                Target::Value(_) => s.target_raw,
            },
            predicted: p,
        })
        .collect();

    let value = match kind {
        MetricKind::R2 => {
            let actual: Vec<f64> = pairs.iter().map(|p| p.actual).collect();
            match r2_score(&actual, &predicted) {
                Ok(v) => Some(v),
                Err(Error::UndefinedR2) => None,
                Err(e) => return Err(e),
            }
        }
        MetricKind::Accuracy => {
            let actual: Vec<usize> = pairs.iter().map(|p| p.actual as usize).collect();
            let pred: Vec<usize> = predicted.iter().map(|&p| p as usize).collect();
            Some(accuracy(&actual, &pred)?)
        }
    };

    Ok(Evaluation { kind, value, pairs })
}

/// Metric kind used for a dataset's indicator.
pub fn metric_for<S: Scalar>(dataset: &Dataset<S>) -> MetricKind {
    match dataset.indicator.kind {
        VariableKind::Continuous => MetricKind::R2,
        VariableKind::Discrete => MetricKind::Accuracy,
    }
}

/// Train `model` on the dataset's training partition, recording train and
/// test metrics (inference mode) after every epoch.
///
/// All randomness derives from `config.seed`: the epoch shuffles and the
/// per-sample dropout seeds come from one training stream, so a rerun with
/// the same configuration reproduces the run bitwise.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    dataset: &Dataset<S>,
    norm: &Normalizer,
    config: &TrainingConfig,
) -> Result<TrainingRun> {
    config.validate()?;
    if !head_matches_indicator(model.spec().head, dataset.indicator.kind) {
        return Err(Error::Contract(format!(
            "model head {:?} does not match indicator {}",
            model.spec().head,
            dataset.indicator.name
        )));
    }
    let train_samples = dataset.train();
    let test_samples = dataset.test();
    if train_samples.is_empty() || test_samples.is_empty() {
        return Err(Error::Contract(
            "training needs nonempty train and test partitions".to_string(),
        ));
    }
    let loss = config.loss.unwrap_or(model.spec().head.default_loss());
    let metric_kind = metric_for(dataset);
    let threads = !config.deterministic;
    let indicator0 = dataset.indicator.index - 1;

    let start = std::time::Instant::now();
    let mut rng = Rng::for_stream(config.seed, Stream::Train);
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_samples.len()).collect();

    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let inputs: Vec<&crate::tensor::Tensor<S>> =
                batch.iter().map(|&i| &train_samples[i].features).collect();
            let targets: Vec<Target> = batch.iter().map(|&i| train_samples[i].target).collect();
            let seeds: Vec<u64> = (0..batch.len()).map(|_| rng.next_u64()).collect();
            model.zero_grads();
            let loss_value =
                chunked_batch_step(model, &inputs, &targets, loss, &seeds, threads)?;
            if !loss_value.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}, batch {batches}"
                )));
            }
            optimizer.step(model)?;
            epoch_loss += loss_value;
            batches += 1;
        }

        let train_eval = evaluate(model, &train_samples, norm, indicator0, metric_kind, threads)?;
        let test_eval = evaluate(model, &test_samples, norm, indicator0, metric_kind, threads)?;
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / batches as f64,
            train_metric: train_eval.value,
            test_metric: test_eval.value,
        });
    }

    Ok(TrainingRun {
        config: config.clone(),
        metric_kind,
        history,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
