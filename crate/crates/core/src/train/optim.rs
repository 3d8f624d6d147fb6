//! Parameter update rules: plain SGD and bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::{cast, Scalar};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = match self {
            OptimizerKind::Sgd { lr } => *lr,
            OptimizerKind::Adam { lr, .. } => *lr,
        };
        if !(lr > 0.0) {
            return Err(Error::Contract(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        Ok(())
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::adam_default()
    }
}

struct Moments<S: Scalar> {
    m: Tensor<S>,
    v: Tensor<S>,
}

/// Stateful optimizer over one model's parameter list.
pub struct Optimizer<S: Scalar> {
    kind: OptimizerKind,
    step: u64,
    slots: Vec<Moments<S>>,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            step: 0,
            slots: Vec::new(),
        }
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    /// Apply one update from the gradients accumulated in `model`.
    ///
    /// With a zero first moment state (initialization) a zero gradient is an
    /// exact no-op under both rules: SGD subtracts `lr * 0` and Adam's
    /// update is `0 / (0 + eps)`.
    pub fn step(&mut self, model: &mut Model<S>) -> Result<()> {
        // Reject non-finite gradients up front, naming the parameter.
        let mut bad: Option<String> = None;
        model.visit_params(&mut |name, p| {
            if bad.is_none() && p.grad.data().iter().any(|g| !g.is_finite()) {
                bad = Some(name.to_string());
            }
        });
        if let Some(name) = bad {
            return Err(Error::Training(format!(
                "non-finite gradient in parameter {name}"
            )));
        }

        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                let lr: S = cast(lr);
                model.visit_params_mut(&mut |_, p| {
                    for (w, &g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *w = *w - lr * g;
                    }
                });
            }
            OptimizerKind::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
            } => {
                if self.slots.is_empty() {
                    model.visit_params(&mut |_, p| {
                        self.slots.push(Moments {
                            m: Tensor::zeros(p.value.shape()),
                            v: Tensor::zeros(p.value.shape()),
                        });
                    });
                }
                let b1: S = cast(beta1);
                let b2: S = cast(beta2);
                let one = S::one();
                let bias1: S = cast(1.0 - beta1.powi(self.step as i32));
                let bias2: S = cast(1.0 - beta2.powi(self.step as i32));
                let lr: S = cast(lr);
                let eps: S = cast(epsilon);
                let slots = &mut self.slots;
                let mut idx = 0;
                let mut arity_ok = true;
                model.visit_params_mut(&mut |_, p| {
                    if idx >= slots.len() {
                        arity_ok = false;
                        return;
                    }
                    let slot = &mut slots[idx];
                    idx += 1;
                    let (md, vd) = (slot.m.data_mut(), slot.v.data_mut());
                    for (((w, &g), m), v) in p
                        .value
                        .data_mut()
                        .iter_mut()
                        .zip(p.grad.data())
                        .zip(md.iter_mut())
                        .zip(vd.iter_mut())
                    {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        let m_hat = *m / bias1;
                        let v_hat = *v / bias2;
                        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                });
                if !arity_ok || idx != slots.len() {
                    return Err(Error::Contract(
                        "optimizer state does not match model parameter list".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}
