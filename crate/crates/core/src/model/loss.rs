//! Training losses and targets.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::tensor::Tensor;

/// Per-sample training target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Normalized regression value in `[0, 1]`.
    Value(f64),
    /// Class index (level minus one for the 4-level codes).
    Class(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    CategoricalCrossEntropy,
}

impl Loss {
    /// Per-sample loss and its gradient w.r.t. the prediction vector.
    ///
    /// Both losses are nonnegative and zero exactly when the prediction
    /// matches the target (MSE) or puts probability one on the true class.
    pub fn eval<S: Scalar>(self, pred: &Tensor<S>, target: &Target) -> Result<(f64, Tensor<S>)> {
        match (self, target) {
            (Loss::Mse, Target::Value(y)) => {
                if pred.len() != 1 {
                    return Err(Error::Contract(format!(
                        "mse expects a 1-unit prediction, got shape {:?}",
                        pred.shape()
                    )));
                }
                let p = pred.data()[0].to_f64().unwrap();
                let d = p - y;
                let mut grad = Tensor::zeros(pred.shape());
                grad.data_mut()[0] = cast(2.0 * d);
                Ok((d * d, grad))
            }
            (Loss::CategoricalCrossEntropy, Target::Class(class)) => {
                let n = pred.len();
                if *class >= n {
                    return Err(Error::Contract(format!(
                        "class index {class} out of range for {n}-way head"
                    )));
                }
                let p = pred.data()[*class].to_f64().unwrap().max(1e-300);
                let mut grad = Tensor::zeros(pred.shape());
                grad.data_mut()[*class] = cast(-1.0 / p);
                Ok((-p.ln(), grad))
            }
            (Loss::Mse, Target::Class(_)) | (Loss::CategoricalCrossEntropy, Target::Value(_)) => {
                Err(Error::Contract(
                    "loss kind does not match target kind".to_string(),
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_is_zero_on_exact_match() {
        let pred = Tensor::new(vec![1], vec![0.37f64]).unwrap();
        let (l, g) = Loss::Mse.eval(&pred, &Target::Value(0.37)).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g.data(), &[0.0]);
    }

    #[test]
    fn cross_entropy_is_negative_log_of_true_class_probability() {
        let pred = Tensor::new(vec![4], vec![0.1, 0.2, 0.6, 0.1f64]).unwrap();
        let (l, _) = Loss::CategoricalCrossEntropy
            .eval(&pred, &Target::Class(2))
            .unwrap();
        assert!((l - (-0.6f64.ln())).abs() < 1e-15);

        let perfect = Tensor::new(vec![4], vec![0.0, 0.0, 1.0, 0.0f64]).unwrap();
        let (l, _) = Loss::CategoricalCrossEntropy
            .eval(&perfect, &Target::Class(2))
            .unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn mismatched_target_kind_is_contract_violation() {
        let pred = Tensor::new(vec![1], vec![0.5f64]).unwrap();
        assert!(Loss::Mse.eval(&pred, &Target::Class(0)).is_err());
        assert!(Loss::CategoricalCrossEntropy
            .eval(&pred, &Target::Value(0.5))
            .is_err());
    }
}
