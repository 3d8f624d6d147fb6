//! Evaluation metrics: coefficient of determination and accuracy.

use crate::error::{Error, Result};

/// R² score: `1 - sum((y - yhat)^2) / sum((y - ybar)^2)`.
///
/// 1 is perfect, 0 matches the constant mean predictor, negative is worse
/// than it. A zero total sum of squares (constant actuals) makes the score
/// undefined and returns [`Error::UndefinedR2`] rather than a silent number.
/// Callers pass denormalized, original-unit values.
pub fn r2_score(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::Contract(format!(
            "r2_score needs equal nonzero lengths, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&y, &yhat) in actual.iter().zip(predicted) {
        ss_res += (y - yhat) * (y - yhat);
        ss_tot += (y - mean) * (y - mean);
    }
    if ss_tot == 0.0 {
        return Err(Error::UndefinedR2);
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Fraction of exact class matches.
pub fn accuracy(actual: &[usize], predicted: &[usize]) -> Result<f64> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::Contract(format!(
            "accuracy needs equal nonzero lengths, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    let correct = actual
        .iter()
        .zip(predicted)
        .filter(|(a, p)| a == p)
        .count();
    Ok(correct as f64 / actual.len() as f64)
}
