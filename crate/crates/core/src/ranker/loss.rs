//! Listwise softmax loss over the premises of one argument.
//!
//! ```text
//! l(y, ŷ) = -Σ_i y_i · log( exp(ŷ_i) / Σ_j exp(ŷ_j) )
//! ```
//!
//! Positives are summed, not averaged. A list without positives has no
//! loss term and evaluates to zero.

use candle_core::Tensor;

use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    Ok(())
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

pub fn listwise_softmax_loss(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check(scores, labels)?;
    let positives: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(&s, _)| s)
        .collect();
    if positives.is_empty() {
        return Ok(0.0);
    }
    let lse = log_sum_exp(scores);
    Ok(positives.iter().map(|s| lse - s).sum())
}

/// Gradient of [`listwise_softmax_loss`] with respect to the scores:
/// `softmax(ŷ) · Σy − y`.
pub fn listwise_softmax_grad(scores: &[f64], labels: &[u8]) -> Result<Vec<f64>> {
    check(scores, labels)?;
    let total: f64 = labels.iter().map(|&y| f64::from(y)).sum();
    let lse = log_sum_exp(scores);
    Ok(scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| (s - lse).exp() * total - f64::from(y))
        .collect())
}

/// Differentiable form over a rank-1 score tensor.
pub fn listwise_softmax_loss_tensor(scores: &Tensor, labels: &[u8]) -> Result<Tensor> {
    let n = scores.dims1()?;
    if n != labels.len() {
        return Err(Error::InvalidInput(format!("{n} scores but {} labels", labels.len())));
    }
    let y: Vec<f32> = labels.iter().map(|&v| f32::from(v)).collect();
    let y = Tensor::from_vec(y, n, scores.device())?;
    let log_p = candle_nn::ops::log_softmax(scores, 0)?;
    Ok((log_p * y)?.sum_all()?.neg()?)
}
