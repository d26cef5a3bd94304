//! Training objectives over per-token logits.
//!
//! Both losses take raw logits and the per-token targets in `[0, 1]` and
//! return the loss value together with its gradient with respect to the
//! logits; the model applies the chain rule from there.
//!
//! * [`mse_loss`] — mean squared error between `sigmoid(logit)` and the
//!   target.
//! * [`pairwise_rank_loss`] — for every ordered token pair whose target gap
//!   `y_i − y_j` is positive, a logistic penalty `−log σ(s_i − s_j)` weighted
//!   by that gap, normalized by `N²`. Pushes the score order toward the
//!   target order, caring most about pairs with large emphasis gaps.
//! * [`combined_loss`] — `mse + λ · pairwise`.

use crate::error::{Error, Result};

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + exp(x))`; `−log σ(x) = softplus(−x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// A loss value and its gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Vec<f64>,
}

fn check_inputs(logits: &[f64], targets: &[f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::Argument("loss over an empty sequence".into()));
    }
    if logits.len() != targets.len() {
        return Err(Error::Argument(format!(
            "{} logits but {} targets",
            logits.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Mean squared error on sigmoid scores: `(1/N) Σ (σ(s_i) − y_i)²`.
pub fn mse_loss(logits: &[f64], targets: &[f64]) -> Result<LossOutput> {
    check_inputs(logits, targets)?;
    let n = logits.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (g, (&s, &y)) in grad.iter_mut().zip(logits.iter().zip(targets)) {
        let p = sigmoid(s);
        let diff = p - y;
        value += diff * diff / n;
        *g = 2.0 * diff * p * (1.0 - p) / n;
    }
    Ok(LossOutput { value, grad })
}

/// Gap-weighted pairwise ranking loss:
/// `(1/N²) Σ_i Σ_j max(y_i − y_j, 0) · (−log σ(s_i − s_j))`.
///
/// Pairs with no positive target gap contribute nothing and are skipped.
/// Invariant under a common shift of all logits.
pub fn pairwise_rank_loss(logits: &[f64], targets: &[f64]) -> Result<LossOutput> {
    check_inputs(logits, targets)?;
    let n = logits.len();
    let scale = 1.0 / (n as f64 * n as f64);
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let weight = targets[i] - targets[j];
            if weight <= 0.0 {
                continue;
            }
            let d = logits[i] - logits[j];
            value += scale * weight * softplus(-d);
            let slope = scale * weight * (sigmoid(d) - 1.0);
            grad[i] += slope;
            grad[j] -= slope;
        }
    }
    Ok(LossOutput { value, grad })
}

/// `mse + λ · pairwise`, sharing one gradient vector.
pub fn combined_loss(logits: &[f64], targets: &[f64], lambda: f64) -> Result<LossOutput> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Argument(format!(
            "ranking weight must be finite and non-negative, got {lambda}"
        )));
    }
    let mse = mse_loss(logits, targets)?;
    let pair = pairwise_rank_loss(logits, targets)?;
    let mut grad = mse.grad;
    for (g, p) in grad.iter_mut().zip(&pair.grad) {
        *g += lambda * p;
    }
    Ok(LossOutput {
        value: mse.value + lambda * pair.value,
        grad,
    })
}
