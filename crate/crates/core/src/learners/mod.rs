//! Weighted logistic and softmax regression trained by full-batch gradient
//! descent.
//!
//! Both models minimize
//!
//! ```text
//! J(θ) = (1/W) Σ wᵢ ℓᵢ(θ) + (λ/2) ‖θ‖²,   W = Σ wᵢ
//! ```
//!
//! from an all-zero start, where `ℓ` is the negative log-likelihood and the
//! penalty covers weights and biases. [`binary_loss_and_gradient`] and
//! [`softmax_loss_and_gradient`] expose the un-normalized objective
//! `Σ wᵢ ℓᵢ + (λ/2)‖θ‖²` with its exact gradient; training calls them with
//! `λ·W` and rescales by `1/W`, so duplicating an example is the same as
//! doubling its weight.

mod binary;
mod softmax;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binary::{
    binary_loss_and_gradient, fit_binary, fit_binary_traced, predict_binary, sigmoid, LinearModel,
};
pub use softmax::{fit_softmax, fit_softmax_traced, softmax_loss_and_gradient, SoftmaxModel};

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("no examples supplied")]
    EmptyData,

    #[error("every example weight is zero")]
    DegenerateData,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} outside 0..{classes}")]
    InvalidLabel { label: usize, classes: usize },

    #[error("example weight must be finite and non-negative, got {0}")]
    InvalidWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    /// Stop once the gradient norm of `J` drops below this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 2000,
            l2: 1e-4,
            tolerance: 1e-6,
        }
    }
}

/// A borrowed training example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedExample<'a> {
    pub x: &'a [f64],
    pub label: usize,
    pub weight: f64,
}

impl<'a> WeightedExample<'a> {
    pub fn new(x: &'a [f64], label: usize, weight: f64) -> Self {
        Self { x, label, weight }
    }
}

/// Per-iteration objective values of a fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub losses: Vec<f64>,
    pub converged: bool,
}

/// Checks shape, labels and weights; returns `(dim, total weight)`.
fn validate(examples: &[WeightedExample<'_>], classes: usize) -> Result<(usize, f64), LearnError> {
    let first = examples.first().ok_or(LearnError::EmptyData)?;
    let dim = first.x.len();
    let mut total = 0.0;
    for ex in examples {
        if ex.x.len() != dim {
            return Err(LearnError::DimensionMismatch {
                expected: dim,
                got: ex.x.len(),
            });
        }
        if ex.label >= classes {
            return Err(LearnError::InvalidLabel {
                label: ex.label,
                classes,
            });
        }
        if !ex.weight.is_finite() || ex.weight < 0.0 {
            return Err(LearnError::InvalidWeight(ex.weight));
        }
        total += ex.weight;
    }
    if total <= 0.0 {
        return Err(LearnError::DegenerateData);
    }
    Ok((dim, total))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Plain gradient descent on `objective(θ, λ·W) / W`.
///
/// `objective(θ, l2, with_loss)` returns the gradient and, when asked, the
/// loss; losses are only evaluated when `record` is set.
fn gradient_descent(
    mut theta: Vec<f64>,
    total_weight: f64,
    cfg: &TrainConfig,
    record: bool,
    objective: impl Fn(&[f64], f64, bool) -> (f64, Vec<f64>),
) -> (Vec<f64>, FitTrace) {
    let mut trace = FitTrace {
        losses: Vec::with_capacity(if record { cfg.iterations + 1 } else { 0 }),
        converged: false,
    };
    let scale = 1.0 / total_weight;
    let l2 = cfg.l2 * total_weight;
    for _ in 0..cfg.iterations {
        let (loss, mut grad) = objective(&theta, l2, record);
        if record {
            trace.losses.push(loss * scale);
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        if norm(&grad) < cfg.tolerance {
            trace.converged = true;
            return (theta, trace);
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= cfg.learning_rate * g;
        }
    }
    if record {
        let (loss, _) = objective(&theta, l2, true);
        trace.losses.push(loss * scale);
    }
    (theta, trace)
}

/// A fitted model with the feature layout it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument<M> {
    pub layout: Vec<String>,
    pub model: M,
}

impl<M: Serialize + for<'de> Deserialize<'de>> ModelDocument<M> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn model_json_round_trip_is_exact(
            weights in proptest::collection::vec(-1e6f64..1e6, 1..12),
            bias in -1e3f64..1e3,
        ) {
            let doc = ModelDocument {
                layout: (0..weights.len()).map(|i| format!("f{i}")).collect(),
                model: LinearModel { weights: weights.clone(), bias },
            };
            let back = ModelDocument::<LinearModel>::from_json(&doc.to_json()).unwrap();
            prop_assert_eq!(back, doc);
        }

        #[test]
        fn softmax_json_round_trip_is_exact(
            w in proptest::collection::vec(proptest::collection::vec(-50f64..50.0, 4), 3),
            b in proptest::collection::vec(-5f64..5.0, 3),
        ) {
            let doc = ModelDocument {
                layout: vec!["a".into(), "b".into(), "c".into(), "d".into()],
                model: SoftmaxModel { weights: w, biases: b },
            };
            let back = ModelDocument::<SoftmaxModel>::from_json(&doc.to_json()).unwrap();
            prop_assert_eq!(back, doc);
        }
    }
}
