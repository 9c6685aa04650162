use serde::{Deserialize, Serialize};

use super::{gradient_descent, validate, FitTrace, LearnError, TrainConfig, WeightedExample};

/// Scores beyond this saturate; `σ(±36)` is still strictly inside (0, 1).
const SCORE_CLIP: f64 = 36.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `[w₀ … w_{d−1}, b]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    pub fn from_params(params: &[f64]) -> Self {
        let (w, b) = params.split_at(params.len() - 1);
        Self {
            weights: w.to_vec(),
            bias: b[0],
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, LearnError> {
        if x.len() != self.dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(dot(&self.weights, x) + self.bias)
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic function without overflow for any finite input.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Probability of label 1.
pub fn predict_binary(model: &LinearModel, x: &[f64]) -> Result<f64, LearnError> {
    Ok(sigmoid(model.score(x)?.clamp(-SCORE_CLIP, SCORE_CLIP)))
}

/// `Σ wᵢ [softplus(sᵢ) − yᵢ sᵢ] + (l2/2)‖θ‖²` and its gradient in
/// [`LinearModel::params`] order.
pub fn binary_loss_and_gradient(
    model: &LinearModel,
    examples: &[WeightedExample<'_>],
    l2: f64,
) -> Result<(f64, Vec<f64>), LearnError> {
    let d = model.dim();
    if let Some(ex) = examples.iter().find(|e| e.x.len() != d) {
        return Err(LearnError::DimensionMismatch {
            expected: d,
            got: ex.x.len(),
        });
    }
    Ok(loss_grad_unchecked(&model.weights, model.bias, examples, l2, true))
}

fn loss_grad_unchecked(
    weights: &[f64],
    bias: f64,
    examples: &[WeightedExample<'_>],
    l2: f64,
    with_loss: bool,
) -> (f64, Vec<f64>) {
    let d = weights.len();
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for ex in examples {
        if ex.weight == 0.0 {
            continue;
        }
        let s = dot(weights, ex.x) + bias;
        let y = ex.label as f64;
        // e = exp(−|s|) serves both σ(s) and softplus(s)
        let e = (-s.abs()).exp();
        if with_loss {
            loss += ex.weight * (s.max(0.0) + e.ln_1p() - y * s);
        }
        let p = if s >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
        let r = ex.weight * (p - y);
        for (g, xj) in grad[..d].iter_mut().zip(ex.x) {
            *g += r * xj;
        }
        grad[d] += r;
    }
    let sq = weights.iter().map(|w| w * w).sum::<f64>() + bias * bias;
    loss += 0.5 * l2 * sq;
    for (g, w) in grad[..d].iter_mut().zip(weights) {
        *g += l2 * w;
    }
    grad[d] += l2 * bias;
    (loss, grad)
}

pub fn fit_binary(examples: &[WeightedExample<'_>], cfg: &TrainConfig) -> Result<LinearModel, LearnError> {
    fit(examples, cfg, false).map(|(m, _)| m)
}

/// Like [`fit_binary`], also returning the per-iteration objective.
pub fn fit_binary_traced(
    examples: &[WeightedExample<'_>],
    cfg: &TrainConfig,
) -> Result<(LinearModel, FitTrace), LearnError> {
    fit(examples, cfg, true)
}

fn fit(examples: &[WeightedExample<'_>], cfg: &TrainConfig, record: bool) -> Result<(LinearModel, FitTrace), LearnError> {
    let (dim, total) = validate(examples, 2)?;
    let (theta, trace) = gradient_descent(vec![0.0; dim + 1], total, cfg, record, |theta, l2, with_loss| {
        loss_grad_unchecked(&theta[..dim], theta[dim], examples, l2, with_loss)
    });
    Ok((LinearModel::from_params(&theta), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn ex(x: &[f64], label: usize, weight: f64) -> WeightedExample<'_> {
        WeightedExample::new(x, label, weight)
    }

    #[test]
    fn predict_edge_cases() {
        let zero = LinearModel::zeros(2);
        assert_eq!(predict_binary(&zero, &[3.0, -1.0]).unwrap(), 0.5);

        let biased = LinearModel {
            weights: vec![0.0],
            bias: 20.0,
        };
        assert!(predict_binary(&biased, &[0.0]).unwrap() > 0.999999);

        for s in [0.3, 5.0, 35.0, 700.0] {
            let pos = LinearModel { weights: vec![1.0], bias: 0.0 };
            let p = predict_binary(&pos, &[s]).unwrap();
            let q = predict_binary(&pos, &[-s]).unwrap();
            assert!((p + q - 1.0).abs() < 1e-15, "s = {s}");
            assert!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0);
        }
        assert!(matches!(
            predict_binary(&zero, &[1.0]),
            Err(LearnError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn separable_pair() {
        let (a, b) = ([1.0], [-1.0]);
        let data = [ex(&a, 1, 1.0), ex(&b, 0, 1.0)];
        let model = fit_binary(&data, &TrainConfig::default()).unwrap();
        assert!(predict_binary(&model, &a).unwrap() > 0.9);
        assert!(predict_binary(&model, &b).unwrap() < 0.1);
    }

    #[test]
    fn one_class_limit() {
        let x = [[0.5], [-0.2], [1.0]];
        let data: Vec<_> = x.iter().map(|v| ex(v, 1, 1.0)).collect();
        let short = TrainConfig {
            iterations: 200,
            l2: 0.0,
            ..Default::default()
        };
        let long = TrainConfig {
            iterations: 5000,
            l2: 0.0,
            ..Default::default()
        };
        let p_short = predict_binary(&fit_binary(&data, &short).unwrap(), &x[0]).unwrap();
        let p_long = predict_binary(&fit_binary(&data, &long).unwrap(), &x[0]).unwrap();
        assert!(p_long > p_short && p_long > 0.99);

        let reg = TrainConfig {
            iterations: 20_000,
            l2: 0.1,
            tolerance: 1e-12,
            ..Default::default()
        };
        let m = fit_binary(&data, &reg).unwrap();
        assert!(m.is_finite() && m.bias < 10.0);
    }

    #[test]
    fn duplicate_equals_double_weight() {
        let x = [[1.0, 0.0], [0.0, 1.0], [0.3, 0.3]];
        let dup = [ex(&x[0], 1, 0.7), ex(&x[0], 1, 0.7), ex(&x[1], 0, 1.0), ex(&x[2], 1, 0.2)];
        let once = [ex(&x[0], 1, 1.4), ex(&x[1], 0, 1.0), ex(&x[2], 1, 0.2)];
        let cfg = TrainConfig::default();
        let a = fit_binary(&dup, &cfg).unwrap();
        let b = fit_binary(&once, &cfg).unwrap();
        for (p, q) in a.params().iter().zip(b.params()) {
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn zero_weight_dataset_is_degenerate() {
        let x = [1.0];
        assert_eq!(fit_binary(&[ex(&x, 1, 0.0)], &TrainConfig::default()), Err(LearnError::DegenerateData));
        assert_eq!(fit_binary(&[], &TrainConfig::default()), Err(LearnError::EmptyData));
    }

    #[test]
    fn zero_weight_loss_is_penalty_only() {
        let x = [1.0, 2.0];
        let model = LinearModel {
            weights: vec![0.5, -1.0],
            bias: 2.0,
        };
        let (loss, grad) = binary_loss_and_gradient(&model, &[ex(&x, 1, 0.0)], 0.3).unwrap();
        assert!((loss - 0.5 * 0.3 * (0.25 + 1.0 + 4.0)).abs() < 1e-15);
        assert_eq!(grad, vec![0.3 * 0.5, 0.3 * -1.0, 0.3 * 2.0]);
    }

    #[test]
    fn weight_scaling_scales_data_loss() {
        let mut rng = seeded_rng(3, 0);
        let xs: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let model = LinearModel {
            weights: vec![0.2, -0.4, 0.1],
            bias: 0.3,
        };
        let base: Vec<_> = xs.iter().enumerate().map(|(i, x)| ex(x, i % 2, 0.5 + i as f64 * 0.1)).collect();
        let scaled: Vec<_> = base.iter().map(|e| ex(e.x, e.label, 2.5 * e.weight)).collect();
        let (l1, g1) = binary_loss_and_gradient(&model, &base, 0.0).unwrap();
        let (l2, g2) = binary_loss_and_gradient(&model, &scaled, 0.0).unwrap();
        assert!((l2 - 2.5 * l1).abs() < 1e-12);
        for (a, b) in g1.iter().zip(g2) {
            assert!((b - 2.5 * a).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_is_non_increasing() {
        let mut rng = seeded_rng(17, 0);
        let xs: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let data: Vec<_> = xs
            .iter()
            .map(|x| {
                let label = usize::from(x[0] - 0.5 * x[1] + rng.random_range(-1.0..1.0) > 0.0);
                ex(x, label, rng.random_range(0.1..2.0))
            })
            .collect();
        let (_, trace) = fit_binary_traced(&data, &TrainConfig::default()).unwrap();
        for w in trace.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn fits_are_bit_identical() {
        let x = [[1.0, 2.0], [-1.0, 0.5], [0.2, -0.7]];
        let data = [ex(&x[0], 1, 1.0), ex(&x[1], 0, 2.0), ex(&x[2], 1, 0.5)];
        let a = fit_binary(&data, &TrainConfig::default()).unwrap();
        let b = fit_binary(&data, &TrainConfig::default()).unwrap();
        assert_eq!(a.params(), b.params());
    }
}
