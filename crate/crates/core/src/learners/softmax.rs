use serde::{Deserialize, Serialize};

use super::{gradient_descent, validate, FitTrace, LearnError, TrainConfig, WeightedExample};

/// Logits further than this below the maximum are raised to it, keeping
/// every class probability positive.
const LOGIT_GAP: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl SoftmaxModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            weights: vec![vec![0.0; dim]; classes],
            biases: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.biases.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Class-major `[w_0, b_0, w_1, b_1, …]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.classes() * (self.dim() + 1));
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w);
            p.push(*b);
        }
        p
    }

    pub fn from_params(params: &[f64], classes: usize) -> Self {
        let stride = params.len() / classes;
        let (weights, biases) = params
            .chunks(stride)
            .map(|c| (c[..stride - 1].to_vec(), c[stride - 1]))
            .unzip();
        Self { weights, biases }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        if x.len() != self.dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut logits = logits(&self.weights, &self.biases, x);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for l in &mut logits {
            *l = l.max(max - LOGIT_GAP);
        }
        let lse = log_sum_exp(&logits);
        Ok(logits.iter().map(|l| (l - lse).exp()).collect())
    }
}

fn logits(weights: &[Vec<f64>], biases: &[f64], x: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .zip(biases)
        .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
        .collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// `Σ wᵢ [lse(sᵢ) − sᵢ,yᵢ] + (l2/2)‖θ‖²` and its gradient in
/// [`SoftmaxModel::params`] order.
pub fn softmax_loss_and_gradient(
    model: &SoftmaxModel,
    examples: &[WeightedExample<'_>],
    l2: f64,
) -> Result<(f64, Vec<f64>), LearnError> {
    let d = model.dim();
    for ex in examples {
        if ex.x.len() != d {
            return Err(LearnError::DimensionMismatch {
                expected: d,
                got: ex.x.len(),
            });
        }
        if ex.label >= model.classes() {
            return Err(LearnError::InvalidLabel {
                label: ex.label,
                classes: model.classes(),
            });
        }
    }
    Ok(loss_grad_unchecked(&model.params(), model.classes(), d, examples, l2, true))
}

fn loss_grad_unchecked(
    theta: &[f64],
    classes: usize,
    d: usize,
    examples: &[WeightedExample<'_>],
    l2: f64,
    with_loss: bool,
) -> (f64, Vec<f64>) {
    let stride = d + 1;
    let mut probs = vec![0.0; classes];
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut scores = vec![0.0; classes];
    for ex in examples {
        if ex.weight == 0.0 {
            continue;
        }
        for (k, s) in scores.iter_mut().enumerate() {
            let block = &theta[k * stride..(k + 1) * stride];
            *s = block[..d].iter().zip(ex.x).map(|(a, v)| a * v).sum::<f64>() + block[d];
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (p, s) in probs.iter_mut().zip(&scores) {
            *p = (s - max).exp();
            z += *p;
        }
        if with_loss {
            loss += ex.weight * (max + z.ln() - scores[ex.label]);
        }
        for (k, p) in probs.iter().enumerate() {
            let target = if k == ex.label { 1.0 } else { 0.0 };
            let r = ex.weight * (p / z - target);
            let g = &mut grad[k * stride..(k + 1) * stride];
            for (gj, xj) in g[..d].iter_mut().zip(ex.x) {
                *gj += r * xj;
            }
            g[d] += r;
        }
    }
    loss += 0.5 * l2 * theta.iter().map(|t| t * t).sum::<f64>();
    for (g, t) in grad.iter_mut().zip(theta) {
        *g += l2 * t;
    }
    (loss, grad)
}

pub fn fit_softmax(
    examples: &[WeightedExample<'_>],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<SoftmaxModel, LearnError> {
    fit(examples, classes, cfg, false).map(|(m, _)| m)
}

/// Like [`fit_softmax`], also returning the per-iteration objective.
pub fn fit_softmax_traced(
    examples: &[WeightedExample<'_>],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<(SoftmaxModel, FitTrace), LearnError> {
    fit(examples, classes, cfg, true)
}

fn fit(
    examples: &[WeightedExample<'_>],
    classes: usize,
    cfg: &TrainConfig,
    record: bool,
) -> Result<(SoftmaxModel, FitTrace), LearnError> {
    let (dim, total) = validate(examples, classes)?;
    let (theta, trace) =
        gradient_descent(vec![0.0; classes * (dim + 1)], total, cfg, record, |theta, l2, with_loss| {
            loss_grad_unchecked(theta, classes, dim, examples, l2, with_loss)
        });
    Ok((SoftmaxModel::from_params(&theta, classes), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit_binary, predict_binary};
    use crate::rng::seeded_rng;
    use rand::Rng;

    #[test]
    fn symmetric_labels_give_uniform() {
        let x = [0.7, -0.3];
        let data: Vec<_> = (0..30).map(|i| WeightedExample::new(&x, i % 3, 1.0)).collect();
        let m = fit_softmax(&data, 3, &TrainConfig::default()).unwrap();
        for p in m.predict(&x).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_class_softmax_matches_logistic() {
        // Overlapping classes so the unpenalized optimum is finite.
        let mut rng = seeded_rng(5, 0);
        let xs: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let data: Vec<_> = xs
            .iter()
            .map(|x| {
                let label = usize::from(x[0] + 0.5 * x[1] + rng.random_range(-1.5..1.5) > 0.0);
                WeightedExample::new(x, label, rng.random_range(0.5..1.5))
            })
            .collect();
        let cfg = TrainConfig {
            learning_rate: 0.5,
            iterations: 200_000,
            l2: 0.0,
            tolerance: 1e-11,
        };
        let soft = fit_softmax(&data, 2, &cfg).unwrap();
        let bin = fit_binary(&data, &cfg).unwrap();
        for x in &xs {
            let p_soft = soft.predict(x).unwrap()[1];
            let p_bin = predict_binary(&bin, x).unwrap();
            assert!((p_soft - p_bin).abs() < 1e-6, "{p_soft} vs {p_bin}");
        }
    }

    #[test]
    fn separable_three_classes() {
        let centers = [[-3.0, 0.0], [0.0, 3.0], [3.0, 0.0]];
        let mut rng = seeded_rng(8, 0);
        let xs: Vec<(Vec<f64>, usize)> = (0..150)
            .map(|i| {
                let c = centers[i % 3];
                (vec![c[0] + rng.random_range(-0.5..0.5), c[1] + rng.random_range(-0.5..0.5)], i % 3)
            })
            .collect();
        let data: Vec<_> = xs.iter().map(|(x, y)| WeightedExample::new(x, *y, 1.0)).collect();
        let m = fit_softmax(&data, 3, &TrainConfig::default()).unwrap();
        for (x, y) in &xs {
            let p = m.predict(x).unwrap();
            let best = (0..3).max_by(|a, b| p[*a].total_cmp(&p[*b])).unwrap();
            assert_eq!(best, *y);
        }
    }

    #[test]
    fn predictions_are_distributions() {
        let mut rng = seeded_rng(21, 0);
        let m = SoftmaxModel {
            weights: (0..3).map(|_| (0..4).map(|_| rng.random_range(-30.0..30.0)).collect()).collect(),
            biases: (0..3).map(|_| rng.random_range(-5.0..5.0)).collect(),
        };
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-10.0..10.0)).collect();
            let p = m.predict(&x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|v| *v > 0.0 && *v <= 1.0));
        }
    }

    #[test]
    fn invalid_label_is_rejected() {
        let x = [1.0];
        assert_eq!(
            fit_softmax(&[WeightedExample::new(&x, 3, 1.0)], 3, &TrainConfig::default()),
            Err(LearnError::InvalidLabel { label: 3, classes: 3 })
        );
    }

    #[test]
    fn params_round_trip() {
        let m = SoftmaxModel {
            weights: vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            biases: vec![0.1, 0.2, 0.3],
        };
        assert_eq!(SoftmaxModel::from_params(&m.params(), 3), m);
    }
}
