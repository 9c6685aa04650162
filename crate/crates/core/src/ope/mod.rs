//! Off-policy value estimation from logged interactions, and the exact
//! oracle available when every subject's true arm is known.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{ArmDistribution, LoggedInteraction, Policy, PolicyContext, PolicyError};
use crate::data_model::{Arm, CohortDataset, FeatureVector, K};
use crate::learners::{fit_softmax, LearnError, SoftmaxModel, TrainConfig, WeightedExample};
use crate::opl::{fit_arm_reward_models, OplError, RewardEstimator};
use crate::rng::seeded_rng;

/// Default NCIS weight cap.
pub const DEFAULT_NCIS_CAP: f64 = 100.0;

#[derive(Debug, Error)]
pub enum OpeError {
    #[error("rejection sampling accepted no interactions")]
    EmptyAcceptance,

    #[error("all importance weights are zero")]
    DegenerateWeights,

    #[error("logged propensity must be positive, got {0}")]
    InvalidPropensity(f64),

    #[error("weight cap must be positive, got {0}")]
    InvalidCap(f64),

    #[error("no logged interactions")]
    EmptyLogs,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Policy(#[from] PolicyError),

    #[error(transparent)]
    Opl(#[from] OplError),

    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub estimator: String,
    pub mean: f64,
    /// Accepted interactions for rejection sampling, total otherwise.
    pub n_effective: usize,
}

impl ValueEstimate {
    fn new(estimator: &str, mean: f64, n_effective: usize) -> Self {
        Self {
            estimator: estimator.to_string(),
            mean,
            n_effective,
        }
    }
}

fn check_logs(logs: &[LoggedInteraction]) -> Result<(), OpeError> {
    if logs.is_empty() {
        return Err(OpeError::EmptyLogs);
    }
    match logs.iter().find(|it| !(it.propensity > 0.0)) {
        Some(it) => Err(OpeError::InvalidPropensity(it.propensity)),
        None => Ok(()),
    }
}

fn distribution_at(target: &dyn Policy, x: &[f64]) -> Result<ArmDistribution, PolicyError> {
    target.action_distribution(&PolicyContext::features(x))
}

/// Keeps the interactions where the target would have played the logged
/// arm and averages their rewards. Deterministic targets play their argmax;
/// stochastic targets draw from a stream seeded by `seed`.
pub fn evaluate_rejection_sampling(
    logs: &[LoggedInteraction],
    target: &dyn Policy,
    seed: u64,
) -> Result<ValueEstimate, OpeError> {
    check_logs(logs)?;
    let mut rng = seeded_rng(seed, 0);
    let mut kept = 0usize;
    let mut total = 0.0;
    for it in logs {
        let dist = distribution_at(target, &it.x)?;
        let arm = if dist.is_deterministic() {
            dist.argmax()
        } else {
            dist.sample(&mut rng)
        };
        if arm == it.arm {
            kept += 1;
            total += it.reward;
        }
    }
    if kept == 0 {
        return Err(OpeError::EmptyAcceptance);
    }
    Ok(ValueEstimate::new("rejection_sampling", total / kept as f64, kept))
}

/// Mean of `Σ_k π(k|x) ρ̂_k(x) + π(a|x)/p · (r − ρ̂_a(x))`.
pub fn evaluate_dr(
    logs: &[LoggedInteraction],
    target: &dyn Policy,
    reward_models: &dyn RewardEstimator,
) -> Result<ValueEstimate, OpeError> {
    check_logs(logs)?;
    let mut total = 0.0;
    for it in logs {
        let pi = distribution_at(target, &it.x)?;
        let mut direct = 0.0;
        let mut rho_logged = 0.0;
        for arm in Arm::ALL {
            let rho = reward_models.predict_reward(arm, &it.x)?;
            direct += pi.prob(arm) * rho;
            if arm == it.arm {
                rho_logged = rho;
            }
        }
        total += direct + pi.prob(it.arm) / it.propensity * (it.reward - rho_logged);
    }
    Ok(ValueEstimate::new("doubly_robust", total / logs.len() as f64, logs.len()))
}

/// DR with reward models fit on a random half of the log and the estimate
/// taken over the other half.
pub fn evaluate_dr_split(
    logs: &[LoggedInteraction],
    target: &dyn Policy,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<ValueEstimate, OpeError> {
    check_logs(logs)?;
    let mut order: Vec<usize> = (0..logs.len()).collect();
    order.shuffle(&mut seeded_rng(seed, 1));
    let half = logs.len() / 2;
    let fit: Vec<_> = order[..half].iter().map(|&i| logs[i].clone()).collect();
    let eval: Vec<_> = order[half..].iter().map(|&i| logs[i].clone()).collect();
    let models = fit_arm_reward_models(&fit, cfg)?;
    evaluate_dr(&eval, target, &models)
}

/// Normalized capped importance sampling:
/// `w = min(π̂(a|x)/p, c)`, estimate `Σ w r / Σ w`.
pub fn evaluate_ncis(
    logs: &[LoggedInteraction],
    target_dist: &dyn Policy,
    cap: f64,
) -> Result<ValueEstimate, OpeError> {
    if !(cap > 0.0) {
        return Err(OpeError::InvalidCap(cap));
    }
    check_logs(logs)?;
    let weights = ncis_weights(logs, target_dist, cap)?;
    let sum_w: f64 = weights.iter().sum();
    if sum_w <= 0.0 {
        return Err(OpeError::DegenerateWeights);
    }
    let sum_wr: f64 = weights.iter().zip(logs).map(|(w, it)| w * it.reward).sum();
    Ok(ValueEstimate::new("ncis", sum_wr / sum_w, logs.len()))
}

pub fn ncis_weights(logs: &[LoggedInteraction], target_dist: &dyn Policy, cap: f64) -> Result<Vec<f64>, OpeError> {
    logs.iter()
        .map(|it| {
            if !(it.propensity > 0.0) {
                return Err(OpeError::InvalidPropensity(it.propensity));
            }
            let pi = distribution_at(target_dist, &it.x)?;
            Ok((pi.prob(it.arm) / it.propensity).min(cap))
        })
        .collect()
}

/// Softmax approximation of a policy's action distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDistributionModel {
    pub model: SoftmaxModel,
    pub warnings: Vec<String>,
}

impl Policy for TargetDistributionModel {
    fn name(&self) -> &str {
        "target_distribution"
    }

    fn action_distribution(&self, ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError> {
        let p = self.model.predict(ctx.features)?;
        let sum: f64 = p.iter().sum();
        ArmDistribution::new([p[0] / sum, p[1] / sum, p[2] / sum])
    }
}

/// Fits a softmax regression on `(x, arm the target plays at x)`.
/// Stochastic targets are sampled from a stream seeded by `seed`.
pub fn fit_target_distribution(
    target: &dyn Policy,
    contexts: &[FeatureVector],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TargetDistributionModel, OpeError> {
    let mut rng = seeded_rng(seed, 2);
    let mut labels = Vec::with_capacity(contexts.len());
    for x in contexts {
        let dist = distribution_at(target, x)?;
        let arm = if dist.is_deterministic() {
            dist.argmax()
        } else {
            dist.sample(&mut rng)
        };
        labels.push(arm.index());
    }
    let mut warnings = Vec::new();
    if labels.windows(2).all(|w| w[0] == w[1]) {
        let msg = format!("target `{}` plays a single arm on every context", target.name());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let examples: Vec<_> = contexts
        .iter()
        .zip(&labels)
        .map(|(x, &y)| WeightedExample::new(x, y, 1.0))
        .collect();
    let model = fit_softmax(&examples, K, cfg)?;
    Ok(TargetDistributionModel { model, warnings })
}

/// Exact expected reward `mean_i Σ_k π(k|x_i) 1{k = true arm_i}`.
pub fn oracle_value(target: &dyn Policy, data: &CohortDataset, features: &[FeatureVector]) -> Result<ValueEstimate, OpeError> {
    if features.len() != data.len() {
        return Err(OpeError::LengthMismatch {
            expected: data.len(),
            got: features.len(),
        });
    }
    if data.is_empty() {
        return Err(OpeError::EmptyLogs);
    }
    let mut total = 0.0;
    for (record, x) in data.records.iter().zip(features) {
        let pi = target.action_distribution(&PolicyContext::with_subject(x, &record.subject))?;
        total += pi.prob(record.true_arm);
    }
    Ok(ValueEstimate::new("oracle", total / data.len() as f64, data.len()))
}
