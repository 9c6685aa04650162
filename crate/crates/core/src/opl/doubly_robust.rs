//! Doubly robust cost-sensitive policy learning.
//!
//! Stage 1 fits one reward model per arm on the interactions that logged
//! that arm. Stage 2 forms per-arm targets
//! `d_ik = ρ̂_k(x_i) + 1{a_i = k} (r_i − ρ̂_k(x_i)) / p_i`.
//! Stage 3 fits one score model per arm by weighted logistic regression on
//! `label = 1{d_ik > 1/2}`, `weight = |d_ik − 1/2|`. The policy plays the
//! arm with the highest score, ties to the lowest arm.

use serde::{Deserialize, Serialize};

use super::OplError;
use crate::baselines::{ArmDistribution, LoggedInteraction, Policy, PolicyContext, PolicyError};
use crate::data_model::{Arm, K};
use crate::learners::{fit_binary, predict_binary, LearnError, LinearModel, TrainConfig, WeightedExample};

const TARGET_OFFSET: f64 = 0.5;

/// Per-arm expected reward `ρ̂_k(x)`.
pub trait RewardEstimator: Send + Sync {
    fn predict_reward(&self, arm: Arm, x: &[f64]) -> Result<f64, LearnError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryPredictor {
    Logistic { model: LinearModel },
    Constant { value: f64 },
}

impl BinaryPredictor {
    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnError> {
        match self {
            BinaryPredictor::Logistic { model } => predict_binary(model, x),
            BinaryPredictor::Constant { value } => Ok(*value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRewardModels {
    pub models: [BinaryPredictor; K],
    pub warnings: Vec<String>,
}

impl RewardEstimator for ArmRewardModels {
    fn predict_reward(&self, arm: Arm, x: &[f64]) -> Result<f64, LearnError> {
        self.models[arm.index()].predict(x)
    }
}

/// Constant-zero reward model for every arm.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRewardModel;

impl RewardEstimator for ZeroRewardModel {
    fn predict_reward(&self, _arm: Arm, _x: &[f64]) -> Result<f64, LearnError> {
        Ok(0.0)
    }
}

/// Stage 1: one logistic reward model per arm, fit on that arm's
/// interactions. Arms never logged get the constant 0 model.
pub fn fit_arm_reward_models(logs: &[LoggedInteraction], cfg: &TrainConfig) -> Result<ArmRewardModels, OplError> {
    let mut warnings = Vec::new();
    let mut fit = |arm: Arm| -> Result<BinaryPredictor, OplError> {
        let examples: Vec<_> = logs
            .iter()
            .filter(|it| it.arm == arm)
            .map(|it| WeightedExample::new(&it.x, usize::from(it.reward > TARGET_OFFSET), 1.0))
            .collect();
        if examples.is_empty() {
            let msg = format!("arm {} never logged; reward model is constant 0", arm.name());
            log::warn!("{msg}");
            warnings.push(msg);
            return Ok(BinaryPredictor::Constant { value: 0.0 });
        }
        Ok(BinaryPredictor::Logistic {
            model: fit_binary(&examples, cfg)?,
        })
    };
    let models = [fit(Arm::Low)?, fit(Arm::Medium)?, fit(Arm::High)?];
    Ok(ArmRewardModels { models, warnings })
}

/// `n × K` doubly robust reward targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DrScoreMatrix {
    pub rows: Vec<[f64; K]>,
}

pub fn dr_score_matrix(logs: &[LoggedInteraction], reward_models: &dyn RewardEstimator) -> Result<DrScoreMatrix, OplError> {
    let rows = logs
        .iter()
        .map(|it| {
            if !(it.propensity > 0.0) {
                return Err(OplError::InvalidPropensity(it.propensity));
            }
            let mut row = [0.0; K];
            for arm in Arm::ALL {
                let rho = reward_models.predict_reward(arm, &it.x)?;
                row[arm.index()] = if arm == it.arm {
                    rho + (it.reward - rho) / it.propensity
                } else {
                    rho
                };
            }
            Ok(row)
        })
        .collect::<Result<_, OplError>>()?;
    Ok(DrScoreMatrix { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrPolicyModel {
    pub reward_models: ArmRewardModels,
    pub score_models: [BinaryPredictor; K],
    pub warnings: Vec<String>,
}

impl DrPolicyModel {
    pub fn scores(&self, x: &[f64]) -> Result<[f64; K], LearnError> {
        let mut s = [0.0; K];
        for (k, m) in self.score_models.iter().enumerate() {
            s[k] = m.predict(x)?;
        }
        Ok(s)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Arm, LearnError> {
        let s = self.scores(x)?;
        let mut best = 0;
        for k in 1..K {
            if s[k] > s[best] {
                best = k;
            }
        }
        Ok(Arm::ALL[best])
    }
}

impl Policy for DrPolicyModel {
    fn name(&self) -> &str {
        "doubly_robust"
    }

    fn action_distribution(&self, ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError> {
        Ok(ArmDistribution::one_hot(self.predict(ctx.features)?))
    }
}

pub fn train_dr_policy(logs: &[LoggedInteraction], cfg: &TrainConfig) -> Result<DrPolicyModel, OplError> {
    if logs.is_empty() {
        return Err(OplError::EmptyLogs);
    }
    let reward_models = fit_arm_reward_models(logs, cfg)?;
    train_dr_policy_from(logs, reward_models, cfg)
}

/// Stages 2 and 3 with the given reward models.
pub fn train_dr_policy_from(
    logs: &[LoggedInteraction],
    reward_models: ArmRewardModels,
    cfg: &TrainConfig,
) -> Result<DrPolicyModel, OplError> {
    if logs.is_empty() {
        return Err(OplError::EmptyLogs);
    }
    let targets = dr_score_matrix(logs, &reward_models)?;
    let mut warnings = reward_models.warnings.clone();
    let mut fit = |arm: Arm| -> Result<BinaryPredictor, OplError> {
        let k = arm.index();
        let examples: Vec<_> = logs
            .iter()
            .zip(&targets.rows)
            .map(|(it, row)| {
                WeightedExample::new(&it.x, usize::from(row[k] > TARGET_OFFSET), (row[k] - TARGET_OFFSET).abs())
            })
            .collect();
        match fit_binary(&examples, cfg) {
            Ok(model) => Ok(BinaryPredictor::Logistic { model }),
            Err(LearnError::DegenerateData) => {
                let msg = format!("arm {} has all targets at the offset; score is constant 1/2", arm.name());
                log::warn!("{msg}");
                warnings.push(msg);
                Ok(BinaryPredictor::Constant { value: TARGET_OFFSET })
            }
            Err(e) => Err(e.into()),
        }
    };
    let score_models = [fit(Arm::Low)?, fit(Arm::Medium)?, fit(Arm::High)?];
    Ok(DrPolicyModel {
        reward_models,
        score_models,
        warnings,
    })
}
