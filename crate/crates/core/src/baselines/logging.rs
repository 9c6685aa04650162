use serde::{Deserialize, Serialize};

use super::policy::{Policy, PolicyContext};
use super::PolicyError;
use crate::data_model::{Arm, CohortDataset, FeatureVector};
use crate::rng::seeded_rng;

/// One logged bandit round `⟨x, a, r, p⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedInteraction {
    pub x: FeatureVector,
    pub arm: Arm,
    pub reward: f64,
    /// Probability the logging policy gave `arm` at `x`.
    pub propensity: f64,
}

/// Observational log of a demonstration policy.
///
/// Learners and estimators only see [`LogDataset::interactions`]; the true
/// arms are reserved for oracle evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDataset {
    interactions: Vec<LoggedInteraction>,
    demo_policy: String,
    hidden_truth: Vec<Arm>,
}

impl LogDataset {
    pub fn new(
        interactions: Vec<LoggedInteraction>,
        demo_policy: impl Into<String>,
        hidden_truth: Vec<Arm>,
    ) -> Result<Self, PolicyError> {
        if interactions.len() != hidden_truth.len() {
            return Err(PolicyError::LengthMismatch {
                expected: interactions.len(),
                got: hidden_truth.len(),
            });
        }
        Ok(Self {
            interactions,
            demo_policy: demo_policy.into(),
            hidden_truth,
        })
    }

    pub fn interactions(&self) -> &[LoggedInteraction] {
        &self.interactions
    }

    pub fn demo_policy(&self) -> &str {
        &self.demo_policy
    }

    pub fn hidden_truth(&self) -> &[Arm] {
        &self.hidden_truth
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn mean_reward(&self) -> f64 {
        self.interactions.iter().map(|i| i.reward).sum::<f64>() / self.len().max(1) as f64
    }

    /// Same log with every propensity replaced by `f(index, interaction)`.
    pub fn with_propensities(&self, mut f: impl FnMut(usize, &LoggedInteraction) -> f64) -> Self {
        let mut out = self.clone();
        for (i, it) in out.interactions.iter_mut().enumerate() {
            it.propensity = f(i, &self.interactions[i]);
        }
        out
    }
}

/// Runs `policy` once per record and records what it did and earned.
pub fn log_interactions(
    policy: &dyn Policy,
    data: &CohortDataset,
    features: &[FeatureVector],
    seed: u64,
) -> Result<LogDataset, PolicyError> {
    if features.len() != data.len() {
        return Err(PolicyError::LengthMismatch {
            expected: data.len(),
            got: features.len(),
        });
    }
    let mut rng = seeded_rng(seed, 0);
    let mut interactions = Vec::with_capacity(data.len());
    for (record, x) in data.records.iter().zip(features) {
        let dist = policy.action_distribution(&PolicyContext::with_subject(x, &record.subject))?;
        let arm = dist.sample(&mut rng);
        interactions.push(LoggedInteraction {
            x: x.clone(),
            arm,
            reward: record.reward(arm),
            propensity: dist.prob(arm),
        });
    }
    LogDataset::new(interactions, policy.name(), data.true_arms())
}
