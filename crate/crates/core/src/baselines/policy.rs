use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::data_model::{Arm, Subject, K};

/// Tolerance on `Σ p = 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over the three arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmDistribution([f64; K]);

impl ArmDistribution {
    pub fn new(probs: [f64; K]) -> Result<Self, PolicyError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(PolicyError::InvalidDistribution(probs));
        }
        Ok(Self(probs))
    }

    pub fn uniform() -> Self {
        Self([1.0 / 3.0; K])
    }

    pub fn one_hot(arm: Arm) -> Self {
        let mut probs = [0.0; K];
        probs[arm.index()] = 1.0;
        Self(probs)
    }

    pub fn prob(&self, arm: Arm) -> f64 {
        self.0[arm.index()]
    }

    pub fn probs(&self) -> [f64; K] {
        self.0
    }

    /// Most likely arm, ties to the lowest index.
    pub fn argmax(&self) -> Arm {
        let mut best = 0;
        for k in 1..K {
            if self.0[k] > self.0[best] {
                best = k;
            }
        }
        Arm::ALL[best]
    }

    pub fn is_deterministic(&self) -> bool {
        self.0.contains(&1.0)
    }

    /// Inverse-CDF draw. One-hot distributions consume no randomness.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Arm {
        if self.is_deterministic() {
            return self.argmax();
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for arm in Arm::ALL {
            acc += self.0[arm.index()];
            if u < acc {
                return arm;
            }
        }
        // rounding left u above the last partial sum
        *Arm::ALL
            .iter()
            .rev()
            .find(|a| self.0[a.index()] > 0.0)
            .expect("a valid distribution has positive mass")
    }
}

/// What a policy may look at: the encoded context, and the raw subject when
/// the caller has it (clinical dose models need raw units).
#[derive(Debug, Clone, Copy)]
pub struct PolicyContext<'a> {
    pub features: &'a [f64],
    pub subject: Option<&'a Subject>,
}

impl<'a> PolicyContext<'a> {
    pub fn features(features: &'a [f64]) -> Self {
        Self {
            features,
            subject: None,
        }
    }

    pub fn with_subject(features: &'a [f64], subject: &'a Subject) -> Self {
        Self {
            features,
            subject: Some(subject),
        }
    }
}

/// Maps a context to a distribution over arms.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    fn action_distribution(&self, ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError>;

    fn act(&self, ctx: &PolicyContext<'_>, rng: &mut dyn RngCore) -> Result<Arm, PolicyError> {
        Ok(self.action_distribution(ctx)?.sample(rng))
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn action_distribution(&self, ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError> {
        (**self).action_distribution(ctx)
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn action_distribution(&self, ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError> {
        (**self).action_distribution(ctx)
    }
}

/// Uniform over the three arms for every context.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

pub fn random_policy() -> RandomPolicy {
    RandomPolicy
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn action_distribution(&self, _ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError> {
        Ok(ArmDistribution::uniform())
    }
}

/// Always picks the same arm.
#[derive(Debug, Clone, Copy)]
pub struct FixedArmPolicy(pub Arm);

impl Policy for FixedArmPolicy {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn action_distribution(&self, _ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError> {
        Ok(ArmDistribution::one_hot(self.0))
    }
}
