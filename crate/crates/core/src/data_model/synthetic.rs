//! Synthetic cohorts with a known optimal arm per subject.
//!
//! Contexts are i.i.d. standard normal. The optimal arm is fixed or the
//! argmax of known linear scores (ties to the lowest arm), so every subject
//! has exactly one arm with reward 1.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Arm, CohortDataset, CohortRecord, DataError, Provenance, Subject, SyntheticSubject, K};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimalArmRule {
    Fixed { arm: Arm },
    /// `argmax_k weights[k]·x + biases[k]`.
    LinearArgmax {
        weights: [Vec<f64>; K],
        biases: [f64; K],
    },
    /// Ordinal bands on a latent score `t = direction·x`: low for
    /// `t < -threshold`, high for `t > threshold`, medium in between.
    Ordinal { direction: Vec<f64>, threshold: f64 },
}

impl OptimalArmRule {
    /// The ordinal rule written as linear scores `(-t, threshold, t)`.
    pub fn as_linear(&self) -> Option<([Vec<f64>; K], [f64; K])> {
        match self {
            OptimalArmRule::Fixed { .. } => None,
            OptimalArmRule::LinearArgmax { weights, biases } => Some((weights.clone(), *biases)),
            OptimalArmRule::Ordinal { direction, threshold } => Some((
                [
                    direction.iter().map(|w| -w).collect(),
                    vec![0.0; direction.len()],
                    direction.clone(),
                ],
                [0.0, *threshold, 0.0],
            )),
        }
    }

    pub fn optimal_arm(&self, x: &[f64]) -> Arm {
        match self.as_linear() {
            None => match self {
                OptimalArmRule::Fixed { arm } => *arm,
                _ => unreachable!(),
            },
            Some((weights, biases)) => {
                let scores: Vec<f64> = (0..K)
                    .map(|k| weights[k].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + biases[k])
                    .collect();
                let mut best = 0;
                for k in 1..K {
                    if scores[k] > scores[best] {
                        best = k;
                    }
                }
                Arm::ALL[best]
            }
        }
    }

    fn check_dim(&self, dim: usize) -> Result<(), DataError> {
        let ok = match self {
            OptimalArmRule::Fixed { .. } => true,
            OptimalArmRule::LinearArgmax { weights, .. } => weights.iter().all(|w| w.len() == dim),
            OptimalArmRule::Ordinal { direction, .. } => direction.len() == dim,
        };
        if ok {
            Ok(())
        } else {
            Err(DataError::InvalidSyntheticSpec(format!(
                "rule weights do not match context dimension {dim}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_records: usize,
    pub dim: usize,
    pub rule: OptimalArmRule,
}

impl SyntheticSpec {
    /// Ordinal cohort whose latent score is the sum of the first `min(dim, 3)`
    /// coordinates, thresholded so the arm shares are roughly 25/50/25.
    pub fn ordinal(n_records: usize, dim: usize) -> Self {
        let active = dim.min(3);
        let direction: Vec<f64> = (0..dim).map(|i| if i < active { 1.0 } else { 0.0 }).collect();
        // 0.6745 is the upper quartile of the standard normal.
        let threshold = 0.6745 * (active as f64).sqrt();
        Self {
            n_records,
            dim,
            rule: OptimalArmRule::Ordinal { direction, threshold },
        }
    }
}

pub fn synthesize_cohort(spec: &SyntheticSpec, seed: u64) -> Result<CohortDataset, DataError> {
    if spec.n_records == 0 {
        return Err(DataError::InvalidSyntheticSpec("record count must be positive".into()));
    }
    if spec.dim == 0 {
        return Err(DataError::InvalidSyntheticSpec("context dimension must be positive".into()));
    }
    spec.rule.check_dim(spec.dim)?;

    let mut rng = seeded_rng(seed, 0);
    let records = (0..spec.n_records)
        .map(|i| {
            let values: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let true_arm = spec.rule.optimal_arm(&values);
            CohortRecord {
                subject: Subject::Synthetic(SyntheticSubject {
                    id: format!("s{i}"),
                    values,
                }),
                true_arm,
            }
        })
        .collect();
    Ok(CohortDataset {
        records,
        provenance: Provenance::Synthetic,
    })
}
