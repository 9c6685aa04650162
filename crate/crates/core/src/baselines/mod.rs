//! Demonstration policies and log generation.

mod dosing;
mod logging;
mod policy;

use thiserror::Error;

pub use dosing::{
    policy_from_doser, wcda_dose, wpda_dose, DoseOutcome, DoseTerm, Doser, DoserPolicy,
    DosingCoefficients, OutputConvention,
};
pub use logging::{log_interactions, LogDataset, LoggedInteraction};
pub use policy::{
    random_policy, ArmDistribution, FixedArmPolicy, Policy, PolicyContext, RandomPolicy,
    SUM_TOLERANCE,
};

use crate::data_model::K;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid action distribution {0:?}")]
    InvalidDistribution([f64; K]),

    #[error("policy needs the raw patient record, but only features were supplied")]
    MissingPatientRecord,

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("clinical dose model cannot use genotype term {0}")]
    GenotypeTermInClinicalModel(String),

    #[error("unknown dose coefficient `{0}`")]
    UnknownCoefficient(String),

    #[error("invalid coefficient file: {0}")]
    Coefficients(String),

    #[error("model evaluation failed: {0}")]
    Model(String),
}

impl From<crate::learners::LearnError> for PolicyError {
    fn from(e: crate::learners::LearnError) -> Self {
        match e {
            crate::learners::LearnError::DimensionMismatch { expected, got } => {
                PolicyError::DimensionMismatch { expected, got }
            }
            other => PolicyError::Model(other.to_string()),
        }
    }
}
