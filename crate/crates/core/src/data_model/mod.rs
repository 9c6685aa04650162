//! Cohort ingestion and context construction.
//!
//! A cohort is an ordered list of subjects, each paired with its true dose
//! arm. Real cohorts come from the patient table ([`parse`]); synthetic
//! cohorts ([`synthetic`]) carry raw real-valued contexts and a full
//! counterfactual reward table by construction. [`features`] turns subjects
//! into normalized feature vectors and [`split`] produces seeded train/test
//! partitions.

pub mod features;
pub mod parse;
pub mod split;
pub mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{
    encode, encode_all, fit_stats, ContinuousStats, FeatureLayout, FeatureVector, ImputationValues,
    NormalizationStats, SD_FLOOR,
};
pub use parse::{load_dataset, parse_dataset, ParseDiagnostics, SchemaConfig};
pub use split::split;
pub use synthetic::{synthesize_cohort, OptimalArmRule, SyntheticSpec};

/// Number of arms.
pub const K: usize = 3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: column `{0}` not found in header")]
    MissingColumn(String),

    #[error("dose must be finite and positive, got {0}")]
    InvalidDose(f64),

    #[error("split ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("continuous feature `{0}` is missing in every training record")]
    FeatureAllMissing(String),

    #[error("subject `{id}` does not fit feature layout {layout:?}")]
    LayoutMismatch { id: String, layout: FeatureLayout },

    #[error("invalid synthetic cohort parameters: {0}")]
    InvalidSyntheticSpec(String),

    #[error("invalid schema config: {0}")]
    SchemaConfig(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

// ── Arms ────────────────────────────────────────────────────────────────

/// Weekly dose bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Low = 0,
    Medium = 1,
    High = 2,
}

impl Arm {
    pub const ALL: [Arm; K] = [Arm::Low, Arm::Medium, Arm::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Arm> {
        Arm::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Arm::Low => "low",
            Arm::Medium => "medium",
            Arm::High => "high",
        }
    }
}

/// Lower edge of the medium bucket, mg/week.
pub const MEDIUM_DOSE_MIN: f64 = 21.0;
/// Upper edge (inclusive) of the medium bucket, mg/week.
pub const MEDIUM_DOSE_MAX: f64 = 49.0;

/// Maps a weekly dose to its arm: `< 21` low, `21..=49` medium, `> 49` high.
pub fn bucketize_dose(dose_mg_week: f64) -> Result<Arm, DataError> {
    if !dose_mg_week.is_finite() || dose_mg_week <= 0.0 {
        return Err(DataError::InvalidDose(dose_mg_week));
    }
    Ok(if dose_mg_week < MEDIUM_DOSE_MIN {
        Arm::Low
    } else if dose_mg_week <= MEDIUM_DOSE_MAX {
        Arm::Medium
    } else {
        Arm::High
    })
}

// ── Patient records ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    #[default]
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    White,
    Asian,
    BlackOrAfricanAmerican,
    #[default]
    MixedOrMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Yes,
    No,
    #[default]
    Missing,
}

impl Flag {
    pub fn is_yes(self) -> bool {
        self == Flag::Yes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Cyp2c9 {
    #[serde(rename = "*1/*1")]
    Star1Star1,
    #[serde(rename = "*1/*2")]
    Star1Star2,
    #[serde(rename = "*1/*3")]
    Star1Star3,
    #[serde(rename = "*2/*2")]
    Star2Star2,
    #[serde(rename = "*2/*3")]
    Star2Star3,
    #[serde(rename = "*3/*3")]
    Star3Star3,
    #[default]
    #[serde(rename = "unknown")]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Vkorc1 {
    #[serde(rename = "G/G")]
    GG,
    #[serde(rename = "A/G")]
    AG,
    #[serde(rename = "A/A")]
    AA,
    #[default]
    #[serde(rename = "unknown")]
    Unknown,
}

/// One retained row of the patient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub gender: Gender,
    pub race: Race,
    /// Decade index, e.g. 6 for 60–69.
    pub age_decades: Option<u8>,
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    pub amiodarone: Flag,
    /// Yes iff any of carbamazepine, phenytoin, rifampin is yes.
    pub enzyme_inducer: Flag,
    pub cyp2c9: Cyp2c9,
    pub vkorc1: Vkorc1,
    pub therapeutic_dose_mg_week: f64,
}

impl PatientRecord {
    /// A record with every optional field missing.
    pub fn with_dose(id: impl Into<String>, therapeutic_dose_mg_week: f64) -> Self {
        Self {
            id: id.into(),
            gender: Gender::Missing,
            race: Race::MixedOrMissing,
            age_decades: None,
            height_cm: None,
            weight_kg: None,
            amiodarone: Flag::Missing,
            enzyme_inducer: Flag::Missing,
            cyp2c9: Cyp2c9::Unknown,
            vkorc1: Vkorc1::Unknown,
            therapeutic_dose_mg_week,
        }
    }

    pub fn true_arm(&self) -> Result<Arm, DataError> {
        bucketize_dose(self.therapeutic_dose_mg_week)
    }
}

/// Raw real-valued context of a synthetic subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubject {
    pub id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Subject {
    Patient(PatientRecord),
    Synthetic(SyntheticSubject),
}

impl Subject {
    pub fn id(&self) -> &str {
        match self {
            Subject::Patient(p) => &p.id,
            Subject::Synthetic(s) => &s.id,
        }
    }

    pub fn as_patient(&self) -> Option<&PatientRecord> {
        match self {
            Subject::Patient(p) => Some(p),
            Subject::Synthetic(_) => None,
        }
    }
}

// ── Cohorts ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    Synthetic,
}

/// A subject together with the arm that earns reward 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub subject: Subject,
    pub true_arm: Arm,
}

impl CohortRecord {
    /// Reward of `arm` for this subject.
    pub fn reward(&self, arm: Arm) -> f64 {
        if arm == self.true_arm {
            1.0
        } else {
            0.0
        }
    }

    pub fn rewards(&self) -> [f64; K] {
        Arm::ALL.map(|a| self.reward(a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortDataset {
    pub records: Vec<CohortRecord>,
    pub provenance: Provenance,
}

impl CohortDataset {
    pub fn from_patients(patients: Vec<PatientRecord>) -> Result<Self, DataError> {
        let records = patients
            .into_iter()
            .map(|p| {
                let true_arm = p.true_arm()?;
                Ok(CohortRecord {
                    subject: Subject::Patient(p),
                    true_arm,
                })
            })
            .collect::<Result<Vec<_>, DataError>>()?;
        Ok(Self {
            records,
            provenance: Provenance::Real,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn true_arms(&self) -> Vec<Arm> {
        self.records.iter().map(|r| r.true_arm).collect()
    }

    /// Full reward table, only for synthetic cohorts.
    pub fn synthetic_truth(&self) -> Option<Vec<[f64; K]>> {
        (self.provenance == Provenance::Synthetic)
            .then(|| self.records.iter().map(CohortRecord::rewards).collect())
    }
}
