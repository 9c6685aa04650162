//! Linear square-root dose models (clinical and pharmacogenetic).
//!
//! Coefficients are configuration data loaded from TOML; the defaults ship
//! in `assets/`. A model predicts `sqrt(dose)`; the dose is the square of
//! the linear score, with negative scores clamped to zero.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::policy::{ArmDistribution, Policy, PolicyContext};
use super::PolicyError;
use crate::data_model::{
    bucketize_dose, Arm, Cyp2c9, ImputationValues, PatientRecord, Race, Vkorc1,
};

const DEFAULT_WCDA: &str = include_str!("../../assets/wcda.toml");
const DEFAULT_WPDA: &str = include_str!("../../assets/wpda.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputConvention {
    /// Linear score is the square root of the weekly dose in mg.
    SqrtWeeklyDoseMg,
}

/// Model input terms, named as in the coefficient file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DoseTerm {
    AgeDecades,
    HeightCm,
    WeightKg,
    RaceAsian,
    RaceBlack,
    RaceMixedOrMissing,
    EnzymeInducer,
    Amiodarone,
    Vkorc1AG,
    Vkorc1AA,
    Vkorc1Unknown,
    Cyp2c9_12,
    Cyp2c9_13,
    Cyp2c9_22,
    Cyp2c9_23,
    Cyp2c9_33,
    Cyp2c9Unknown,
}

impl DoseTerm {
    pub fn parse(name: &str) -> Option<Self> {
        use DoseTerm::*;
        Some(match name {
            "age_decades" => AgeDecades,
            "height_cm" => HeightCm,
            "weight_kg" => WeightKg,
            "race_asian" => RaceAsian,
            "race_black_or_african_american" => RaceBlack,
            "race_mixed_or_missing" => RaceMixedOrMissing,
            "enzyme_inducer" => EnzymeInducer,
            "amiodarone" => Amiodarone,
            "vkorc1_a_g" => Vkorc1AG,
            "vkorc1_a_a" => Vkorc1AA,
            "vkorc1_unknown" => Vkorc1Unknown,
            "cyp2c9_1_2" => Cyp2c9_12,
            "cyp2c9_1_3" => Cyp2c9_13,
            "cyp2c9_2_2" => Cyp2c9_22,
            "cyp2c9_2_3" => Cyp2c9_23,
            "cyp2c9_3_3" => Cyp2c9_33,
            "cyp2c9_unknown" => Cyp2c9Unknown,
            _ => return None,
        })
    }

    pub fn is_genotype(self) -> bool {
        use DoseTerm::*;
        matches!(
            self,
            Vkorc1AG | Vkorc1AA | Vkorc1Unknown | Cyp2c9_12 | Cyp2c9_13 | Cyp2c9_22 | Cyp2c9_23 | Cyp2c9_33 | Cyp2c9Unknown
        )
    }

    /// Raw-unit value; missing continuous fields take the imputation value,
    /// missing flags count as absent.
    fn value(self, p: &PatientRecord, fill: &ImputationValues) -> f64 {
        use DoseTerm::*;
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match self {
            AgeDecades => p.age_decades.map(f64::from).unwrap_or(fill.age_decades),
            HeightCm => p.height_cm.unwrap_or(fill.height_cm),
            WeightKg => p.weight_kg.unwrap_or(fill.weight_kg),
            RaceAsian => ind(p.race == Race::Asian),
            RaceBlack => ind(p.race == Race::BlackOrAfricanAmerican),
            RaceMixedOrMissing => ind(p.race == Race::MixedOrMissing),
            EnzymeInducer => ind(p.enzyme_inducer.is_yes()),
            Amiodarone => ind(p.amiodarone.is_yes()),
            Vkorc1AG => ind(p.vkorc1 == Vkorc1::AG),
            Vkorc1AA => ind(p.vkorc1 == Vkorc1::AA),
            Vkorc1Unknown => ind(p.vkorc1 == Vkorc1::Unknown),
            Cyp2c9_12 => ind(p.cyp2c9 == Cyp2c9::Star1Star2),
            Cyp2c9_13 => ind(p.cyp2c9 == Cyp2c9::Star1Star3),
            Cyp2c9_22 => ind(p.cyp2c9 == Cyp2c9::Star2Star2),
            Cyp2c9_23 => ind(p.cyp2c9 == Cyp2c9::Star2Star3),
            Cyp2c9_33 => ind(p.cyp2c9 == Cyp2c9::Star3Star3),
            Cyp2c9Unknown => ind(p.cyp2c9 == Cyp2c9::Unknown),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DosingCoefficients {
    pub name: String,
    pub output: OutputConvention,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
}

impl DosingCoefficients {
    pub fn from_toml(text: &str) -> Result<Self, PolicyError> {
        let coeffs: Self = toml::from_str(text).map_err(|e| PolicyError::Coefficients(e.to_string()))?;
        coeffs.terms()?;
        Ok(coeffs)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|e| PolicyError::Coefficients(e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn default_wcda() -> Self {
        Self::from_toml(DEFAULT_WCDA).expect("bundled WCDA coefficients are valid")
    }

    pub fn default_wpda() -> Self {
        Self::from_toml(DEFAULT_WPDA).expect("bundled WPDA coefficients are valid")
    }

    /// A model that predicts `intercept²` for everyone.
    pub fn constant(name: &str, intercept: f64) -> Self {
        Self {
            name: name.to_string(),
            output: OutputConvention::SqrtWeeklyDoseMg,
            intercept,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn terms(&self) -> Result<Vec<(DoseTerm, f64)>, PolicyError> {
        self.coefficients
            .iter()
            .map(|(name, c)| {
                DoseTerm::parse(name)
                    .map(|t| (t, *c))
                    .ok_or_else(|| PolicyError::UnknownCoefficient(name.clone()))
            })
            .collect()
    }

    /// `intercept + Σ coefficient · term`.
    pub fn linear_score(&self, record: &PatientRecord, fill: &ImputationValues) -> Result<f64, PolicyError> {
        Ok(self.intercept
            + self
                .terms()?
                .into_iter()
                .map(|(t, c)| c * t.value(record, fill))
                .sum::<f64>())
    }
}

/// Predicted weekly dose; `clamped` marks a negative linear score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoseOutcome {
    pub dose_mg_week: f64,
    pub clamped: bool,
}

impl DoseOutcome {
    pub fn arm(&self) -> Arm {
        if self.dose_mg_week <= 0.0 {
            Arm::Low
        } else {
            bucketize_dose(self.dose_mg_week).unwrap_or(Arm::Low)
        }
    }
}

fn square_dose(score: f64) -> DoseOutcome {
    if score < 0.0 {
        DoseOutcome {
            dose_mg_week: 0.0,
            clamped: true,
        }
    } else {
        DoseOutcome {
            dose_mg_week: score * score,
            clamped: false,
        }
    }
}

/// Clinical model dose. Refuses coefficient sets with genotype terms.
pub fn wcda_dose(
    record: &PatientRecord,
    coeffs: &DosingCoefficients,
    fill: &ImputationValues,
) -> Result<DoseOutcome, PolicyError> {
    if let Some((t, _)) = coeffs.terms()?.into_iter().find(|(t, _)| t.is_genotype()) {
        return Err(PolicyError::GenotypeTermInClinicalModel(format!("{t:?}")));
    }
    Ok(square_dose(coeffs.linear_score(record, fill)?))
}

/// Pharmacogenetic model dose; unknown genotypes use the `*_unknown` terms.
pub fn wpda_dose(
    record: &PatientRecord,
    coeffs: &DosingCoefficients,
    fill: &ImputationValues,
) -> Result<DoseOutcome, PolicyError> {
    Ok(square_dose(coeffs.linear_score(record, fill)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Doser {
    Wcda,
    Wpda,
}

/// A dose model seen as a deterministic arm policy.
#[derive(Debug, Clone)]
pub struct DoserPolicy {
    doser: Doser,
    coeffs: DosingCoefficients,
    fill: ImputationValues,
}

pub fn policy_from_doser(doser: Doser, coeffs: DosingCoefficients, fill: ImputationValues) -> DoserPolicy {
    DoserPolicy { doser, coeffs, fill }
}

impl DoserPolicy {
    pub fn dose(&self, record: &PatientRecord) -> Result<DoseOutcome, PolicyError> {
        match self.doser {
            Doser::Wcda => wcda_dose(record, &self.coeffs, &self.fill),
            Doser::Wpda => wpda_dose(record, &self.coeffs, &self.fill),
        }
    }
}

impl Policy for DoserPolicy {
    fn name(&self) -> &str {
        match self.doser {
            Doser::Wcda => "wcda",
            Doser::Wpda => "wpda",
        }
    }

    fn action_distribution(&self, ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError> {
        let record = ctx
            .subject
            .and_then(|s| s.as_patient())
            .ok_or(PolicyError::MissingPatientRecord)?;
        let outcome = self.dose(record)?;
        if outcome.clamped {
            log::warn!("record {}: negative dose score clamped to 0", record.id);
        }
        Ok(ArmDistribution::one_hot(outcome.arm()))
    }
}
