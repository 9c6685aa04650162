//! Feature encoding: imputation, z-scoring and one-hot expansion.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::{CohortDataset, Cyp2c9, DataError, Flag, Gender, PatientRecord, Race, Subject, Vkorc1};

/// Lower bound applied to the standard deviation before dividing.
pub const SD_FLOOR: f64 = 1e-8;

/// Coordinate layout of an encoded context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureLayout {
    /// Demographics, anthropometrics and medications; no genotype.
    Clinical,
    /// `Clinical` plus CYP2C9 and VKORC1 one-hots.
    Genetic,
    /// Raw synthetic contexts of the given dimension, all continuous.
    Raw { dim: usize },
}

const PATIENT_CONTINUOUS: [&str; 3] = ["age_decades", "height_cm", "weight_kg"];

const CLINICAL_INDICATORS: [&str; 12] = [
    "age_decades_missing",
    "height_cm_missing",
    "weight_kg_missing",
    "gender_female",
    "gender_missing",
    "race_asian",
    "race_black_or_african_american",
    "race_mixed_or_missing",
    "amiodarone_yes",
    "amiodarone_missing",
    "enzyme_inducer_yes",
    "enzyme_inducer_missing",
];

const GENOTYPE_INDICATORS: [&str; 9] = [
    "cyp2c9_1_2",
    "cyp2c9_1_3",
    "cyp2c9_2_2",
    "cyp2c9_2_3",
    "cyp2c9_3_3",
    "cyp2c9_unknown",
    "vkorc1_a_g",
    "vkorc1_a_a",
    "vkorc1_unknown",
];

impl FeatureLayout {
    fn continuous_names(self) -> Vec<String> {
        match self {
            FeatureLayout::Clinical | FeatureLayout::Genetic => {
                PATIENT_CONTINUOUS.iter().map(|s| s.to_string()).collect()
            }
            FeatureLayout::Raw { dim } => (0..dim).map(|i| format!("x{i}")).collect(),
        }
    }

    /// Coordinate names in encoding order.
    pub fn descriptor(self) -> Vec<String> {
        let mut names = self.continuous_names();
        match self {
            FeatureLayout::Clinical => {
                names.extend(CLINICAL_INDICATORS.iter().map(|s| s.to_string()));
            }
            FeatureLayout::Genetic => {
                names.extend(CLINICAL_INDICATORS.iter().map(|s| s.to_string()));
                names.extend(GENOTYPE_INDICATORS.iter().map(|s| s.to_string()));
            }
            FeatureLayout::Raw { .. } => {}
        }
        names
    }

    pub fn dim(self) -> usize {
        self.descriptor().len()
    }
}

/// An encoded, fully imputed context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation over present values.
    pub sd: f64,
    pub impute: f64,
}

/// Training-partition statistics, reused verbatim for every transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub layout: FeatureLayout,
    pub continuous: Vec<ContinuousStats>,
}

/// Raw-unit fill-ins for the dosing models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationValues {
    pub age_decades: f64,
    pub height_cm: f64,
    pub weight_kg: f64,
}

impl NormalizationStats {
    pub fn descriptor(&self) -> Vec<String> {
        self.layout.descriptor()
    }

    /// Fill-ins for patient layouts; `None` for raw layouts.
    pub fn imputation(&self) -> Option<ImputationValues> {
        match self.layout {
            FeatureLayout::Raw { .. } => None,
            _ => Some(ImputationValues {
                age_decades: self.continuous[0].impute,
                height_cm: self.continuous[1].impute,
                weight_kg: self.continuous[2].impute,
            }),
        }
    }
}

fn patient_continuous(p: &PatientRecord) -> [Option<f64>; 3] {
    [p.age_decades.map(f64::from), p.height_cm, p.weight_kg]
}

fn continuous_values(subject: &Subject, layout: FeatureLayout) -> Result<Vec<Option<f64>>, DataError> {
    let mismatch = || DataError::LayoutMismatch {
        id: subject.id().to_string(),
        layout,
    };
    match (layout, subject) {
        (FeatureLayout::Clinical | FeatureLayout::Genetic, Subject::Patient(p)) => {
            Ok(patient_continuous(p).to_vec())
        }
        (FeatureLayout::Raw { dim }, Subject::Synthetic(s)) if s.values.len() == dim => {
            Ok(s.values.iter().map(|v| Some(*v)).collect())
        }
        _ => Err(mismatch()),
    }
}

/// Fits mean, population sd and mean-imputation per continuous feature.
pub fn fit_stats(train: &CohortDataset, layout: FeatureLayout) -> Result<NormalizationStats, DataError> {
    if train.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let names = layout.continuous_names();
    let rows = train
        .records
        .iter()
        .map(|r| continuous_values(&r.subject, layout))
        .collect::<Result<Vec<_>, _>>()?;

    let continuous = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let present: Vec<f64> = rows.iter().filter_map(|row| row[j]).collect();
            if present.is_empty() {
                return Err(DataError::FeatureAllMissing(name));
            }
            let n = present.len() as f64;
            let mean = present.iter().sum::<f64>() / n;
            let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            Ok(ContinuousStats {
                name,
                mean,
                sd: var.sqrt(),
                impute: mean,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(NormalizationStats { layout, continuous })
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Encodes one subject under the layout the stats were fitted for.
pub fn encode(subject: &Subject, stats: &NormalizationStats) -> Result<FeatureVector, DataError> {
    let layout = stats.layout;
    let raw = continuous_values(subject, layout)?;
    let mut out = Vec::with_capacity(layout.dim());
    for (value, s) in raw.iter().zip(&stats.continuous) {
        let v = value.unwrap_or(s.impute);
        out.push((v - s.mean) / s.sd.max(SD_FLOOR));
    }

    if let Subject::Patient(p) = subject {
        out.extend(raw.iter().map(|v| indicator(v.is_none())));
        out.push(indicator(p.gender == Gender::Female));
        out.push(indicator(p.gender == Gender::Missing));
        out.push(indicator(p.race == Race::Asian));
        out.push(indicator(p.race == Race::BlackOrAfricanAmerican));
        out.push(indicator(p.race == Race::MixedOrMissing));
        out.push(indicator(p.amiodarone == Flag::Yes));
        out.push(indicator(p.amiodarone == Flag::Missing));
        out.push(indicator(p.enzyme_inducer == Flag::Yes));
        out.push(indicator(p.enzyme_inducer == Flag::Missing));

        if layout == FeatureLayout::Genetic {
            for level in [
                Cyp2c9::Star1Star2,
                Cyp2c9::Star1Star3,
                Cyp2c9::Star2Star2,
                Cyp2c9::Star2Star3,
                Cyp2c9::Star3Star3,
                Cyp2c9::Unknown,
            ] {
                out.push(indicator(p.cyp2c9 == level));
            }
            for level in [Vkorc1::AG, Vkorc1::AA, Vkorc1::Unknown] {
                out.push(indicator(p.vkorc1 == level));
            }
        }
    }
    debug_assert_eq!(out.len(), layout.dim());
    Ok(FeatureVector(out))
}

pub fn encode_all(data: &CohortDataset, stats: &NormalizationStats) -> Result<Vec<FeatureVector>, DataError> {
    data.records.iter().map(|r| encode(&r.subject, stats)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{CohortRecord, Provenance, SyntheticSubject};
    use crate::data_model::Arm;

    fn patient(age: Option<u8>, height: Option<f64>, weight: Option<f64>) -> PatientRecord {
        let mut p = PatientRecord::with_dose("p", 30.0);
        p.age_decades = age;
        p.height_cm = height;
        p.weight_kg = weight;
        p.race = Race::White;
        p.gender = Gender::Male;
        p.amiodarone = Flag::No;
        p.enzyme_inducer = Flag::No;
        p
    }

    fn cohort(patients: Vec<PatientRecord>) -> CohortDataset {
        CohortDataset::from_patients(patients).unwrap()
    }

    fn idx(name: &str, layout: FeatureLayout) -> usize {
        layout.descriptor().iter().position(|n| n == name).unwrap()
    }

    #[test]
    fn weight_imputation_is_training_mean() {
        let data = cohort(vec![
            patient(Some(5), Some(170.0), Some(60.0)),
            patient(Some(5), Some(170.0), Some(80.0)),
            patient(Some(5), Some(170.0), None),
        ]);
        let stats = fit_stats(&data, FeatureLayout::Clinical).unwrap();
        assert_eq!(stats.continuous[2].impute, 70.0);
        // imputed then z-scored: (70 - 70) / sd = 0
        let v = encode(&data.records[2].subject, &stats).unwrap();
        assert_eq!(v[idx("weight_kg", FeatureLayout::Clinical)], 0.0);
        assert_eq!(v[idx("weight_kg_missing", FeatureLayout::Clinical)], 1.0);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let data = cohort(vec![
            patient(Some(4), Some(170.0), Some(60.0)),
            patient(Some(6), Some(170.0), Some(80.0)),
            patient(Some(5), Some(170.0), Some(70.0)),
        ]);
        let stats = fit_stats(&data, FeatureLayout::Clinical).unwrap();
        assert_eq!(stats.continuous[1].mean, 170.0);
        assert_eq!(stats.continuous[1].sd, 0.0);
        for r in &data.records {
            assert_eq!(encode(&r.subject, &stats).unwrap()[1], 0.0);
        }
    }

    #[test]
    fn population_sd_of_two_ages() {
        let data = cohort(vec![
            patient(Some(4), Some(160.0), Some(60.0)),
            patient(Some(6), Some(180.0), Some(80.0)),
        ]);
        let stats = fit_stats(&data, FeatureLayout::Clinical).unwrap();
        // mean (4+6)/2 = 5, population variance ((−1)² + 1²)/2 = 1
        assert_eq!(stats.continuous[0].mean, 5.0);
        assert_eq!(stats.continuous[0].sd, 1.0);
    }

    #[test]
    fn mean_record_encodes_to_zero_continuous() {
        let data = cohort(vec![
            patient(Some(4), Some(160.0), Some(60.0)),
            patient(Some(6), Some(180.0), Some(80.0)),
        ]);
        let stats = fit_stats(&data, FeatureLayout::Clinical).unwrap();
        let mean_patient = Subject::Patient(patient(Some(5), Some(170.0), Some(70.0)));
        let v = encode(&mean_patient, &stats).unwrap();
        assert_eq!(&v[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn race_one_hot() {
        let data = cohort(vec![patient(Some(4), Some(160.0), Some(60.0))]);
        let stats = fit_stats(&data, FeatureLayout::Clinical).unwrap();
        let mut p = patient(Some(4), Some(160.0), Some(60.0));
        p.race = Race::Asian;
        let v = encode(&Subject::Patient(p), &stats).unwrap();
        let l = FeatureLayout::Clinical;
        assert_eq!(v[idx("race_asian", l)], 1.0);
        assert_eq!(v[idx("race_black_or_african_american", l)], 0.0);
        assert_eq!(v[idx("race_mixed_or_missing", l)], 0.0);
    }

    #[test]
    fn genetic_layout_adds_genotype_levels() {
        let data = cohort(vec![patient(Some(4), Some(160.0), Some(60.0))]);
        let stats = fit_stats(&data, FeatureLayout::Genetic).unwrap();
        let mut p = patient(Some(4), Some(160.0), Some(60.0));
        p.cyp2c9 = Cyp2c9::Star1Star1;
        p.vkorc1 = Vkorc1::AA;
        let v = encode(&Subject::Patient(p), &stats).unwrap();
        let l = FeatureLayout::Genetic;
        assert_eq!(v.len(), l.dim());
        assert_eq!(v.len(), FeatureLayout::Clinical.dim() + 9);
        assert_eq!(v[idx("vkorc1_a_a", l)], 1.0);
        let genotype_sum: f64 = v[FeatureLayout::Clinical.dim()..].iter().sum();
        assert_eq!(genotype_sum, 1.0);
    }

    #[test]
    fn all_missing_feature_is_configuration_error() {
        let data = cohort(vec![patient(Some(4), None, Some(60.0))]);
        assert!(matches!(
            fit_stats(&data, FeatureLayout::Clinical),
            Err(DataError::FeatureAllMissing(name)) if name == "height_cm"
        ));
    }

    #[test]
    fn layout_mismatch_is_reported() {
        let data = CohortDataset {
            records: vec![CohortRecord {
                subject: Subject::Synthetic(SyntheticSubject {
                    id: "s".into(),
                    values: vec![1.0, 2.0],
                }),
                true_arm: Arm::Low,
            }],
            provenance: Provenance::Synthetic,
        };
        assert!(matches!(
            fit_stats(&data, FeatureLayout::Clinical),
            Err(DataError::LayoutMismatch { .. })
        ));
        assert!(fit_stats(&data, FeatureLayout::Raw { dim: 2 }).is_ok());
        assert!(fit_stats(&data, FeatureLayout::Raw { dim: 3 }).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_patient() -> impl Strategy<Value = PatientRecord> {
            (1u8..=9, 101.0f64..249.0, 21.0f64..299.0, 0usize..4, proptest::bool::ANY).prop_map(
                |(age, h, w, race, female)| {
                    let mut p = patient(Some(age), Some(h), Some(w));
                    p.race = [Race::White, Race::Asian, Race::BlackOrAfricanAmerican, Race::MixedOrMissing][race];
                    p.gender = if female { Gender::Female } else { Gender::Male };
                    p
                },
            )
        }

        proptest! {
            #[test]
            fn training_transform_is_standardized(patients in proptest::collection::vec(arb_patient(), 2..60)) {
                let data = cohort(patients);
                let stats = fit_stats(&data, FeatureLayout::Clinical).unwrap();
                let encoded = encode_all(&data, &stats).unwrap();
                let n = encoded.len() as f64;
                for (j, s) in stats.continuous.iter().enumerate() {
                    let col: Vec<f64> = encoded.iter().map(|v| v[j]).collect();
                    let mean = col.iter().sum::<f64>() / n;
                    prop_assert!(mean.abs() < 1e-9);
                    if s.sd > 1e-6 {
                        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                        prop_assert!((sd - 1.0).abs() < 1e-9);
                    }
                }
                let d = FeatureLayout::Clinical.dim();
                prop_assert!(encoded.iter().all(|v| v.len() == d));
                prop_assert_eq!(FeatureLayout::Clinical.descriptor().len(), d);
            }
        }
    }
}
