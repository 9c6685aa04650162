//! Patient table ingestion.
//!
//! The table is comma- or tab-delimited (detected from the header line) with
//! one header row. [`SchemaConfig`] maps source column names onto record
//! fields; the defaults match the column names of the public IWPC/PharmGKB
//! warfarin table. Unparseable or out-of-range cells become missing values.
//! Rows without a usable therapeutic dose are dropped and counted.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    CohortDataset, Cyp2c9, DataError, Flag, Gender, PatientRecord, Race, Vkorc1,
};

/// Column mapping. Fields mapped to `None` or `""` (and an empty inducer
/// list) are treated as missing for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaConfig {
    pub id: Option<String>,
    pub gender: Option<String>,
    pub race: Option<String>,
    pub age: Option<String>,
    pub height_cm: Option<String>,
    pub weight_kg: Option<String>,
    pub amiodarone: Option<String>,
    pub enzyme_inducers: Vec<String>,
    pub cyp2c9: Option<String>,
    pub vkorc1: Option<String>,
    pub therapeutic_dose: String,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            id: Some("PharmGKB Subject ID".into()),
            gender: Some("Gender".into()),
            race: Some("Race".into()),
            age: Some("Age".into()),
            height_cm: Some("Height (cm)".into()),
            weight_kg: Some("Weight (kg)".into()),
            amiodarone: Some("Amiodarone (Cordarone)".into()),
            enzyme_inducers: vec![
                "Carbamazepine (Tegretol)".into(),
                "Phenytoin (Dilantin)".into(),
                "Rifampin or Rifampicin".into(),
            ],
            cyp2c9: Some("Cyp2C9 genotypes".into()),
            vkorc1: Some("VKORC1 -1639 consensus".into()),
            therapeutic_dose: "Therapeutic Dose of Warfarin".into(),
        }
    }
}

impl SchemaConfig {
    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        toml::from_str(text).map_err(|e| DataError::SchemaConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Ingestion summary, emitted by `prepare` as JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub total_rows: usize,
    pub retained: usize,
    pub dropped_count: usize,
    /// Missing-value count per record field over retained rows.
    pub missing: BTreeMap<String, usize>,
}

pub fn load_dataset(
    path: &Path,
    schema: &SchemaConfig,
) -> Result<(CohortDataset, ParseDiagnostics), DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, schema)
}

fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    if header.matches('\t').count() > header.matches(',').count() {
        b'\t'
    } else {
        b','
    }
}

struct ColumnIndex {
    id: Option<usize>,
    gender: Option<usize>,
    race: Option<usize>,
    age: Option<usize>,
    height: Option<usize>,
    weight: Option<usize>,
    amiodarone: Option<usize>,
    inducers: Vec<usize>,
    cyp2c9: Option<usize>,
    vkorc1: Option<usize>,
    dose: usize,
}

impl ColumnIndex {
    fn resolve(header: &csv::StringRecord, schema: &SchemaConfig) -> Result<Self, DataError> {
        let find = |name: &str| -> Result<usize, DataError> {
            header
                .iter()
                .position(|h| h.trim() == name.trim())
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))
        };
        let opt = |name: &Option<String>| {
            name.as_deref().filter(|n| !n.trim().is_empty()).map(find).transpose()
        };
        Ok(Self {
            id: opt(&schema.id)?,
            gender: opt(&schema.gender)?,
            race: opt(&schema.race)?,
            age: opt(&schema.age)?,
            height: opt(&schema.height_cm)?,
            weight: opt(&schema.weight_kg)?,
            amiodarone: opt(&schema.amiodarone)?,
            inducers: schema
                .enzyme_inducers
                .iter()
                .map(|n| find(n))
                .collect::<Result<_, _>>()?,
            cyp2c9: opt(&schema.cyp2c9)?,
            vkorc1: opt(&schema.vkorc1)?,
            dose: find(&schema.therapeutic_dose)?,
        })
    }
}

/// Parses a delimited patient table.
pub fn parse_dataset(
    text: &str,
    schema: &SchemaConfig,
) -> Result<(CohortDataset, ParseDiagnostics), DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let cols = ColumnIndex::resolve(&header, schema)?;

    let mut diagnostics = ParseDiagnostics::default();
    let mut patients = Vec::new();
    for (row_no, row) in reader.records().enumerate() {
        let row = row?;
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        diagnostics.total_rows += 1;
        let cell = |idx: Option<usize>| idx.and_then(|i| row.get(i)).map(str::trim).unwrap_or("");

        let Some(dose) = parse_number(cell(Some(cols.dose))).filter(|d| *d > 0.0) else {
            diagnostics.dropped_count += 1;
            continue;
        };
        let id = match cell(cols.id) {
            "" => format!("row{}", row_no + 1),
            s => s.to_string(),
        };
        let inducer_flags: Vec<Flag> = cols.inducers.iter().map(|&i| parse_flag(cell(Some(i)))).collect();

        patients.push(PatientRecord {
            id,
            gender: parse_gender(cell(cols.gender)),
            race: parse_race(cell(cols.race)),
            age_decades: parse_age_decades(cell(cols.age)),
            height_cm: parse_number(cell(cols.height)).filter(|h| *h > 100.0 && *h < 250.0),
            weight_kg: parse_number(cell(cols.weight)).filter(|w| *w > 20.0 && *w < 300.0),
            amiodarone: parse_flag(cell(cols.amiodarone)),
            enzyme_inducer: combine_flags(&inducer_flags),
            cyp2c9: parse_cyp2c9(cell(cols.cyp2c9)),
            vkorc1: parse_vkorc1(cell(cols.vkorc1)),
            therapeutic_dose_mg_week: dose,
        });
    }

    diagnostics.retained = patients.len();
    diagnostics.missing = missingness(&patients);
    Ok((CohortDataset::from_patients(patients)?, diagnostics))
}

fn missingness(patients: &[PatientRecord]) -> BTreeMap<String, usize> {
    let count = |f: &dyn Fn(&PatientRecord) -> bool| patients.iter().filter(|p| f(p)).count();
    BTreeMap::from([
        ("gender".to_string(), count(&|p| p.gender == Gender::Missing)),
        ("race".to_string(), count(&|p| p.race == Race::MixedOrMissing)),
        ("age_decades".to_string(), count(&|p| p.age_decades.is_none())),
        ("height_cm".to_string(), count(&|p| p.height_cm.is_none())),
        ("weight_kg".to_string(), count(&|p| p.weight_kg.is_none())),
        ("amiodarone".to_string(), count(&|p| p.amiodarone == Flag::Missing)),
        ("enzyme_inducer".to_string(), count(&|p| p.enzyme_inducer == Flag::Missing)),
        ("cyp2c9".to_string(), count(&|p| p.cyp2c9 == Cyp2c9::Unknown)),
        ("vkorc1".to_string(), count(&|p| p.vkorc1 == Vkorc1::Unknown)),
    ])
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_gender(cell: &str) -> Gender {
    match cell.to_ascii_lowercase().as_str() {
        "male" | "m" => Gender::Male,
        "female" | "f" => Gender::Female,
        _ => Gender::Missing,
    }
}

fn parse_race(cell: &str) -> Race {
    match cell.to_ascii_lowercase().as_str() {
        "white" => Race::White,
        "asian" => Race::Asian,
        "black or african american" | "black" => Race::BlackOrAfricanAmerican,
        _ => Race::MixedOrMissing,
    }
}

/// Accepts a decade index ("6"), a range ("60 - 69") or an open band ("90+").
fn parse_age_decades(cell: &str) -> Option<u8> {
    let compact: String = cell.chars().filter(|c| !c.is_whitespace()).collect();
    let decade = if let Some(lower) = compact.strip_suffix('+') {
        lower.parse::<u32>().ok()? / 10
    } else if let Some((lower, _)) = compact.split_once('-') {
        lower.parse::<u32>().ok()? / 10
    } else {
        compact.parse::<u32>().ok()?
    };
    (1..=9).contains(&decade).then_some(decade as u8)
}

fn parse_flag(cell: &str) -> Flag {
    match cell.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "yes" | "y" | "true" => Flag::Yes,
        "0" | "0.0" | "no" | "n" | "false" => Flag::No,
        _ => Flag::Missing,
    }
}

fn combine_flags(flags: &[Flag]) -> Flag {
    if flags.contains(&Flag::Yes) {
        Flag::Yes
    } else if flags.contains(&Flag::No) {
        Flag::No
    } else {
        Flag::Missing
    }
}

fn parse_cyp2c9(cell: &str) -> Cyp2c9 {
    match cell.replace(' ', "").as_str() {
        "*1/*1" => Cyp2c9::Star1Star1,
        "*1/*2" | "*2/*1" => Cyp2c9::Star1Star2,
        "*1/*3" | "*3/*1" => Cyp2c9::Star1Star3,
        "*2/*2" => Cyp2c9::Star2Star2,
        "*2/*3" | "*3/*2" => Cyp2c9::Star2Star3,
        "*3/*3" => Cyp2c9::Star3Star3,
        _ => Cyp2c9::Unknown,
    }
}

fn parse_vkorc1(cell: &str) -> Vkorc1 {
    match cell.replace(' ', "").to_ascii_uppercase().as_str() {
        "G/G" => Vkorc1::GG,
        "A/G" | "G/A" => Vkorc1::AG,
        "A/A" => Vkorc1::AA,
        _ => Vkorc1::Unknown,
    }
}
