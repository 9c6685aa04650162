use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::data_model::{FeatureLayout, SyntheticSpec};
use crate::learners::TrainConfig;
use crate::ope::DEFAULT_NCIS_CAP;
use crate::opl::TreeTopology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// IWPC-style table; `schema` defaults to the IWPC column names.
    Real {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        schema: Option<PathBuf>,
    },
    /// Generated cohort, drawn once with `cohort_seed`.
    Synthetic {
        spec: SyntheticSpec,
        #[serde(default)]
        cohort_seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoKind {
    Random,
    Wcda,
    Wpda,
}

impl DemoKind {
    pub fn name(self) -> &'static str {
        match self {
            DemoKind::Random => "random",
            DemoKind::Wcda => "wcda",
            DemoKind::Wpda => "wpda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    OffsetTree,
    DoublyRobust,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::OffsetTree => "offset_tree",
            LearnerKind::DoublyRobust => "doubly_robust",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    RejectionSampling,
    DoublyRobust,
    Ncis,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::RejectionSampling => "rejection_sampling",
            EstimatorKind::DoublyRobust => "doubly_robust",
            EstimatorKind::Ncis => "ncis",
        }
    }
}

/// Which split the demonstration logs used for OPE are generated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpeLogs {
    Test,
    Train,
}

/// Where the DR estimator's reward models are fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrRewardFit {
    /// On the evaluation log itself.
    SameLog,
    /// On one random half of the evaluation log, estimating on the other.
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Overrides the layout picked from the data source (clinical for real
    /// data, raw for synthetic cohorts).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<FeatureLayout>,
    pub split_ratio: f64,
    pub seeds: Vec<u64>,
    pub demos: Vec<DemoKind>,
    pub learners: Vec<LearnerKind>,
    pub estimators: Vec<EstimatorKind>,
    pub train: TrainConfig,
    /// Softmax fit of the target distribution used by NCIS.
    pub target_train: TrainConfig,
    pub topology: TreeTopology,
    pub ncis_cap: f64,
    pub ope_logs: OpeLogs,
    pub dr_reward_fit: DrRewardFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wcda_coefficients: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wpda_coefficients: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Real {
                path: PathBuf::from("data/iwpc_warfarin.csv"),
                schema: None,
            },
            layout: None,
            split_ratio: 0.8,
            seeds: (1..=30).collect(),
            demos: vec![DemoKind::Random, DemoKind::Wcda, DemoKind::Wpda],
            learners: vec![LearnerKind::OffsetTree, LearnerKind::DoublyRobust],
            estimators: vec![EstimatorKind::RejectionSampling, EstimatorKind::DoublyRobust, EstimatorKind::Ncis],
            train: TrainConfig::default(),
            target_train: TrainConfig::default(),
            topology: TreeTopology::default(),
            ncis_cap: DEFAULT_NCIS_CAP,
            ope_logs: OpeLogs::Test,
            dr_reward_fit: DrRewardFit::SameLog,
            wcda_coefficients: None,
            wpda_coefficients: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Synthetic cohort with random demonstrations only.
    pub fn synthetic(spec: SyntheticSpec) -> Self {
        Self {
            data: DataSource::Synthetic { spec, cohort_seed: 0 },
            demos: vec![DemoKind::Random],
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative data and coefficient paths resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Real { path, schema } = &mut self.data {
            fix(path);
            if let Some(s) = schema {
                fix(s);
            }
        }
        for p in [&mut self.wcda_coefficients, &mut self.wpda_coefficients].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs always serialize")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio must lie in (0, 1), got {}", self.split_ratio));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.demos.is_empty() || self.learners.is_empty() {
            return bad("demos and learners must be non-empty".into());
        }
        if !(self.ncis_cap > 0.0) {
            return bad(format!("ncis_cap must be positive, got {}", self.ncis_cap));
        }
        self.topology.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.seeds, (1..=30).collect::<Vec<_>>());
        assert_eq!(cfg.split_ratio, 0.8);
        assert_eq!(cfg.ncis_cap, 100.0);
        assert_eq!(cfg.ope_logs, OpeLogs::Test);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::synthetic(SyntheticSpec::ordinal(500, 4));
        cfg.seeds = vec![3, 1];
        cfg.layout = Some(FeatureLayout::Raw { dim: 4 });
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_real_config() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seeds = [1, 2]
            [data]
            kind = "real"
            path = "iwpc.tsv"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.demos.len(), 3);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml("split = 0.5").is_err());
        assert!(ExperimentConfig::from_toml("split_ratio = 1.5").is_err());
        assert!(ExperimentConfig::from_toml("seeds = []").is_err());
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut cfg = ExperimentConfig::default();
        cfg.wcda_coefficients = Some("w.toml".into());
        cfg.resolve_paths(Path::new("/etc/exp"));
        assert_eq!(cfg.wcda_coefficients.unwrap(), PathBuf::from("/etc/exp/w.toml"));
        match cfg.data {
            DataSource::Real { path, .. } => assert_eq!(path, PathBuf::from("/etc/exp/data/iwpc_warfarin.csv")),
            _ => unreachable!(),
        }
    }
}
