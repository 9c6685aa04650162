use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, DemoKind, DrRewardFit, EstimatorKind, ExperimentConfig, LearnerKind, OpeLogs};
use super::HarnessError;
use crate::baselines::{
    log_interactions, policy_from_doser, random_policy, Doser, DosingCoefficients, LogDataset, Policy,
};
use crate::data_model::{
    encode_all, fit_stats, load_dataset, split, synthesize_cohort, CohortDataset, FeatureLayout, FeatureVector,
    NormalizationStats, ParseDiagnostics, Provenance, SchemaConfig,
};
use crate::ope::{
    evaluate_dr, evaluate_dr_split, evaluate_ncis, evaluate_rejection_sampling, fit_target_distribution,
    oracle_value, OpeError, ValueEstimate,
};
use crate::opl::{fit_arm_reward_models, train_dr_policy, train_offset_tree_with, PolicyArtifact};

/// One table cell for one seed: a value or the reason it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Cell {
    Value { value: f64, n_effective: usize },
    Error { message: String },
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value { value, .. } => Some(*value),
            Cell::Error { .. } => None,
        }
    }

    fn from_estimate(r: Result<ValueEstimate, impl std::fmt::Display>) -> Self {
        match r {
            Ok(est) => Cell::Value {
                value: est.mean,
                n_effective: est.n_effective,
            },
            Err(e) => Cell::Error { message: e.to_string() },
        }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Cell::Error { message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerRun {
    pub learner: String,
    /// Oracle value of the learned policy on the test split.
    pub oracle: Cell,
    /// Estimator name to estimate on the demonstration's OPE log.
    pub estimates: BTreeMap<String, Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRun {
    pub demo: String,
    /// Oracle value of the demonstration itself on the test split.
    pub demo_oracle: Cell,
    pub learners: Vec<LearnerRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub demos: Vec<DemoRun>,
}

/// Policy name used for the demonstration's own cells.
pub const DEMO_POLICY: &str = "demo";
pub const ORACLE_METRIC: &str = "oracle";

/// One long-format line of `runs_raw.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub seed: u64,
    pub demo: String,
    pub policy: String,
    pub metric: String,
    pub value: Option<f64>,
    pub n_effective: Option<usize>,
    pub error: Option<String>,
}

impl RunResult {
    pub fn rows(&self) -> Vec<RawRow> {
        let row = |demo: &str, policy: &str, metric: &str, cell: &Cell| {
            let (value, n_effective, error) = match cell {
                Cell::Value { value, n_effective } => (Some(*value), Some(*n_effective), None),
                Cell::Error { message } => (None, None, Some(message.clone())),
            };
            RawRow {
                seed: self.seed,
                demo: demo.to_string(),
                policy: policy.to_string(),
                metric: metric.to_string(),
                value,
                n_effective,
                error,
            }
        };
        let mut rows = Vec::new();
        for d in &self.demos {
            rows.push(row(&d.demo, DEMO_POLICY, ORACLE_METRIC, &d.demo_oracle));
            for l in &d.learners {
                rows.push(row(&d.demo, &l.learner, ORACLE_METRIC, &l.oracle));
                for (est, cell) in &l.estimates {
                    rows.push(row(&d.demo, &l.learner, est, cell));
                }
            }
        }
        rows
    }

    /// True when no cell of this seed holds a value.
    pub fn all_failed(&self) -> bool {
        self.rows().iter().all(|r| r.value.is_none())
    }
}

/// Distinct, reproducible seed for one random draw inside a run.
fn sub_seed(seed: u64, purpose: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(purpose)
}

const PURPOSE_TRAIN_LOG: u64 = 1;
const PURPOSE_TEST_LOG: u64 = 2;
const PURPOSE_OPE: u64 = 3;

/// A loaded cohort with everything a run needs besides the seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub cohort: CohortDataset,
    pub diagnostics: Option<ParseDiagnostics>,
    pub wcda: DosingCoefficients,
    pub wpda: DosingCoefficients,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let (cohort, diagnostics) = match &config.data {
            DataSource::Real { path, schema } => {
                let schema = match schema {
                    Some(p) => SchemaConfig::load(p)?,
                    None => SchemaConfig::default(),
                };
                let (cohort, diag) = load_dataset(path, &schema)?;
                (cohort, Some(diag))
            }
            DataSource::Synthetic { spec, cohort_seed } => (synthesize_cohort(spec, *cohort_seed)?, None),
        };
        let wcda = match &config.wcda_coefficients {
            Some(p) => DosingCoefficients::load(p)?,
            None => DosingCoefficients::default_wcda(),
        };
        let wpda = match &config.wpda_coefficients {
            Some(p) => DosingCoefficients::load(p)?,
            None => DosingCoefficients::default_wpda(),
        };
        Ok(Self {
            config,
            cohort,
            diagnostics,
            wcda,
            wpda,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        if let Some(l) = self.config.layout {
            return l;
        }
        match self.cohort.provenance {
            Provenance::Real => FeatureLayout::Clinical,
            Provenance::Synthetic => FeatureLayout::Raw {
                dim: match &self.config.data {
                    DataSource::Synthetic { spec, .. } => spec.dim,
                    DataSource::Real { .. } => 0,
                },
            },
        }
    }

    fn demo_policy(&self, demo: DemoKind, stats: &NormalizationStats) -> Result<Box<dyn Policy>, HarnessError> {
        let doser = match demo {
            DemoKind::Random => return Ok(Box::new(random_policy())),
            DemoKind::Wcda => (Doser::Wcda, &self.wcda),
            DemoKind::Wpda => (Doser::Wpda, &self.wpda),
        };
        let fill = stats.imputation().ok_or_else(|| {
            HarnessError::Config(format!("demo `{}` needs patient records with clinical features", demo.name()))
        })?;
        Ok(Box::new(policy_from_doser(doser.0, doser.1.clone(), fill)))
    }

    /// Split, encode, log, learn and evaluate for one seed.
    pub fn run_single(&self, seed: u64) -> Result<RunResult, HarnessError> {
        let cfg = &self.config;
        let (train, test) = split(&self.cohort, cfg.split_ratio, seed)?;
        let stats = fit_stats(&train, self.layout())?;
        let train_x = encode_all(&train, &stats)?;
        let test_x = encode_all(&test, &stats)?;
        let mut demos = Vec::with_capacity(cfg.demos.len());
        for (d_idx, &demo) in cfg.demos.iter().enumerate() {
            let offset = 16 * d_idx as u64;
            demos.push(self.run_demo(demo, seed, offset, &stats, (&train, &train_x), (&test, &test_x)));
        }
        Ok(RunResult { seed, demos })
    }

    fn run_demo(
        &self,
        demo: DemoKind,
        seed: u64,
        offset: u64,
        stats: &NormalizationStats,
        (train, train_x): (&CohortDataset, &[FeatureVector]),
        (test, test_x): (&CohortDataset, &[FeatureVector]),
    ) -> DemoRun {
        let cfg = &self.config;
        let failed = |message: Cell| DemoRun {
            demo: demo.name().to_string(),
            demo_oracle: message.clone(),
            learners: cfg
                .learners
                .iter()
                .map(|l| LearnerRun {
                    learner: l.name().to_string(),
                    oracle: message.clone(),
                    estimates: cfg.estimators.iter().map(|e| (e.name().to_string(), message.clone())).collect(),
                })
                .collect(),
        };
        let policy = match self.demo_policy(demo, stats) {
            Ok(p) => p,
            Err(e) => return failed(Cell::error(e)),
        };
        let demo_oracle = Cell::from_estimate(oracle_value(&*policy, test, test_x));
        let train_logs = match log_interactions(&*policy, train, train_x, sub_seed(seed, offset + PURPOSE_TRAIN_LOG)) {
            Ok(l) => l,
            Err(e) => return failed(Cell::error(e)),
        };
        let ope_logs = match cfg.ope_logs {
            OpeLogs::Train => Ok(train_logs.clone()),
            OpeLogs::Test => log_interactions(&*policy, test, test_x, sub_seed(seed, offset + PURPOSE_TEST_LOG)),
        };
        let learners = cfg
            .learners
            .iter()
            .map(|&learner| {
                let ope_logs = ope_logs.as_ref().map_err(|e| e.to_string());
                self.run_learner(learner, seed, offset, &train_logs, ope_logs, stats, test, test_x)
            })
            .collect();
        DemoRun {
            demo: demo.name().to_string(),
            demo_oracle,
            learners,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_learner(
        &self,
        learner: LearnerKind,
        seed: u64,
        offset: u64,
        train_logs: &LogDataset,
        ope_logs: Result<&LogDataset, String>,
        stats: &NormalizationStats,
        test: &CohortDataset,
        test_x: &[FeatureVector],
    ) -> LearnerRun {
        let cfg = &self.config;
        let trained = train_policy(learner, train_logs, stats, cfg);
        let (oracle, estimates) = match trained {
            Err(e) => {
                let cell = Cell::error(e);
                let est = cfg.estimators.iter().map(|k| (k.name().to_string(), cell.clone())).collect();
                (cell, est)
            }
            Ok(artifact) => {
                let policy = artifact.into_policy();
                let oracle = Cell::from_estimate(oracle_value(&*policy, test, test_x));
                let estimates = cfg
                    .estimators
                    .iter()
                    .map(|&kind| {
                        let cell = match &ope_logs {
                            Ok(logs) => Cell::from_estimate(self.estimate(
                                kind,
                                logs,
                                &*policy,
                                sub_seed(seed, offset + PURPOSE_OPE),
                            )),
                            Err(msg) => Cell::Error { message: msg.clone() },
                        };
                        (kind.name().to_string(), cell)
                    })
                    .collect();
                (oracle, estimates)
            }
        };
        LearnerRun {
            learner: learner.name().to_string(),
            oracle,
            estimates,
        }
    }

    fn estimate(
        &self,
        kind: EstimatorKind,
        logs: &LogDataset,
        target: &dyn Policy,
        seed: u64,
    ) -> Result<ValueEstimate, OpeError> {
        let cfg = &self.config;
        let items = logs.interactions();
        match kind {
            EstimatorKind::RejectionSampling => evaluate_rejection_sampling(items, target, seed),
            EstimatorKind::DoublyRobust => match cfg.dr_reward_fit {
                DrRewardFit::SameLog => {
                    let models = fit_arm_reward_models(items, &cfg.train)?;
                    evaluate_dr(items, target, &models)
                }
                DrRewardFit::Split => evaluate_dr_split(items, target, &cfg.train, seed),
            },
            EstimatorKind::Ncis => {
                let contexts: Vec<FeatureVector> = items.iter().map(|it| it.x.clone()).collect();
                let dist = fit_target_distribution(target, &contexts, &cfg.target_train, seed)?;
                evaluate_ncis(items, &dist, cfg.ncis_cap)
            }
        }
    }
}

/// Trains one learner on the ⟨x, a, r, p⟩ view of a log.
pub fn train_policy(
    learner: LearnerKind,
    logs: &LogDataset,
    stats: &NormalizationStats,
    cfg: &ExperimentConfig,
) -> Result<PolicyArtifact, HarnessError> {
    let layout = stats.descriptor();
    let items = logs.interactions();
    Ok(match learner {
        LearnerKind::OffsetTree => PolicyArtifact::OffsetTree {
            layout,
            model: train_offset_tree_with(items, cfg.topology, &cfg.train)?,
        },
        LearnerKind::DoublyRobust => PolicyArtifact::DoublyRobust {
            layout,
            model: train_dr_policy(items, &cfg.train)?,
        },
    })
}

pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunResult, HarnessError> {
    Experiment::prepare(config.clone())?.run_single(seed)
}

/// Runs every configured seed in parallel; results follow the seed order
/// of the config.
pub fn run_suite(experiment: &Experiment) -> Result<Vec<RunResult>, HarnessError> {
    let results: Vec<RunResult> = experiment
        .config
        .seeds
        .par_iter()
        .map(|&seed| experiment.run_single(seed))
        .collect::<Result<_, _>>()?;
    if results.iter().all(RunResult::all_failed) {
        return Err(HarnessError::AllSeedsFailed);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Arm, OptimalArmRule, SyntheticSpec};

    fn small_config(rule: OptimalArmRule) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::synthetic(SyntheticSpec {
            n_records: 400,
            dim: 3,
            rule,
        });
        cfg.seeds = vec![1, 2];
        cfg
    }

    #[test]
    fn single_optimal_arm_is_learned() {
        let exp = Experiment::prepare(small_config(OptimalArmRule::Fixed { arm: Arm::Medium })).unwrap();
        let run = exp.run_single(1).unwrap();
        let d = &run.demos[0];
        assert!((d.demo_oracle.value().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        for l in &d.learners {
            assert!(l.oracle.value().unwrap() >= 0.99, "{}: {:?}", l.learner, l.oracle);
            assert_eq!(l.estimates.len(), 3);
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let exp = Experiment::prepare(small_config(SyntheticSpec::ordinal(400, 3).rule)).unwrap();
        let a = serde_json::to_string(&exp.run_single(2).unwrap()).unwrap();
        let b = serde_json::to_string(&exp.run_single(2).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_are_independent_of_suite_composition() {
        let mut cfg = small_config(SyntheticSpec::ordinal(300, 3).rule);
        cfg.seeds = vec![1];
        let one = run_suite(&Experiment::prepare(cfg.clone()).unwrap()).unwrap();
        cfg.seeds = vec![2, 1];
        let two = run_suite(&Experiment::prepare(cfg).unwrap()).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].seed, 2);
        assert_eq!(one[0], two[1]);
    }

    #[test]
    fn dosing_demo_on_synthetic_data_is_a_marked_cell() {
        let mut cfg = small_config(OptimalArmRule::Fixed { arm: Arm::Low });
        cfg.demos = vec![DemoKind::Wcda, DemoKind::Random];
        let run = Experiment::prepare(cfg).unwrap().run_single(1).unwrap();
        assert!(matches!(run.demos[0].demo_oracle, Cell::Error { .. }));
        assert!(run.demos[1].demo_oracle.value().is_some());
        // 1 demo oracle + 2 × (oracle + 3 estimators), per demo
        assert_eq!(run.rows().len(), 2 * 9);
        assert!(!run.all_failed());
    }
}
