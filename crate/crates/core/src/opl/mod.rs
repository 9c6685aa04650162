//! Offline policy learning from logged bandit feedback.

mod artifact;
mod doubly_robust;
mod offset_tree;

use thiserror::Error;

pub use artifact::PolicyArtifact;
pub use doubly_robust::{
    dr_score_matrix, fit_arm_reward_models, train_dr_policy, train_dr_policy_from, ArmRewardModels,
    BinaryPredictor, DrPolicyModel, DrScoreMatrix, RewardEstimator, ZeroRewardModel,
};
pub use offset_tree::{
    offset_tree_examples, predict_offset_tree, train_offset_tree, train_offset_tree_with, NodeClassifier,
    OffsetTreeModel, Side, TreeNode, TreeTopology, OFFSET,
};

use crate::learners::LearnError;

#[derive(Debug, Error)]
pub enum OplError {
    #[error("invalid offset tree topology {0:?}")]
    InvalidTopology(TreeTopology),

    #[error("root node examples need the trained bottom node")]
    MissingLowerNode,

    #[error("logged propensity must be positive, got {0}")]
    InvalidPropensity(f64),

    #[error("no logged interactions")]
    EmptyLogs,

    #[error(transparent)]
    Learn(#[from] LearnError),

    #[error("artifact: {0}")]
    Artifact(String),
}
