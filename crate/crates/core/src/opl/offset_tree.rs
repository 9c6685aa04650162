//! Offset Tree reduction for three arms.
//!
//! A bottom node chooses between two arms; the root chooses between the
//! bottom winner and the remaining arm. Each node is a weighted binary
//! classifier trained on interactions whose logged arm lies under it, with
//! rewards offset at 1/2: a reward above the offset votes for the side that
//! holds the logged arm, a reward below votes for the other side, and the
//! importance weight is `|r − 1/2| / p`. The root only learns from bottom-arm
//! interactions the trained bottom node would itself have routed upward.

use serde::{Deserialize, Serialize};

use super::OplError;
use crate::baselines::{ArmDistribution, LoggedInteraction, Policy, PolicyContext, PolicyError};
use crate::data_model::Arm;
use crate::learners::{fit_binary, predict_binary, LearnError, LinearModel, TrainConfig, WeightedExample};

/// Reward offset.
pub const OFFSET: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn label(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Which arms meet at the bottom node; the third arm meets their winner at
/// the root (left = bottom winner, right = `top`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTopology {
    pub bottom: [Arm; 2],
    pub top: Arm,
}

impl Default for TreeTopology {
    fn default() -> Self {
        Self {
            bottom: [Arm::Low, Arm::Medium],
            top: Arm::High,
        }
    }
}

impl TreeTopology {
    pub fn validate(&self) -> Result<(), OplError> {
        let [a, b] = self.bottom;
        if a == b || a == self.top || b == self.top {
            return Err(OplError::InvalidTopology(*self));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeNode {
    Bottom,
    Root,
}

/// A trained node, or a fixed choice when the node saw no examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeClassifier {
    Trained { model: LinearModel },
    Fixed { side: Side },
}

impl NodeClassifier {
    /// Right iff `P(right) > 1/2`.
    pub fn predict_side(&self, x: &[f64]) -> Result<Side, LearnError> {
        match self {
            NodeClassifier::Trained { model } => Ok(if predict_binary(model, x)? > 0.5 {
                Side::Right
            } else {
                Side::Left
            }),
            NodeClassifier::Fixed { side } => Ok(*side),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetTreeModel {
    pub topology: TreeTopology,
    pub bottom: NodeClassifier,
    pub root: NodeClassifier,
    pub warnings: Vec<String>,
}

fn side_of(node: TreeNode, topology: &TreeTopology, arm: Arm) -> Option<Side> {
    match node {
        TreeNode::Bottom if arm == topology.bottom[0] => Some(Side::Left),
        TreeNode::Bottom if arm == topology.bottom[1] => Some(Side::Right),
        TreeNode::Bottom => None,
        TreeNode::Root if arm == topology.top => Some(Side::Right),
        TreeNode::Root => Some(Side::Left),
    }
}

/// Importance-weighted binary examples for one node.
///
/// `lower` is the trained bottom node and is required for the root.
pub fn offset_tree_examples<'a>(
    node: TreeNode,
    topology: &TreeTopology,
    logs: &'a [LoggedInteraction],
    lower: Option<&NodeClassifier>,
) -> Result<Vec<WeightedExample<'a>>, OplError> {
    if node == TreeNode::Root && lower.is_none() {
        return Err(OplError::MissingLowerNode);
    }
    let mut examples = Vec::new();
    for it in logs {
        if !(it.propensity > 0.0) {
            return Err(OplError::InvalidPropensity(it.propensity));
        }
        let Some(side) = side_of(node, topology, it.arm) else {
            continue;
        };
        if node == TreeNode::Root && it.arm != topology.top {
            let bottom = lower.expect("checked above");
            let routed = topology.bottom[bottom.predict_side(&it.x)?.label()];
            if routed != it.arm {
                continue;
            }
        }
        let (label, weight) = if it.reward > OFFSET {
            (side, (it.reward - OFFSET) / it.propensity)
        } else if it.reward < OFFSET {
            (side.other(), (OFFSET - it.reward) / it.propensity)
        } else {
            continue;
        };
        examples.push(WeightedExample::new(&it.x, label.label(), weight));
    }
    Ok(examples)
}

fn train_node(
    name: &str,
    examples: &[WeightedExample<'_>],
    cfg: &TrainConfig,
    warnings: &mut Vec<String>,
) -> Result<NodeClassifier, OplError> {
    match fit_binary(examples, cfg) {
        Ok(model) => Ok(NodeClassifier::Trained { model }),
        Err(LearnError::EmptyData | LearnError::DegenerateData) => {
            let msg = format!("offset tree {name} node received no usable examples; predicting left");
            log::warn!("{msg}");
            warnings.push(msg);
            Ok(NodeClassifier::Fixed { side: Side::Left })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn train_offset_tree(logs: &[LoggedInteraction], cfg: &TrainConfig) -> Result<OffsetTreeModel, OplError> {
    train_offset_tree_with(logs, TreeTopology::default(), cfg)
}

pub fn train_offset_tree_with(
    logs: &[LoggedInteraction],
    topology: TreeTopology,
    cfg: &TrainConfig,
) -> Result<OffsetTreeModel, OplError> {
    topology.validate()?;
    if logs.is_empty() {
        return Err(OplError::EmptyLogs);
    }
    let mut warnings = Vec::new();
    let bottom_examples = offset_tree_examples(TreeNode::Bottom, &topology, logs, None)?;
    let bottom = train_node("bottom", &bottom_examples, cfg, &mut warnings)?;
    let root_examples = offset_tree_examples(TreeNode::Root, &topology, logs, Some(&bottom))?;
    let root = train_node("root", &root_examples, cfg, &mut warnings)?;
    Ok(OffsetTreeModel {
        topology,
        bottom,
        root,
        warnings,
    })
}

pub fn predict_offset_tree(model: &OffsetTreeModel, x: &[f64]) -> Result<Arm, LearnError> {
    let winner = model.topology.bottom[model.bottom.predict_side(x)?.label()];
    Ok(match model.root.predict_side(x)? {
        Side::Left => winner,
        Side::Right => model.topology.top,
    })
}

impl Policy for OffsetTreeModel {
    fn name(&self) -> &str {
        "offset_tree"
    }

    fn action_distribution(&self, ctx: &PolicyContext<'_>) -> Result<ArmDistribution, PolicyError> {
        Ok(ArmDistribution::one_hot(predict_offset_tree(self, ctx.features)?))
    }
}
