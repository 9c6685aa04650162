use serde::{Deserialize, Serialize};

use super::{DrPolicyModel, OffsetTreeModel, OplError};
use crate::baselines::Policy;

/// A learned policy with the feature layout it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum PolicyArtifact {
    OffsetTree { layout: Vec<String>, model: OffsetTreeModel },
    DoublyRobust { layout: Vec<String>, model: DrPolicyModel },
}

impl PolicyArtifact {
    pub fn layout(&self) -> &[String] {
        match self {
            PolicyArtifact::OffsetTree { layout, .. } | PolicyArtifact::DoublyRobust { layout, .. } => layout,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifacts always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, OplError> {
        serde_json::from_str(text).map_err(|e| OplError::Artifact(e.to_string()))
    }

    pub fn into_policy(self) -> Box<dyn Policy> {
        match self {
            PolicyArtifact::OffsetTree { model, .. } => Box::new(model),
            PolicyArtifact::DoublyRobust { model, .. } => Box::new(model),
        }
    }
}
