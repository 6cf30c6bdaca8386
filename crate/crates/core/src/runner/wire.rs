//! Line-delimited JSON records exchanged with a policy.

use serde::{Deserialize, Serialize};

use crate::dataset::{
    uniform_indices, EgoSample, ObservationRef, RecentPair, Resolution, HISTORICAL_SLOTS, RECENT_SLOTS,
};
use crate::pose::Pose;
use crate::sim::Observation;

pub const PROTOCOL_VERSION: &str = "egoact/1";

/// An executed step: what was seen and the canonical action taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecentStep {
    pub observation: Observation,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRequest {
    pub version: String,
    pub episode_id: String,
    pub step: usize,
    pub instruction: String,
    /// Up to ten observations spread uniformly over all earlier steps.
    pub historical: Vec<Observation>,
    /// The last (at most three) executed steps, oldest first.
    pub recent: Vec<RecentStep>,
    pub current: Observation,
    /// Odometry of the agent at the current observation.
    pub pose: Pose,
    /// Opaque decoding hints forwarded to the policy untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyResponse {
    pub version: String,
    pub action_text: String,
}

impl PolicyResponse {
    pub fn new(action_text: impl Into<String>) -> Self {
        Self {
            version: PROTOCOL_VERSION.to_string(),
            action_text: action_text.into(),
        }
    }
}

/// Builds the request for step `t` from the episode history, where
/// `observations` holds `t + 1` entries and `actions` the `t` executed ones.
pub fn build_request(
    episode_id: &str,
    instruction: &str,
    observations: &[Observation],
    actions: &[String],
    pose: Pose,
    decode: Option<&serde_json::Value>,
) -> PolicyRequest {
    let t = actions.len();
    debug_assert_eq!(observations.len(), t + 1);
    let historical = uniform_indices(t, HISTORICAL_SLOTS)
        .into_iter()
        .map(|i| observations[i].clone())
        .collect();
    let recent = (t.saturating_sub(RECENT_SLOTS)..t)
        .map(|i| RecentStep {
            observation: observations[i].clone(),
            action: actions[i].clone(),
        })
        .collect();
    PolicyRequest {
        version: PROTOCOL_VERSION.to_string(),
        episode_id: episode_id.to_string(),
        step: t,
        instruction: instruction.to_string(),
        historical,
        recent,
        current: observations[t].clone(),
        pose,
        decode: decode.cloned(),
    }
}

/// Prompt-ready view of a request: the fixed template holds the current
/// observation plus the two most recent executed steps. Observations are
/// referenced as `step-<n>` images.
pub fn request_to_sample(req: &PolicyRequest) -> EgoSample {
    let obs = |o: &Observation, res| ObservationRef {
        image: format!("step-{}", o.step),
        res,
        frame: o.step,
    };
    let keep = req.recent.len().min(RECENT_SLOTS - 1);
    let mut recent: Vec<RecentPair> = req.recent[req.recent.len() - keep..]
        .iter()
        .map(|s| RecentPair {
            observation: obs(&s.observation, Resolution::P480),
            action: s.action.clone(),
        })
        .collect();
    recent.push(RecentPair {
        observation: obs(&req.current, Resolution::P480),
        action: String::new(),
    });
    EgoSample {
        id: format!("{}:{}", req.episode_id, req.step),
        instruction: req.instruction.clone(),
        historical: req.historical.iter().map(|o| obs(o, Resolution::P240)).collect(),
        recent,
        target: String::new(),
    }
}
