//! Samples from simulator trajectories with one merged action per step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    uniform_indices, DatasetError, EgoSample, ObservationRef, RecentPair, Resolution, HISTORICAL_SLOTS, RECENT_SLOTS,
};
use crate::grammar::{parse_sequence, serialize};
use crate::pose::{merge_actions, DiscreteStepConfig, LowLevelAction, PerturbConfig};

/// Low-level simulator trajectory as recorded, one named action per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrajectory {
    pub id: String,
    pub instruction: String,
    pub steps: Vec<RawStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStep {
    pub image: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedStep {
    pub image: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedEpisode {
    pub id: String,
    pub instruction: String,
    pub steps: Vec<MergedStep>,
}

/// Merges consecutive pairs of low-level actions into single steps, appending
/// a terminal stop when missing. A pair whose motion cancels out is dropped;
/// merging ends at the first stop.
pub fn merge_trajectory<R: Rng + ?Sized>(
    raw: &RawTrajectory,
    steps: &DiscreteStepConfig,
    perturb: &PerturbConfig,
    rng: &mut R,
) -> Result<MergedEpisode, DatasetError> {
    let mut actions = raw
        .steps
        .iter()
        .map(|s| {
            LowLevelAction::from_name(&s.action, steps)
                .map(|a| (s.image.as_str(), a))
                .ok_or_else(|| DatasetError::MalformedAnnotation(format!("{}: unknown action {:?}", raw.id, s.action)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if actions.is_empty() {
        return Err(DatasetError::EpisodeTooShort);
    }
    if !matches!(actions.last(), Some((_, LowLevelAction::Stop))) {
        let image = actions.last().map(|(i, _)| *i).unwrap_or_default();
        actions.push((image, LowLevelAction::Stop));
    }
    let mut merged = Vec::new();
    for chunk in actions.chunks(2) {
        let lows: Vec<LowLevelAction> = chunk.iter().map(|(_, a)| *a).collect();
        let Some(seq) = merge_actions(&lows, rng, perturb) else {
            continue;
        };
        let stop = seq.is_stop();
        merged.push(MergedStep {
            image: chunk[0].0.to_string(),
            action: serialize(&seq),
        });
        if stop {
            break;
        }
    }
    Ok(MergedEpisode {
        id: raw.id.clone(),
        instruction: raw.instruction.clone(),
        steps: merged,
    })
}

/// One sample per step: the step's action is the target, recent observations
/// are taken every `interval` steps back, and up to ten historical
/// observations are spread over all earlier steps.
pub fn build_samples_sliding(ep: &MergedEpisode, interval: usize) -> Result<Vec<EgoSample>, DatasetError> {
    if interval == 0 {
        return Err(DatasetError::MalformedAnnotation(format!(
            "{}: interval must be positive",
            ep.id
        )));
    }
    let Some(last) = ep.steps.last() else {
        return Err(DatasetError::EpisodeTooShort);
    };
    let terminal = parse_sequence(&last.action).map_err(|source| DatasetError::InvalidTarget {
        id: ep.id.clone(),
        target: last.action.clone(),
        source,
    })?;
    if !terminal.is_stop() {
        return Err(DatasetError::MissingTerminalStop);
    }
    let observation = |k: usize, res| ObservationRef {
        image: ep.steps[k].image.clone(),
        res,
        frame: k,
    };
    let mut out = Vec::with_capacity(ep.steps.len());
    for (k, step) in ep.steps.iter().enumerate() {
        let id = format!("{}:{k}", ep.id);
        parse_sequence(&step.action).map_err(|source| DatasetError::InvalidTarget {
            id: id.clone(),
            target: step.action.clone(),
            source,
        })?;
        let recent = (0..RECENT_SLOTS)
            .rev()
            .filter_map(|i| k.checked_sub(i * interval))
            .map(|j| RecentPair {
                observation: observation(j, Resolution::P480),
                action: ep.steps[j].action.clone(),
            })
            .collect();
        let historical = uniform_indices(k, HISTORICAL_SLOTS)
            .into_iter()
            .map(|j| observation(j, Resolution::P240))
            .collect();
        out.push(EgoSample {
            id,
            instruction: ep.instruction.clone(),
            historical,
            recent,
            target: step.action.clone(),
        });
    }
    Ok(out)
}
