//! Training and evaluation samples.
//!
//! A sample pairs an instruction with up to ten low-resolution historical
//! observations and up to three recent high-resolution observation/action
//! pairs. The last recent pair is the current observation; its action is the
//! supervision target.

mod annotation;
mod prompt;
mod sliding;

pub use annotation::{
    build_sample_at, build_samples_annotation, AnnotatedAction, AnnotatedEpisode, AnnotatedFrame, AnnotationConfig,
    SampleVariant,
};
pub use prompt::{render_prompt, render_segments, PromptSegment};
pub use sliding::{build_samples_sliding, merge_trajectory, MergedEpisode, MergedStep, RawStep, RawTrajectory};

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{parse_sequence, GrammarError, SlaKind};

pub const HISTORICAL_SLOTS: usize = 10;
/// Recent observation slots, the current observation included.
pub const RECENT_SLOTS: usize = 3;

pub const CONNECTIVES: [&str; 3] = [", and then ", ", and next ", ", continue to "];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no actions to build an instruction from")]
    EmptyActions,
    #[error("at most 3 actions form an instruction, got {0}")]
    TooManyActions(usize),
    #[error("malformed annotation: {0}")]
    MalformedAnnotation(String),
    #[error("frame {frame} has no pose for a movement label")]
    MissingPoses { frame: usize },
    #[error("episode has no steps")]
    EpisodeTooShort,
    #[error("episode does not end with the stop action")]
    MissingTerminalStop,
    #[error("sample {id}: target {target:?} does not parse: {source}")]
    InvalidTarget {
        id: String,
        target: String,
        source: GrammarError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resolution {
    #[serde(rename = "240p")]
    P240,
    #[serde(rename = "480p")]
    P480,
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resolution::P240 => "240p",
            Resolution::P480 => "480p",
        })
    }
}

/// Reference to one observation image. The frame index is kept in memory for
/// ordering checks and is not part of the record format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRef {
    pub image: String,
    pub res: Resolution,
    #[serde(skip)]
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecentPair {
    #[serde(flatten)]
    pub observation: ObservationRef,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EgoSample {
    pub id: String,
    pub instruction: String,
    pub historical: Vec<ObservationRef>,
    /// Oldest first; the last entry is the current observation and carries the target.
    pub recent: Vec<RecentPair>,
    pub target: String,
}

impl EgoSample {
    /// Checks the record invariants that hold for every builder.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let malformed = |m: &str| DatasetError::MalformedAnnotation(format!("{}: {m}", self.id));
        parse_sequence(&self.target).map_err(|source| DatasetError::InvalidTarget {
            id: self.id.clone(),
            target: self.target.clone(),
            source,
        })?;
        if self.historical.len() > HISTORICAL_SLOTS {
            return Err(malformed("too many historical observations"));
        }
        if self.recent.len() > RECENT_SLOTS {
            return Err(malformed("too many recent pairs"));
        }
        if self.historical.iter().any(|o| o.res != Resolution::P240)
            || self.recent.iter().any(|p| p.observation.res != Resolution::P480)
        {
            return Err(malformed("wrong resolution tag"));
        }
        if self.recent.last().is_some_and(|p| p.action != self.target) {
            return Err(malformed("current pair does not carry the target"));
        }
        let frames = |it: &mut dyn Iterator<Item = usize>| it.collect::<Vec<_>>();
        let recent = frames(&mut self.recent.iter().map(|p| p.observation.frame));
        let hist = frames(&mut self.historical.iter().map(|o| o.frame));
        if recent.windows(2).any(|w| w[0] >= w[1]) || hist.windows(2).any(|w| w[0] >= w[1]) {
            return Err(malformed("observations out of temporal order"));
        }
        if let (Some(h), Some(c)) = (hist.last(), recent.last()) {
            if h >= c {
                return Err(malformed("historical observation after the current one"));
            }
        }
        Ok(())
    }

    pub fn current_frame(&self) -> Option<usize> {
        self.recent.last().map(|p| p.observation.frame)
    }
}

/// Indices of at most `m` elements spread uniformly over `0..n`, endpoints included.
pub fn uniform_indices(n: usize, m: usize) -> Vec<usize> {
    if n <= m {
        return (0..n).collect();
    }
    match m {
        0 => Vec::new(),
        1 => vec![0],
        _ => (0..m).map(|i| (2 * i * (n - 1) + (m - 1)) / (2 * (m - 1))).collect(),
    }
}

/// Joins one to three action texts with seeded connectives.
pub fn build_instruction<R: Rng + ?Sized>(actions: &[&str], rng: &mut R) -> Result<String, DatasetError> {
    let picks: Vec<&str> = (1..actions.len())
        .map(|_| CONNECTIVES[rng.random_range(0..CONNECTIVES.len())])
        .collect();
    build_instruction_with(actions, &picks)
}

/// Joins action texts with the given connectives (one per joint).
pub fn build_instruction_with(actions: &[&str], connectives: &[&str]) -> Result<String, DatasetError> {
    match actions.len() {
        0 => return Err(DatasetError::EmptyActions),
        n if n > 3 => return Err(DatasetError::TooManyActions(n)),
        _ => {}
    }
    if connectives.len() + 1 != actions.len() {
        return Err(DatasetError::MalformedAnnotation(format!(
            "{} connectives for {} actions",
            connectives.len(),
            actions.len()
        )));
    }
    let mut out = actions[0].to_string();
    for (c, a) in connectives.iter().zip(&actions[1..]) {
        out.push_str(c);
        out.push_str(a);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OversampleConfig {
    pub turn_factor: usize,
    pub nla_factor: usize,
    pub seed: u64,
}

impl Default for OversampleConfig {
    fn default() -> Self {
        Self {
            turn_factor: 2,
            nla_factor: 3,
            seed: 0,
        }
    }
}

/// Copies of a sample after oversampling: the larger applicable factor when the
/// target turns and/or ends in a non-stop natural-language action, else one.
pub fn multiplicity(sample: &EgoSample, cfg: &OversampleConfig) -> usize {
    let Ok(seq) = parse_sequence(&sample.target) else {
        return 1;
    };
    let mut k = 1;
    if seq.slas().iter().any(|a| a.kind() == SlaKind::Turn) {
        k = k.max(cfg.turn_factor);
    }
    if seq.terminal().is_some_and(|t| !t.is_stop()) {
        k = k.max(cfg.nla_factor);
    }
    k.max(1)
}

/// Duplicates rare-label samples and shuffles the result with the configured seed.
pub fn oversample(samples: &[EgoSample], cfg: &OversampleConfig) -> Vec<EgoSample> {
    let mut out: Vec<EgoSample> = samples
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.clone(), multiplicity(s, cfg)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    out.shuffle(&mut rng);
    out
}

/// One JSON record per line.
pub fn write_jsonl(samples: &[EgoSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl(text: &str) -> Result<Vec<EgoSample>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
