//! Samples from long videos annotated with timed manipulation actions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    build_instruction, uniform_indices, DatasetError, EgoSample, ObservationRef, RecentPair, Resolution,
    HISTORICAL_SLOTS, RECENT_SLOTS,
};
use crate::grammar::STOP_PHRASE;
use crate::pose::{aggregate_window, window_deltas, Pose, Thresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedFrame {
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
}

/// A manipulation spanning frames `start_frame..=end_frame`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedAction {
    pub text: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedEpisode {
    pub id: String,
    pub frames: Vec<AnnotatedFrame>,
    pub actions: Vec<AnnotatedAction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationConfig {
    pub seed: u64,
    /// Frames between consecutive recent observations.
    pub stride: usize,
    /// How far before its first action an instruction may start.
    pub lead_frames: usize,
    pub thresholds: Thresholds,
    /// Also emit samples whose target is the movement preceding a manipulation.
    pub movement_targets: bool,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            stride: 5,
            lead_frames: 60,
            thresholds: Thresholds::default(),
            movement_targets: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SampleVariant {
    Movement,
    Manipulation,
    Stop,
}

impl SampleVariant {
    fn tag(self) -> &'static str {
        match self {
            SampleVariant::Movement => "move",
            SampleVariant::Manipulation => "manip",
            SampleVariant::Stop => "stop",
        }
    }
}

fn clean_text(text: &str) -> String {
    text.trim().replace(';', ",")
}

fn validate(ep: &AnnotatedEpisode, cfg: &AnnotationConfig) -> Result<(), DatasetError> {
    let bad = |m: String| Err(DatasetError::MalformedAnnotation(format!("{}: {m}", ep.id)));
    if cfg.stride == 0 {
        return bad("stride must be positive".into());
    }
    if !cfg.thresholds.is_valid() {
        return bad("thresholds must be positive".into());
    }
    if ep.frames.is_empty() {
        return Err(DatasetError::EpisodeTooShort);
    }
    let n = ep.frames.len();
    for (i, a) in ep.actions.iter().enumerate() {
        if a.text.trim().is_empty() {
            return bad(format!("action {i} has empty text"));
        }
        if a.start_frame > a.end_frame || a.end_frame >= n {
            return bad(format!(
                "action {i} spans {}..={} in a {n}-frame video",
                a.start_frame, a.end_frame
            ));
        }
        if i > 0 && a.start_frame <= ep.actions[i - 1].end_frame {
            return bad(format!("action {i} overlaps or precedes action {}", i - 1));
        }
    }
    Ok(())
}

struct Builder<'a> {
    ep: &'a AnnotatedEpisode,
    cfg: &'a AnnotationConfig,
}

impl Builder<'_> {
    fn action_starting_at(&self, frame: usize) -> Option<&AnnotatedAction> {
        self.ep.actions.iter().find(|a| a.start_frame == frame)
    }

    /// Recent observation preceding `t`: one stride back, snapped to the start
    /// of a manipulation that begins inside the stride or is still running there.
    fn previous_frame(&self, t: usize, floor: usize) -> Option<usize> {
        let c = t as i64 - self.cfg.stride as i64;
        let started_within = self
            .ep
            .actions
            .iter()
            .rev()
            .map(|a| a.start_frame)
            .find(|&s| (s as i64) > c && s < t);
        let p = match started_within {
            Some(s) => s,
            None if c < 0 => return None,
            None => {
                let c = c as usize;
                self.ep
                    .actions
                    .iter()
                    .find(|a| a.start_frame < c && c <= a.end_frame)
                    .map_or(c, |a| a.start_frame)
            }
        };
        (p >= floor).then_some(p)
    }

    /// Action performed from frame `p` until the next observation at `q`;
    /// `None` when the motion in between is below every threshold.
    fn pair_label(&self, p: usize, q: usize) -> Result<Option<String>, DatasetError> {
        if let Some(a) = self.action_starting_at(p) {
            return Ok(Some(clean_text(&a.text)));
        }
        if self.ep.actions.last().is_some_and(|a| p > a.end_frame) {
            return Ok(Some(STOP_PHRASE.to_string()));
        }
        self.movement_label(p, q)
    }

    fn movement_label(&self, p: usize, q: usize) -> Result<Option<String>, DatasetError> {
        let poses = (p..=q)
            .map(|f| self.ep.frames[f].pose.ok_or(DatasetError::MissingPoses { frame: f }))
            .collect::<Result<Vec<Pose>, _>>()?;
        let actions = aggregate_window(&window_deltas(&poses), &self.cfg.thresholds);
        if actions.is_empty() {
            return Ok(None);
        }
        Ok(Some(
            actions.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ))
    }

    fn observation(&self, frame: usize, res: Resolution) -> ObservationRef {
        ObservationRef {
            image: self.ep.frames[frame].image.clone(),
            res,
            frame,
        }
    }

    fn sample(
        &self,
        variant: SampleVariant,
        instruction: &str,
        instr_start: usize,
        t: usize,
        target: String,
    ) -> Result<EgoSample, DatasetError> {
        let mut recent = vec![(t, target.clone())];
        let mut cur = t;
        while recent.len() < RECENT_SLOTS {
            let Some(p) = self.previous_frame(cur, instr_start) else {
                break;
            };
            match self.pair_label(p, cur)? {
                Some(label) => recent.push((p, label)),
                None => break,
            }
            cur = p;
        }
        recent.reverse();
        let oldest = recent[0].0;
        let pool: Vec<usize> = (instr_start..oldest).collect();
        let historical = uniform_indices(pool.len(), HISTORICAL_SLOTS)
            .into_iter()
            .map(|i| self.observation(pool[i], Resolution::P240))
            .collect();
        let recent = recent
            .into_iter()
            .map(|(f, action)| RecentPair {
                observation: self.observation(f, Resolution::P480),
                action,
            })
            .collect();
        Ok(EgoSample {
            id: format!("{}:{}:{}", self.ep.id, t, variant.tag()),
            instruction: instruction.to_string(),
            historical,
            recent,
            target,
        })
    }

    fn instruction_start(&self, first: usize) -> usize {
        let start = self.ep.actions[first].start_frame;
        let mut s = start.saturating_sub(self.cfg.lead_frames);
        if first > 0 {
            s = s.max(self.ep.actions[first - 1].end_frame + 1);
        }
        s
    }
}

/// Builds the sample whose current observation is `target_frame`, under the
/// instruction that ends with manipulation `action_index`.
pub fn build_sample_at(
    ep: &AnnotatedEpisode,
    cfg: &AnnotationConfig,
    instruction: &str,
    action_index: usize,
    variant: SampleVariant,
    target_frame: usize,
) -> Result<EgoSample, DatasetError> {
    validate(ep, cfg)?;
    if action_index >= ep.actions.len() || target_frame >= ep.frames.len() {
        return Err(DatasetError::MalformedAnnotation(format!(
            "{}: no action {action_index} or frame {target_frame}",
            ep.id
        )));
    }
    let b = Builder { ep, cfg };
    let instr_start = b.instruction_start(action_index.saturating_sub(2));
    let target = match variant {
        SampleVariant::Manipulation => clean_text(&ep.actions[action_index].text),
        SampleVariant::Stop => STOP_PHRASE.to_string(),
        SampleVariant::Movement => {
            let next = (target_frame + cfg.stride).min(ep.actions[action_index].start_frame);
            b.movement_label(target_frame, next.max(target_frame))?.ok_or_else(|| {
                DatasetError::MalformedAnnotation(format!("{}: no salient motion at {target_frame}", ep.id))
            })?
        }
    };
    b.sample(variant, instruction, instr_start, target_frame, target)
}

/// Builds every sample of an annotated episode: for each manipulation one
/// sample targeting it, one targeting the stop that follows it, and (when
/// enabled) one per stride of salient movement leading up to it. Samples whose
/// movement labels need missing poses are omitted.
pub fn build_samples_annotation(ep: &AnnotatedEpisode, cfg: &AnnotationConfig) -> Result<Vec<EgoSample>, DatasetError> {
    validate(ep, cfg)?;
    let b = Builder { ep, cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = ep.frames.len();
    let mut out: Vec<(usize, SampleVariant, EgoSample)> = Vec::new();
    let mut push = |t: usize, v: SampleVariant, r: Result<EgoSample, DatasetError>| match r {
        Ok(s) => out.push((t, v, s)),
        Err(DatasetError::MissingPoses { .. }) => {}
        Err(e) => panic!("validated annotation produced {e}"),
    };

    for (i, action) in ep.actions.iter().enumerate() {
        let first = i.saturating_sub(2);
        let texts: Vec<String> = ep.actions[first..=i].iter().map(|a| clean_text(&a.text)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let instruction = build_instruction(&refs, &mut rng)?;
        let instr_start = b.instruction_start(first);

        if cfg.movement_targets {
            let seg_start = if i == 0 {
                instr_start
            } else {
                instr_start.max(ep.actions[i - 1].end_frame + 1)
            };
            let mut f = action.start_frame;
            while f >= seg_start + cfg.stride {
                let next = f;
                f -= cfg.stride;
                match b.movement_label(f, next) {
                    Ok(Some(label)) => push(
                        f,
                        SampleVariant::Movement,
                        b.sample(SampleVariant::Movement, &instruction, instr_start, f, label),
                    ),
                    Ok(None) | Err(DatasetError::MissingPoses { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }

        let t = action.start_frame;
        push(
            t,
            SampleVariant::Manipulation,
            b.sample(
                SampleVariant::Manipulation,
                &instruction,
                instr_start,
                t,
                clean_text(&action.text),
            ),
        );
        let t = (action.end_frame + 1).min(n - 1);
        push(
            t,
            SampleVariant::Stop,
            b.sample(
                SampleVariant::Stop,
                &instruction,
                instr_start,
                t,
                STOP_PHRASE.to_string(),
            ),
        );
    }
    out.sort_by_key(|(t, v, _)| (*t, *v));
    Ok(out.into_iter().map(|(_, _, s)| s).collect())
}
