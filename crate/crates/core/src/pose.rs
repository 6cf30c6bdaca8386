//! Pose tracks to structured actions.
//!
//! Per-frame poses are differenced into body-frame deltas, summed per axis over
//! an aggregation window (opposite motions cancel), and thresholded into
//! structured actions. Discrete simulator actions are merged pairwise into
//! single executable instructions with small seeded perturbations.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{ActionSequence, Direction, SlaKind, StructuredAction};

pub const PITCH_LIMIT_DEG: f64 = 45.0;

/// Seconds of motion summarized by one labeled action.
pub const ACTION_INTERVAL_S: f64 = 1.5;

/// Wraps an angle in degrees to `[-180, 180)`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let w = (angle + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Planar position, height offset, heading and head pitch.
///
/// Yaw is measured counterclockwise from +x, so positive yaw changes are left
/// turns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub pitch: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64, pitch: f64) -> Self {
        Self { x, y, z, yaw, pitch }.normalized()
    }

    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        Self::new(x, y, 0.0, yaw, 0.0)
    }

    /// Yaw wrapped to `[-180, 180)`, pitch clamped to the head limits.
    pub fn normalized(self) -> Self {
        Self {
            yaw: wrap_degrees(self.yaw),
            pitch: self.pitch.clamp(-PITCH_LIMIT_DEG, PITCH_LIMIT_DEG),
            ..self
        }
    }

    pub fn planar_distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Motion between two poses, translation in a body frame (+forward, +left).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseDelta {
    pub d_yaw: f64,
    pub d_pitch: f64,
    pub d_forward: f64,
    pub d_lateral: f64,
    pub d_z: f64,
}

impl PoseDelta {
    fn axis(&self, kind: SlaKind) -> f64 {
        match kind {
            SlaKind::Turn => self.d_yaw,
            SlaKind::Look => self.d_pitch,
            SlaKind::Move => self.d_forward,
            SlaKind::Sidewalk => self.d_lateral,
            SlaKind::Height => self.d_z,
        }
    }
}

/// Delta from `a` to `b` with translation in `a`'s body frame.
pub fn pose_delta(a: &Pose, b: &Pose) -> PoseDelta {
    pose_delta_in_frame(a, b, a.yaw)
}

/// Delta from `a` to `b` with translation expressed in the frame of heading `frame_yaw`.
pub fn pose_delta_in_frame(a: &Pose, b: &Pose, frame_yaw: f64) -> PoseDelta {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (s, c) = frame_yaw.to_radians().sin_cos();
    PoseDelta {
        d_yaw: wrap_degrees(b.yaw - a.yaw),
        d_pitch: b.pitch - a.pitch,
        d_forward: dx * c + dy * s,
        d_lateral: -dx * s + dy * c,
        d_z: b.z - a.z,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub angular_deg: f64,
    pub planar_m: f64,
    pub vertical_m: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            angular_deg: 5.0,
            planar_m: 0.1,
            vertical_m: 0.05,
        }
    }
}

impl Thresholds {
    pub fn for_kind(&self, kind: SlaKind) -> f64 {
        match kind {
            SlaKind::Turn | SlaKind::Look => self.angular_deg,
            SlaKind::Move | SlaKind::Sidewalk => self.planar_m,
            SlaKind::Height => self.vertical_m,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.angular_deg, self.planar_m, self.vertical_m]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
    }
}

fn axis_sums<'a>(deltas: impl IntoIterator<Item = &'a PoseDelta>) -> [f64; 5] {
    let mut sums = [0.0; 5];
    for d in deltas {
        for (sum, kind) in sums.iter_mut().zip(SlaKind::ALL) {
            *sum += d.axis(kind);
        }
    }
    sums
}

/// Sums each axis over the window and keeps axes whose net motion reaches the
/// threshold, in the order Turn, Look, Move, Sidewalk, Height.
pub fn aggregate_window(deltas: &[PoseDelta], th: &Thresholds) -> Vec<StructuredAction> {
    let sums = axis_sums(deltas);
    SlaKind::ALL
        .into_iter()
        .zip(sums)
        .filter(|(kind, sum)| sum.abs() >= th.for_kind(*kind))
        .filter_map(|(kind, sum)| StructuredAction::from_signed(kind, sum))
        .collect()
}

/// Deltas between consecutive poses, translations in the first pose's frame.
pub fn window_deltas(poses: &[Pose]) -> Vec<PoseDelta> {
    let Some(first) = poses.first() else {
        return Vec::new();
    };
    poses
        .windows(2)
        .map(|w| pose_delta_in_frame(&w[0], &w[1], first.yaw))
        .collect()
}

/// Frames per aggregation window at the given frame rate.
pub fn window_len(fps: f64) -> usize {
    ((ACTION_INTERVAL_S * fps).round() as usize).max(1)
}

/// One line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    pub t: f64,
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("frame rate must be positive, got {0}")]
    BadFps(f64),
}

/// Reads line-delimited frame records; blank lines are ignored.
pub fn parse_trajectory(text: &str) -> Result<Vec<TrajectoryFrame>, TrajectoryError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TrajectoryError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Labeled aggregation window of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLabel {
    pub start_frame: usize,
    pub end_frame: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub actions: Vec<StructuredAction>,
    /// Canonical text of `actions`; empty when nothing passed the thresholds.
    pub text: String,
}

/// Splits the trajectory into windows of [`window_len`] frame intervals (the
/// last one may be shorter) and labels each with its thresholded actions.
pub fn label_trajectory(
    frames: &[TrajectoryFrame],
    fps: f64,
    th: &Thresholds,
) -> Result<Vec<WindowLabel>, TrajectoryError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(TrajectoryError::BadFps(fps));
    }
    let n = window_len(fps);
    let mut labels = Vec::new();
    let mut start = 0;
    while start + 1 < frames.len() {
        let end = (start + n).min(frames.len() - 1);
        let poses: Vec<Pose> = frames[start..=end].iter().map(|f| f.pose).collect();
        let actions = aggregate_window(&window_deltas(&poses), th);
        let text = actions.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        labels.push(WindowLabel {
            start_frame: start,
            end_frame: end,
            t_start: frames[start].t,
            t_end: frames[end].t,
            actions,
            text,
        });
        start = end;
    }
    Ok(labels)
}

/// Step sizes of a discrete simulator action alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscreteStepConfig {
    pub forward_m: f64,
    pub turn_deg: f64,
    pub look_deg: f64,
    pub strafe_m: f64,
}

impl Default for DiscreteStepConfig {
    fn default() -> Self {
        Self {
            forward_m: 0.25,
            turn_deg: 15.0,
            look_deg: 30.0,
            strafe_m: 0.25,
        }
    }
}

/// One action of a discrete simulator alphabet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowLevelAction {
    Motion(StructuredAction),
    Stop,
}

impl LowLevelAction {
    /// Normalizes simulator action names such as `MOVE_FORWARD`, `turn-left`
    /// or `LOOK_UP`. Returns `None` for unknown names.
    pub fn from_name(name: &str, steps: &DiscreteStepConfig) -> Option<Self> {
        let norm: String = name
            .trim()
            .chars()
            .map(|c| {
                if c == '-' || c == ' ' {
                    '_'
                } else {
                    c.to_ascii_uppercase()
                }
            })
            .collect();
        let (kind, dir, mag) = match norm.as_str() {
            "STOP" => return Some(LowLevelAction::Stop),
            "MOVE_FORWARD" | "FORWARD" => (SlaKind::Move, Direction::Forward, steps.forward_m),
            "MOVE_BACKWARD" | "BACKWARD" => (SlaKind::Move, Direction::Backward, steps.forward_m),
            "TURN_LEFT" => (SlaKind::Turn, Direction::Left, steps.turn_deg),
            "TURN_RIGHT" => (SlaKind::Turn, Direction::Right, steps.turn_deg),
            "LOOK_UP" => (SlaKind::Look, Direction::Up, steps.look_deg),
            "LOOK_DOWN" => (SlaKind::Look, Direction::Down, steps.look_deg),
            "STRAFE_LEFT" | "MOVE_LEFT" => (SlaKind::Sidewalk, Direction::Left, steps.strafe_m),
            "STRAFE_RIGHT" | "MOVE_RIGHT" => (SlaKind::Sidewalk, Direction::Right, steps.strafe_m),
            _ => return None,
        };
        StructuredAction::new(kind, dir, mag).ok().map(LowLevelAction::Motion)
    }
}

/// Randomized perturbation applied to merged actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    /// Distances are scaled by a factor drawn from `[1 - dist_frac, 1 + dist_frac]`.
    pub dist_frac: f64,
    /// Angles are shifted by a value drawn from `[-angle_deg, angle_deg]`.
    pub angle_deg: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            dist_frac: 0.05,
            angle_deg: 1.5,
        }
    }
}

impl PerturbConfig {
    pub fn disabled() -> Self {
        Self {
            dist_frac: 0.0,
            angle_deg: 0.0,
        }
    }
}

/// Merges consecutive discrete actions into one instruction.
///
/// Any `Stop` turns the whole group into the stop sequence. Otherwise motion on
/// each axis is summed with sign and perturbed; `None` when every axis cancels.
pub fn merge_actions<R: Rng + ?Sized>(
    actions: &[LowLevelAction],
    rng: &mut R,
    pcfg: &PerturbConfig,
) -> Option<ActionSequence> {
    if actions.iter().any(|a| matches!(a, LowLevelAction::Stop)) {
        return Some(ActionSequence::stop());
    }
    let mut sums = [0.0f64; 5];
    for a in actions {
        if let LowLevelAction::Motion(sla) = a {
            let idx = SlaKind::ALL.iter().position(|k| *k == sla.kind()).unwrap_or(0);
            sums[idx] += sla.signed_magnitude();
        }
    }
    let slas: Vec<StructuredAction> = SlaKind::ALL
        .into_iter()
        .zip(sums)
        .filter(|(_, s)| s.abs() > 1e-9)
        .filter_map(|(kind, s)| {
            let mag = perturb(kind, s.abs(), rng, pcfg);
            StructuredAction::from_signed(kind, mag.copysign(s))
        })
        .collect();
    ActionSequence::new(slas, None).ok()
}

fn perturb<R: Rng + ?Sized>(kind: SlaKind, magnitude: f64, rng: &mut R, pcfg: &PerturbConfig) -> f64 {
    match kind {
        SlaKind::Turn | SlaKind::Look => {
            if pcfg.angle_deg <= 0.0 {
                return magnitude;
            }
            let shifted = magnitude + rng.random_range(-pcfg.angle_deg..=pcfg.angle_deg);
            if shifted > 0.0 {
                shifted
            } else {
                magnitude
            }
        }
        SlaKind::Move | SlaKind::Sidewalk | SlaKind::Height => {
            if pcfg.dist_frac <= 0.0 {
                return magnitude;
            }
            magnitude * rng.random_range(1.0 - pcfg.dist_frac..=1.0 + pcfg.dist_frac)
        }
    }
}

pub fn merge_action_pair<R: Rng + ?Sized>(
    a1: LowLevelAction,
    a2: LowLevelAction,
    rng: &mut R,
    pcfg: &PerturbConfig,
) -> Option<ActionSequence> {
    merge_actions(&[a1, a2], rng, pcfg)
}
