//! Scripted goal-seeking policy with privileged world knowledge.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::endpoint::Policy;
use super::wire::PolicyRequest;
use crate::grammar::{parse_sequence, serialize, ActionSequence, SlaKind, StructuredAction};
use crate::pose::{wrap_degrees, Pose};
use crate::sim::{execute_sequence, AgentConfig, Observation, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub scan_deg: f64,
    pub max_turn_deg: f64,
    pub max_move_m: f64,
    /// Distance from the target the controller aims to stop at.
    pub standoff_m: f64,
    pub trigger_distance_m: f64,
    pub trigger_bearing_deg: f64,
    pub sidestep_m: f64,
    /// Extra clearance added to the agent radius when checking a plan.
    pub planning_margin_m: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            scan_deg: 30.0,
            max_turn_deg: 30.0,
            max_move_m: 1.0,
            standoff_m: 0.6,
            trigger_distance_m: 0.8,
            trigger_bearing_deg: 15.0,
            sidestep_m: 0.4,
            planning_margin_m: 0.1,
        }
    }
}

/// Greedy controller: scan left until the target is seen, then turn toward it
/// (at most 30°) and close in, sidestepping when the straight path would
/// collide. Emits the reference action once close and facing the target.
///
/// A target that lies inside the field of view but is hidden (occluded or
/// beyond view range) is approached from its known position.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    world: World,
    cfg: OracleConfig,
}

impl OraclePolicy {
    pub fn new(world: World) -> Self {
        Self::with_config(world, OracleConfig::default())
    }

    pub fn with_config(world: World, cfg: OracleConfig) -> Self {
        Self { world, cfg }
    }

    fn target_relative(&self, pose: &Pose) -> (f64, f64) {
        let t = self.world.target().position;
        let d = (t.x - pose.x).hypot(t.y - pose.y);
        let b = wrap_degrees((t.y - pose.y).atan2(t.x - pose.x).to_degrees() - pose.yaw);
        (d, b)
    }

    /// Next action text given the current observation and odometry.
    pub fn decide(&self, current: &Observation, pose: Pose) -> String {
        let (distance, bearing) = match current.find(&self.world.goal.target) {
            Some(v) => (v.distance, v.bearing),
            None => {
                let (d, b) = self.target_relative(&pose);
                if b.abs() > self.world.agent.fov_h / 2.0 {
                    return sla(SlaKind::Turn, self.cfg.scan_deg).to_string();
                }
                (d, b)
            }
        };
        if distance <= self.cfg.trigger_distance_m && bearing.abs() <= self.cfg.trigger_bearing_deg {
            return self.world.goal.reference_nla.clone();
        }
        let turn = bearing.clamp(-self.cfg.max_turn_deg, self.cfg.max_turn_deg);
        let advance = (distance - self.cfg.standoff_m).min(self.cfg.max_move_m);
        let turn_part: Vec<StructuredAction> = if turn.abs() >= 0.5 {
            vec![sla(SlaKind::Turn, turn)]
        } else {
            vec![]
        };
        if advance < 0.05 {
            return self.render(&turn_part);
        }
        let mv = sla(SlaKind::Move, advance / self.world.agent.forward_gain);
        let side = |sign: f64| sla(SlaKind::Sidewalk, sign * self.cfg.sidestep_m);
        let with = |extra: &[StructuredAction]| turn_part.iter().chain(extra).copied().collect::<Vec<_>>();
        let mut candidates = vec![
            with(&[mv]),
            with(&[side(1.0), mv]),
            with(&[side(-1.0), mv]),
            with(&[side(1.0)]),
            with(&[side(-1.0)]),
        ];
        if let Some(short) = self.longest_free_move(&pose, &turn_part, advance) {
            candidates.push(with(&[short]));
        }
        candidates
            .into_iter()
            .find(|plan| !plan.is_empty() && self.is_clear(&pose, plan))
            .map(|plan| self.render(&plan))
            .unwrap_or_else(|| self.render(&turn_part))
    }

    fn render(&self, slas: &[StructuredAction]) -> String {
        if slas.is_empty() {
            return sla(SlaKind::Turn, self.cfg.scan_deg).to_string();
        }
        let seq = ActionSequence::new(slas.to_vec(), None).expect("non-empty plan");
        serialize(&seq)
    }

    fn planning_agent(&self) -> AgentConfig {
        AgentConfig {
            radius: self.world.agent.radius + self.cfg.planning_margin_m,
            ..self.world.agent.noiseless()
        }
    }

    /// Whether the plan, as it will be executed after canonical rounding,
    /// stays clear of obstacles with the planning margin.
    fn is_clear(&self, pose: &Pose, plan: &[StructuredAction]) -> bool {
        let text = self.render(plan);
        let seq = parse_sequence(&text).expect("rendered plan parses");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        !execute_sequence(*pose, seq.slas(), &self.planning_agent(), &mut rng, &self.world).collided
    }

    fn longest_free_move(&self, pose: &Pose, turn: &[StructuredAction], advance: f64) -> Option<StructuredAction> {
        let mut d = advance - 0.1;
        while d >= 0.1 {
            let mv = sla(SlaKind::Move, d / self.world.agent.forward_gain);
            let plan: Vec<StructuredAction> = turn.iter().copied().chain([mv]).collect();
            if self.is_clear(pose, &plan) {
                return Some(mv);
            }
            d -= 0.1;
        }
        None
    }
}

fn sla(kind: SlaKind, value: f64) -> StructuredAction {
    StructuredAction::from_signed(kind, value).expect("non-zero planned magnitude")
}

impl Policy for OraclePolicy {
    fn act(&mut self, request: &PolicyRequest) -> String {
        self.decide(&request.current, request.pose)
    }
}
