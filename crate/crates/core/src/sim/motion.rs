use rand::Rng;

use super::geometry::Point;
use super::{truncated_gaussian, AgentConfig, World};
use crate::grammar::{Direction, SlaKind, StructuredAction};
use crate::pose::{wrap_degrees, Pose, PITCH_LIMIT_DEG};

/// Spacing of collision samples along a translation.
pub const SWEEP_STEP_M: f64 = 0.05;
/// Body height offset range reachable by rising/lowering.
pub const HEIGHT_LIMIT_M: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub pose: Pose,
    pub collided: bool,
}

/// Translation of `distance` meters in direction `heading + offset_deg` while the
/// heading turns by `turn_deg`; each sample segment travels at its midpoint
/// heading. Stops at the last free sample on collision; the turn always completes.
fn sweep(world: &World, radius: f64, start: Pose, distance: f64, offset_deg: f64, turn_deg: f64) -> StepOutcome {
    let mut cur = Point::new(start.x, start.y);
    let mut collided = false;
    if distance > 0.0 {
        let n = (distance / SWEEP_STEP_M).ceil().max(1.0) as usize;
        let len = distance / n as f64;
        for k in 1..=n {
            let heading = start.yaw + turn_deg * (k as f64 - 0.5) / n as f64 + offset_deg;
            let (s, c) = heading.to_radians().sin_cos();
            let next = Point::new(cur.x + len * c, cur.y + len * s);
            let blocked =
                !world.within_bounds(next, radius) || world.obstacles.iter().any(|o| o.hits_capsule(cur, next, radius));
            if blocked {
                collided = true;
                break;
            }
            cur = next;
        }
    }
    StepOutcome {
        pose: Pose {
            x: cur.x,
            y: cur.y,
            yaw: wrap_degrees(start.yaw + turn_deg),
            ..start
        },
        collided,
    }
}

fn turn_amount<R: Rng + ?Sized>(act: &StructuredAction, cfg: &AgentConfig, rng: &mut R) -> f64 {
    act.signed_magnitude() + truncated_gaussian(cfg.noise.turn_sigma_deg, rng)
}

/// Commanded translation with gain and noise applied; never reverses direction.
fn travel<R: Rng + ?Sized>(act: &StructuredAction, cfg: &AgentConfig, rng: &mut R) -> f64 {
    let gain = if act.direction() == Direction::Forward {
        cfg.forward_gain
    } else {
        1.0
    };
    (act.magnitude() * gain + truncated_gaussian(cfg.noise.trans_sigma_m, rng)).max(0.0)
}

fn offset(act: &StructuredAction) -> f64 {
    match act.direction() {
        Direction::Backward => 180.0,
        Direction::Left => 90.0,
        Direction::Right => -90.0,
        _ => 0.0,
    }
}

/// Executes one structured action.
pub fn apply_sla<R: Rng + ?Sized>(
    pose: Pose,
    act: &StructuredAction,
    cfg: &AgentConfig,
    rng: &mut R,
    world: &World,
) -> StepOutcome {
    let pose = pose.normalized();
    let free = |pose| StepOutcome { pose, collided: false };
    match act.kind() {
        SlaKind::Turn => {
            let d = turn_amount(act, cfg, rng);
            free(Pose {
                yaw: wrap_degrees(pose.yaw + d),
                ..pose
            })
        }
        SlaKind::Look => free(Pose {
            pitch: (pose.pitch + act.signed_magnitude()).clamp(-PITCH_LIMIT_DEG, PITCH_LIMIT_DEG),
            ..pose
        }),
        SlaKind::Height => free(Pose {
            z: (pose.z + act.signed_magnitude()).clamp(-HEIGHT_LIMIT_M, HEIGHT_LIMIT_M),
            ..pose
        }),
        SlaKind::Move | SlaKind::Sidewalk => {
            let d = travel(act, cfg, rng);
            sweep(world, cfg.radius, pose, d, offset(act), 0.0)
        }
    }
}

/// Executes structured actions in order. A turn adjacent to a forward/backward
/// move runs as a single arc (heading interpolated across the translation).
pub fn execute_sequence<R: Rng + ?Sized>(
    pose: Pose,
    slas: &[StructuredAction],
    cfg: &AgentConfig,
    rng: &mut R,
    world: &World,
) -> StepOutcome {
    let mut out = StepOutcome {
        pose: pose.normalized(),
        collided: false,
    };
    let mut i = 0;
    while i < slas.len() {
        let pair = slas.get(i + 1).and_then(|next| match (slas[i].kind(), next.kind()) {
            (SlaKind::Turn, SlaKind::Move) => Some((&slas[i], next)),
            (SlaKind::Move, SlaKind::Turn) => Some((next, &slas[i])),
            _ => None,
        });
        let step = match pair {
            Some((turn, mv)) => {
                i += 2;
                let theta = turn_amount(turn, cfg, rng);
                let d = travel(mv, cfg, rng);
                sweep(world, cfg.radius, out.pose, d, offset(mv), theta)
            }
            None => {
                i += 1;
                apply_sla(out.pose, &slas[i - 1], cfg, rng, world)
            }
        };
        out = StepOutcome {
            pose: step.pose,
            collided: out.collided || step.collided,
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_sequence;
    use crate::sim::{GoalSpec, Obstacle, Rect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn open_world(obstacles: Vec<Obstacle>) -> World {
        World {
            bounds: Rect {
                x_min: -10.0,
                y_min: -10.0,
                x_max: 10.0,
                y_max: 10.0,
            },
            obstacles,
            entities: vec![],
            goal: GoalSpec {
                target: "t".into(),
                reference_pose: Pose::default(),
                reference_nla: "Open the door".into(),
            },
            agent: AgentConfig::default(),
            start: None,
            instruction: None,
        }
    }

    fn act(text: &str) -> StructuredAction {
        crate::grammar::parse_sla(text).unwrap()
    }

    #[test]
    fn turn_then_move_axis_geometry() {
        let world = open_world(vec![]);
        let cfg = AgentConfig::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = apply_sla(Pose::default(), &act("Turn left 90 degrees"), &cfg, &mut rng, &world).pose;
        let p = apply_sla(p, &act("Move forward 1.0 meters"), &cfg, &mut rng, &world).pose;
        assert!(p.x.abs() < 1e-9 && (p.y - 1.0).abs() < 1e-9 && (p.yaw - 90.0).abs() < 1e-9);
    }

    #[test]
    fn arc_reduces_to_plain_motion() {
        let world = open_world(vec![]);
        let cfg = AgentConfig::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seq = parse_sequence("Turn left 90.0 degrees; Move forward 1.00 meters").unwrap();
        let p = execute_sequence(Pose::default(), seq.slas(), &cfg, &mut rng, &world).pose;
        // quarter arc of length 1: chord endpoint lies at radius 2/pi from the centre (0, 2/pi)
        let r = 2.0 / std::f64::consts::PI;
        assert!((p.x - r).abs() < 1e-3 && (p.y - r).abs() < 1e-3, "{p:?}");
        assert!((p.yaw - 90.0).abs() < 1e-9);
    }

    #[test]
    fn wall_stops_motion() {
        let world = open_world(vec![Obstacle::rect(0.5, -2.0, 1.0, 2.0)]);
        let cfg = AgentConfig::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = apply_sla(Pose::default(), &act("Move forward 1.0 meters"), &cfg, &mut rng, &world);
        assert!(out.collided);
        assert!(out.pose.x <= 0.2 + 1e-9 && out.pose.x >= 0.15 - 1e-9, "{:?}", out.pose);
    }
}
