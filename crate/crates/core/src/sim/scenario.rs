//! Seeded generator of goal-reaching worlds for benchmarking.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{Obstacle, Point, Rect};
use super::{AgentConfig, Category, Entity, GoalSpec, Position, World};
use crate::pose::{wrap_degrees, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Bounds are the square `[-half_extent, half_extent]^2`.
    pub half_extent: f64,
    pub min_target_distance: f64,
    pub max_target_distance: f64,
    /// Distance from the target at which the reference pose stands.
    pub approach_distance: f64,
    pub max_obstacles: usize,
    /// Try to put the first obstacle across the straight approach path.
    pub block_path: bool,
    pub max_distractors: usize,
    pub agent: AgentConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            half_extent: 5.0,
            min_target_distance: 1.5,
            max_target_distance: 4.0,
            approach_distance: 0.6,
            max_obstacles: 0,
            block_path: false,
            max_distractors: 3,
            agent: AgentConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn obstacle_free() -> Self {
        Self::default()
    }

    /// Between one and five rectangular obstacles, the first one in the way
    /// whenever the approach is long enough to fit it.
    pub fn sparse() -> Self {
        Self {
            max_obstacles: 5,
            block_path: true,
            ..Self::default()
        }
    }
}

struct Kind {
    category: Category,
    noun: &'static str,
    height: (f64, f64),
}

const KINDS: [Kind; 6] = [
    Kind {
        category: Category::Person,
        noun: "man",
        height: (1.5, 1.7),
    },
    Kind {
        category: Category::Person,
        noun: "woman",
        height: (1.45, 1.65),
    },
    Kind {
        category: Category::Object,
        noun: "bottle",
        height: (0.8, 1.1),
    },
    Kind {
        category: Category::Object,
        noun: "cup",
        height: (0.8, 1.1),
    },
    Kind {
        category: Category::Furniture,
        noun: "drawer",
        height: (0.8, 1.0),
    },
    Kind {
        category: Category::Door,
        noun: "door",
        height: (1.0, 1.4),
    },
];

const COLORS: [&str; 6] = ["red", "blue", "grey", "green", "white", "black"];

fn reference_action(kind: &Kind, color: &str, rng: &mut impl Rng) -> String {
    match kind.category {
        Category::Person => match rng.random_range(0..3) {
            0 => format!("Say hi to the {} in {color}", kind.noun),
            1 => "Ask \"Where is the bathroom?\"".to_string(),
            _ => format!("Shake hands with the {}", kind.noun),
        },
        Category::Object => format!("Pick up the {color} {}", kind.noun),
        Category::Furniture => format!("Pull the {color} {}", kind.noun),
        Category::Door => format!("Open the {color} door"),
    }
}

fn description(kind: &Kind, color: &str) -> String {
    match kind.category {
        Category::Person => format!("{} in {color}", kind.noun),
        _ => format!("{color} {}", kind.noun),
    }
}

fn sample_point(rng: &mut impl Rng, lim: f64) -> Point {
    Point::new(rng.random_range(-lim..lim), rng.random_range(-lim..lim))
}

/// Builds one world: a start pose, a target entity 1.5–4 m away, distractors,
/// and (when configured) rectangles that avoid the start, target and
/// reference pose but may block the straight path or line of sight.
pub fn generate(seed: u64, cfg: &ScenarioConfig) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = cfg.half_extent;
    let bounds = Rect {
        x_min: -lim,
        y_min: -lim,
        x_max: lim,
        y_max: lim,
    };
    let margin = cfg.agent.radius + 0.5;

    let (start, target_at) = loop {
        let s = sample_point(&mut rng, lim - margin - 1.0);
        let d = rng.random_range(cfg.min_target_distance..cfg.max_target_distance);
        let a = rng.random_range(-180.0..180.0f64).to_radians();
        let t = Point::new(s.x + d * a.cos(), s.y + d * a.sin());
        if t.x.abs() < lim - margin && t.y.abs() < lim - margin {
            break (s, t);
        }
    };
    let start_yaw = rng.random_range(-180.0..180.0);
    let approach = (
        (start.x - target_at.x) / start.distance(target_at),
        (start.y - target_at.y) / start.distance(target_at),
    );
    let reference = Point::new(
        target_at.x + cfg.approach_distance * approach.0,
        target_at.y + cfg.approach_distance * approach.1,
    );
    let facing = (target_at.y - reference.y)
        .atan2(target_at.x - reference.x)
        .to_degrees();

    let kind = &KINDS[rng.random_range(0..KINDS.len())];
    let color = COLORS[rng.random_range(0..COLORS.len())];
    let mut attributes = BTreeMap::new();
    attributes.insert("color".to_string(), color.to_string());
    let target = Entity {
        id: format!("{}-0", kind.noun),
        category: kind.category,
        position: Position {
            x: target_at.x,
            y: target_at.y,
            height: rng.random_range(kind.height.0..kind.height.1),
        },
        attributes,
    };
    let nla = reference_action(kind, color, &mut rng);
    let instruction = format!(
        "Find the {} and then {}",
        description(kind, color),
        lowercase_first(&nla)
    );

    let mut entities = vec![target];
    let n_distractors = rng.random_range(0..=cfg.max_distractors);
    for i in 1..=n_distractors {
        let k = &KINDS[rng.random_range(0..KINDS.len())];
        let c = COLORS[rng.random_range(0..COLORS.len())];
        let p = sample_point(&mut rng, lim - 0.5);
        if p.distance(target_at) < 1.0 || p.distance(start) < 1.0 {
            continue;
        }
        entities.push(Entity {
            id: format!("{}-{i}", k.noun),
            category: k.category,
            position: Position {
                x: p.x,
                y: p.y,
                height: rng.random_range(k.height.0..k.height.1),
            },
            attributes: BTreeMap::from([("color".to_string(), c.to_string())]),
        });
    }

    let mut obstacles = Vec::new();
    if cfg.max_obstacles > 0 {
        let count = rng.random_range(1..=cfg.max_obstacles);
        let keep_clear = [(start, margin), (reference, margin), (target_at, 0.4)];
        let mut attempts = 0;
        while obstacles.len() < count && attempts < 200 {
            attempts += 1;
            let w = rng.random_range(0.3..1.0);
            let h = rng.random_range(0.3..1.0);
            let c = if cfg.block_path && obstacles.is_empty() && attempts <= 100 {
                let t = rng.random_range(0.3..0.7);
                let side = rng.random_range(-0.3..0.3);
                let (dx, dy) = (reference.x - start.x, reference.y - start.y);
                let len = dx.hypot(dy);
                Point::new(start.x + t * dx - side * dy / len, start.y + t * dy + side * dx / len)
            } else {
                sample_point(&mut rng, lim)
            };
            let o = Obstacle::rect(c.x - w / 2.0, c.y - h / 2.0, c.x + w / 2.0, c.y + h / 2.0);
            let clear = keep_clear.iter().all(|(p, r)| o.distance_to_point(*p) >= *r)
                && entities.iter().all(|e| o.distance_to_point(e.position.planar()) >= 0.3);
            if clear {
                obstacles.push(o);
            }
        }
    }

    World {
        bounds,
        obstacles,
        entities,
        goal: GoalSpec {
            target: format!("{}-0", kind.noun),
            reference_pose: Pose::planar(reference.x, reference.y, facing),
            reference_nla: nla,
        },
        agent: cfg.agent,
        start: Some(Pose::planar(start.x, start.y, wrap_degrees(start_yaw))),
        instruction: Some(instruction),
    }
}

fn lowercase_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}
