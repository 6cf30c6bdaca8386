use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{Obstacle, Point, Rect};
use super::AgentConfig;
use crate::grammar::{route_nla, RouterConfig};
use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Person,
    Object,
    Furniture,
    Door,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub height: f64,
}

impl Position {
    pub fn planar(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub category: Category,
    pub position: Position,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    /// Id of the entity the episode is about.
    pub target: String,
    /// Where a successful agent is expected to end.
    pub reference_pose: Pose,
    /// The terminal action a successful agent emits.
    pub reference_nla: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub bounds: Rect,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub entities: Vec<Entity>,
    pub goal: GoalSpec,
    #[serde(default)]
    pub agent: AgentConfig,
    /// Start pose of episodes; the centre of the bounds facing +x when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Pose>,
    /// Task instruction; the reference action text when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
}

impl World {
    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn target(&self) -> &Entity {
        self.entity(&self.goal.target)
            .expect("validated world has its goal target")
    }

    pub fn start_pose(&self) -> Pose {
        let b = &self.bounds;
        self.start
            .unwrap_or(Pose::planar((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0, 0.0))
    }

    pub fn instruction(&self) -> &str {
        self.instruction.as_deref().unwrap_or(&self.goal.reference_nla)
    }

    /// Whether a disc of `radius` centred at `p` is inside the bounds and clear of obstacles.
    pub fn is_free(&self, p: Point, radius: f64) -> bool {
        self.within_bounds(p, radius) && !self.obstacles.iter().any(|o| o.hits_capsule(p, p, radius))
    }

    pub fn within_bounds(&self, p: Point, radius: f64) -> bool {
        let b = &self.bounds;
        p.x >= b.x_min + radius && p.x <= b.x_max - radius && p.y >= b.y_min + radius && p.y <= b.y_max - radius
    }

    /// Whether the line of sight between two points is unobstructed.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        !self.obstacles.iter().any(|o| o.blocks(a, b))
    }
}

/// A violated world invariant and where it was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid world: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvariantViolation(Vec<Violation>),
}

pub fn load_world(text: &str) -> Result<World, WorldError> {
    let world: World = serde_json::from_str(text)?;
    validate_world(&world)?;
    Ok(world)
}

pub fn validate_world(world: &World) -> Result<(), WorldError> {
    let mut v = Vec::new();
    let mut bad = |location: String, message: &str| {
        v.push(Violation {
            location,
            message: message.to_string(),
        })
    };
    let b = world.bounds;
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    if !finite(&[b.x_min, b.y_min, b.x_max, b.y_max]) || b.x_min >= b.x_max || b.y_min >= b.y_max {
        bad("bounds".into(), "minimum must be below maximum");
    }
    for (i, o) in world.obstacles.iter().enumerate() {
        if !o.is_well_formed() {
            bad(format!("obstacles[{i}]"), "degenerate footprint");
        }
    }
    let mut ids = BTreeSet::new();
    for (i, e) in world.entities.iter().enumerate() {
        if e.id.trim().is_empty() {
            bad(format!("entities[{i}].id"), "empty id");
        }
        if !ids.insert(e.id.as_str()) {
            bad(format!("entities[{i}].id"), "duplicate id");
        }
        let p = e.position;
        if !finite(&[p.x, p.y, p.height]) || !b.contains(p.planar()) {
            bad(format!("entities[{i}].position"), "outside bounds");
        }
    }
    if world.entity(&world.goal.target).is_none() {
        bad("goal.target".into(), "no entity with this id");
    }
    let r = world.goal.reference_pose;
    if !finite(&[r.x, r.y, r.z, r.yaw, r.pitch]) || !b.contains(Point::new(r.x, r.y)) {
        bad("goal.reference_pose".into(), "outside bounds");
    }
    match route_nla(&world.goal.reference_nla, &RouterConfig::default()) {
        Err(_) => bad("goal.reference_nla".into(), "empty action text"),
        Ok(nla) if nla.is_stop() => bad("goal.reference_nla".into(), "must not be the stop phrase"),
        Ok(_) => {}
    }
    if let Err(msg) = world.agent.check() {
        bad("agent".into(), msg);
    }
    if let Some(s) = world.start {
        let p = Point::new(s.x, s.y);
        if !finite(&[s.x, s.y, s.z, s.yaw, s.pitch]) || !world.is_free(p, world.agent.radius) {
            bad("start".into(), "agent does not fit at the start pose");
        }
    }
    if world.instruction.as_deref().is_some_and(|s| s.trim().is_empty()) {
        bad("instruction".into(), "empty instruction");
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(WorldError::InvariantViolation(v))
    }
}
