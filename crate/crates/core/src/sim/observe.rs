use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::Point;
use super::{AgentConfig, Category, Entity, World};
use crate::pose::{wrap_degrees, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleEntity {
    pub id: String,
    pub category: Category,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    pub distance: f64,
    /// Relative to the heading, positive to the left.
    pub bearing: f64,
    pub elevation: f64,
}

/// Symbolic egocentric observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step: usize,
    pub visible: Vec<VisibleEntity>,
    pub collided_last_step: bool,
}

impl Observation {
    pub fn find(&self, id: &str) -> Option<&VisibleEntity> {
        self.visible.iter().find(|v| v.id == id)
    }
}

/// The entity as seen from `pose`, or `None` when out of range, outside the
/// field of view, or occluded by an obstacle.
pub fn visibility(pose: &Pose, entity: &Entity, world: &World, cfg: &AgentConfig) -> Option<VisibleEntity> {
    let eye = Point::new(pose.x, pose.y);
    let at = entity.position.planar();
    let distance = eye.distance(at);
    let bearing = wrap_degrees((at.y - pose.y).atan2(at.x - pose.x).to_degrees() - pose.yaw);
    let camera = cfg.camera_base_height + pose.z;
    let elevation = (entity.position.height - camera).atan2(distance).to_degrees();
    let seen = distance <= cfg.view_range
        && bearing.abs() <= cfg.fov_h / 2.0
        && (elevation - pose.pitch).abs() <= cfg.fov_v / 2.0
        && world.line_of_sight(eye, at);
    seen.then(|| VisibleEntity {
        id: entity.id.clone(),
        category: entity.category,
        attributes: entity.attributes.clone(),
        distance,
        bearing,
        elevation,
    })
}

/// Everything visible from `pose`, nearest first (ties by id).
pub fn observe(pose: &Pose, world: &World, cfg: &AgentConfig, step: usize, collided_last_step: bool) -> Observation {
    let mut visible: Vec<VisibleEntity> = world
        .entities
        .iter()
        .filter_map(|e| visibility(pose, e, world, cfg))
        .collect();
    visible.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.id.cmp(&b.id)));
    Observation {
        step,
        visible,
        collided_last_step,
    }
}
