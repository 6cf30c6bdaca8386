//! Desk-scale kinematic world: noisy execution of structured actions with
//! swept collision checks, and field-of-view gated symbolic observations.

pub mod geometry;
mod motion;
mod observe;
pub mod scenario;
mod world;

pub use geometry::{Circle, Obstacle, Point, Rect};
pub use motion::{apply_sla, execute_sequence, StepOutcome, HEIGHT_LIMIT_M, SWEEP_STEP_M};
pub use observe::{observe, visibility, Observation, VisibleEntity};
pub use world::{load_world, validate_world, Category, Entity, GoalSpec, Position, Violation, World, WorldError};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Actuation noise: zero-mean Gaussians truncated at two standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub turn_sigma_deg: f64,
    pub trans_sigma_m: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            turn_sigma_deg: 2.5,
            trans_sigma_m: 0.025,
        }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        Self {
            turn_sigma_deg: 0.0,
            trans_sigma_m: 0.0,
        }
    }
}

/// Draws from N(0, sigma^2) conditioned on |x| <= 2 sigma.
pub fn truncated_gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma.is_nan() || sigma <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).expect("positive finite sigma");
    loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= 2.0 * sigma {
            return x;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub radius: f64,
    pub fov_h: f64,
    pub fov_v: f64,
    pub view_range: f64,
    pub camera_base_height: f64,
    pub noise: NoiseConfig,
    /// Multiplier on forward translations only.
    pub forward_gain: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            radius: 0.3,
            fov_h: 90.0,
            fov_v: 60.0,
            view_range: 5.0,
            camera_base_height: 1.2,
            noise: NoiseConfig::default(),
            forward_gain: 1.0,
        }
    }
}

impl AgentConfig {
    /// Execution profile of the physical robot: forward moves amplified by 1.2.
    pub fn deploy_parity() -> Self {
        Self {
            forward_gain: 1.2,
            ..Self::default()
        }
    }

    pub fn noiseless(self) -> Self {
        Self {
            noise: NoiseConfig::off(),
            ..self
        }
    }

    pub(crate) fn check(&self) -> Result<(), &'static str> {
        let finite = [
            self.radius,
            self.fov_h,
            self.fov_v,
            self.view_range,
            self.camera_base_height,
            self.noise.turn_sigma_deg,
            self.noise.trans_sigma_m,
            self.forward_gain,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite value");
        }
        if self.radius <= 0.0 {
            return Err("radius must be positive");
        }
        if self.forward_gain <= 0.0 {
            return Err("forward gain must be positive");
        }
        if self.noise.turn_sigma_deg < 0.0 || self.noise.trans_sigma_m < 0.0 {
            return Err("noise sigmas must be non-negative");
        }
        if !(self.fov_h > 0.0 && self.fov_h <= 360.0 && self.fov_v > 0.0 && self.fov_v <= 180.0) {
            return Err("fields of view must lie in (0, 360] and (0, 180]");
        }
        if self.view_range <= 0.0 {
            return Err("view range must be positive");
        }
        Ok(())
    }
}
