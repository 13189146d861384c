//! Fixed-rate kinematic tabletop simulator.
//!
//! One tick is one control step (`dt = 1 / control_rate_hz`, 40 ms by
//! default). Objects slide under Coulomb deceleration, the end-effector is a
//! velocity-limited point, and grasping is a distance + relative-speed gate.
//! Objects do not collide with each other.

mod config;
mod dynamics;
mod outcome;
mod types;
mod world;

use thiserror::Error;

pub use config::SceneConfig;
pub use dynamics::{advance_free_motion, horizon_ticks, predict_pose};
pub use outcome::{evaluate, placed_count, Outcome};
pub use types::*;
pub use world::{apply_disturbance, predict_in_world, spawn_scene, step};

pub(crate) use world::uniform_closed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("could not place object {placed} of {requested} with the required clearance")]
    InfeasiblePlacement { placed: usize, requested: usize },
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("object {0} is held by the gripper")]
    AttachedObject(ObjectId),
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
}
