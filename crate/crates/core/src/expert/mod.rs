//! Four-stage state-machine controller and its supporting pieces.
//!
//! The controller consumes symbolic object state (no pixels) and emits
//! end-effector commands. It serves as the data-collection policy, as the
//! chunk-producing oracle behind the streaming executor, and as the source of
//! training chunks for the flow model.

mod controller;
mod observe;
mod target;
mod velocity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ConfigSection, KvConfig};
use crate::geom::Vec3;
use crate::scalar::Scalar;
use crate::sim::{EndEffectorState, ObjectId};

pub use controller::Expert;
pub use observe::{observe_exact, Observer, VelocitySource};
pub use target::{resolve_target, Selector, Side, SpeedRank, TargetSpec};
pub use velocity::{estimate_velocity, VelocityFitWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    ApproachObject,
    GraspLift,
    ApproachTargetPlace,
    Reset,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::ApproachObject,
        Phase::GraspLift,
        Phase::ApproachTargetPlace,
        Phase::Reset,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Successor along the cycle.
    pub fn next(self) -> Phase {
        Phase::ALL[(self.index() + 1) % 4]
    }
}

/// What the controller carries from one tick to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControllerState {
    pub phase: Phase,
    /// Consecutive ticks the current grasp or release gate has held.
    pub settled: u32,
    /// Tick at which the pending grasp or release fires regardless of the gate.
    pub due: Option<u64>,
}

impl ControllerState {
    pub fn new(phase: Phase) -> Self {
        Self {
            phase,
            settled: 0,
            due: None,
        }
    }
}

impl Default for ControllerState {
    fn default() -> Self {
        Self::new(Phase::ApproachObject)
    }
}

impl From<Phase> for ControllerState {
    fn from(phase: Phase) -> Self {
        Self::new(phase)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpertError {
    #[error("instruction matches several objects labelled {0:?}")]
    AmbiguousTarget(String),
    #[error("no candidate object matches the instruction")]
    NoCandidates,
    #[error("target object lost")]
    TargetLost,
    #[error("velocity window needs at least 2 samples with increasing ticks, got {0}")]
    DegenerateWindow(usize),
    #[error("chunk horizon must be at least 1")]
    InvalidHorizon,
}

/// One object as the controller sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ObservedObject<T> {
    pub id: ObjectId,
    pub label: String,
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub radius: T,
    pub attached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExpertObservation<T> {
    pub tick: u64,
    pub end_effector: EndEffectorState<T>,
    /// Objects currently on the table or in the gripper.
    pub objects: Vec<ObservedObject<T>>,
    pub instruction: TargetSpec,
    pub target_location: Vec3<T>,
}

impl<T: Scalar> ExpertObservation<T> {
    pub fn object(&self, id: ObjectId) -> Option<&ObservedObject<T>> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn attached(&self) -> Option<&ObservedObject<T>> {
        self.objects.iter().find(|o| o.attached)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertConfig<T> {
    /// Look-ahead used for the hover point, seconds (rounded up to ticks).
    pub prediction_horizon: T,
    pub hover_offset: T,
    pub lift_height: T,
    /// Consecutive ticks a grasp or release gate must hold before the gripper acts.
    pub settle_ticks: u32,
    /// Samples in the velocity-fit window.
    pub window: usize,
    pub hover_tolerance: T,
    /// Hand-to-object distance below which Close is issued.
    pub close_distance: T,
    /// Relative speed below which Close is issued.
    pub close_speed: T,
    pub release_tolerance: T,
    pub home_tolerance: T,
    pub velocity_source: VelocitySource,
}

impl<T: Scalar> Default for ExpertConfig<T> {
    fn default() -> Self {
        Self {
            prediction_horizon: T::lit(0.23),
            hover_offset: T::lit(0.10),
            lift_height: T::lit(0.15),
            settle_ticks: 6,
            window: 8,
            hover_tolerance: T::lit(0.04),
            close_distance: T::lit(0.005),
            close_speed: T::lit(0.1),
            release_tolerance: T::lit(0.01),
            home_tolerance: T::lit(0.02),
            velocity_source: VelocitySource::Truth,
        }
    }
}

impl<T: Scalar> ConfigSection for ExpertConfig<T> {
    const KEYS: &'static [&'static str] = &[
        "expert.prediction_horizon",
        "expert.hover_offset",
        "expert.lift_height",
        "expert.settle_ticks",
        "expert.window",
        "expert.hover_tolerance",
        "expert.close_distance",
        "expert.close_speed",
        "expert.release_tolerance",
        "expert.home_tolerance",
        "expert.velocity_source",
    ];

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        kv.read("expert.prediction_horizon", &mut self.prediction_horizon)?;
        kv.read("expert.hover_offset", &mut self.hover_offset)?;
        kv.read("expert.lift_height", &mut self.lift_height)?;
        kv.read("expert.settle_ticks", &mut self.settle_ticks)?;
        kv.read("expert.window", &mut self.window)?;
        kv.read("expert.hover_tolerance", &mut self.hover_tolerance)?;
        kv.read("expert.close_distance", &mut self.close_distance)?;
        kv.read("expert.close_speed", &mut self.close_speed)?;
        kv.read("expert.release_tolerance", &mut self.release_tolerance)?;
        kv.read("expert.home_tolerance", &mut self.home_tolerance)?;
        kv.read("expert.velocity_source", &mut self.velocity_source)?;
        Ok(())
    }

    fn export(&self, kv: &mut KvConfig) {
        kv.set("expert.prediction_horizon", self.prediction_horizon);
        kv.set("expert.hover_offset", self.hover_offset);
        kv.set("expert.lift_height", self.lift_height);
        kv.set("expert.settle_ticks", self.settle_ticks);
        kv.set("expert.window", self.window);
        kv.set("expert.hover_tolerance", self.hover_tolerance);
        kv.set("expert.close_distance", self.close_distance);
        kv.set("expert.close_speed", self.close_speed);
        kv.set("expert.release_tolerance", self.release_tolerance);
        kv.set("expert.home_tolerance", self.home_tolerance);
        kv.set("expert.velocity_source", self.velocity_source);
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.prediction_horizon >= T::zero()) {
            return Err(ConfigError::Invalid("expert.prediction_horizon must be >= 0".into()));
        }
        if self.window < 2 {
            return Err(ConfigError::Invalid("expert.window must be >= 2".into()));
        }
        Ok(())
    }
}
