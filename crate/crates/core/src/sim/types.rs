use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Aabb, Pose6D, Quat, Vec3};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lifecycle of an object within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectStatus {
    /// Scheduled to appear at a later tick.
    Pending,
    Free,
    Attached,
    Placed,
    Dropped,
}

impl ObjectStatus {
    /// Visible on the table or in the gripper.
    pub fn is_active(self) -> bool {
        matches!(self, ObjectStatus::Free | ObjectStatus::Attached)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum ScriptedMotion<T> {
    /// Rotate the horizontal velocity by this many radians.
    Turn(T),
    SetVelocity(Vec3<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MotionProgram<T> {
    pub spawn_tick: u64,
    /// Constant turn rate of the velocity heading, rad/s.
    pub turn_rate: T,
    /// `(tick, change)` sorted by tick.
    pub events: Vec<(u64, ScriptedMotion<T>)>,
}

impl<T: Scalar> Default for MotionProgram<T> {
    fn default() -> Self {
        Self {
            spawn_tick: 0,
            turn_rate: T::zero(),
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ObjectState<T> {
    pub id: ObjectId,
    pub label: String,
    pub pose: Pose6D<T>,
    pub linear_velocity: Vec3<T>,
    pub angular_velocity: Vec3<T>,
    pub friction: T,
    pub radius: T,
    pub motion_program: Option<MotionProgram<T>>,
    pub status: ObjectStatus,
}

impl<T: Scalar> ObjectState<T> {
    pub fn new(id: u32, label: &str, position: Vec3<T>, velocity: Vec3<T>, friction: T, radius: T) -> Self {
        Self {
            id: ObjectId(id),
            label: label.to_string(),
            pose: Pose6D::at(position),
            linear_velocity: velocity,
            angular_velocity: Vec3::zero(),
            friction,
            radius,
            motion_program: None,
            status: ObjectStatus::Free,
        }
    }

    pub fn position(&self) -> Vec3<T> {
        self.pose.position
    }

    pub fn speed(&self) -> T {
        self.linear_velocity.norm()
    }

    pub fn is_valid(&self) -> bool {
        self.friction >= T::zero()
            && self.friction <= T::lit(10.0)
            && self.radius > T::zero()
            && self.pose.is_valid()
            && self.linear_velocity.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gripper {
    Open,
    Closing,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GripperCommand {
    Open,
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EndEffectorState<T> {
    pub pose: Pose6D<T>,
    pub linear_velocity: Vec3<T>,
    pub gripper: Gripper,
    pub attached_object: Option<ObjectId>,
    /// Object center minus end-effector position at grasp time.
    pub grasp_offset: Vec3<T>,
    pub closing_remaining: u32,
}

impl<T: Scalar> EndEffectorState<T> {
    pub fn at_rest(position: Vec3<T>) -> Self {
        Self {
            pose: Pose6D::new(position, Quat::top_down()),
            linear_velocity: Vec3::zero(),
            gripper: Gripper::Open,
            attached_object: None,
            grasp_offset: Vec3::zero(),
            closing_remaining: 0,
        }
    }

    pub fn position(&self) -> Vec3<T> {
        self.pose.position
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EndEffectorCommand<T> {
    pub target_position: Vec3<T>,
    pub target_orientation: Quat<T>,
    pub gripper_command: GripperCommand,
    /// Keep the current pose and gripper state; other fields ignored.
    pub hold: bool,
}

impl<T: Scalar> EndEffectorCommand<T> {
    pub fn hold() -> Self {
        Self {
            target_position: Vec3::zero(),
            target_orientation: Quat::identity(),
            gripper_command: GripperCommand::Open,
            hold: true,
        }
    }

    pub fn move_to(target: Vec3<T>, gripper: GripperCommand) -> Self {
        Self {
            target_position: target,
            target_orientation: Quat::top_down(),
            gripper_command: gripper,
            hold: false,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.hold || (self.target_position.is_finite() && self.target_orientation.is_unit(T::lit(1e-6)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Grasped(ObjectId),
    Released(ObjectId),
    Placed(ObjectId),
    Dropped(ObjectId),
    DirectionChange(ObjectId),
    Disturbance(ObjectId),
    Spawned(ObjectId),
    WorkspaceViolation,
    /// The policy failed to produce a command; the episode is aborted.
    PolicyFailure,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
}

/// Simulator constants that stay fixed for an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimParams<T> {
    pub grasp_tolerance: T,
    pub grasp_speed_tolerance: T,
    pub place_tolerance: T,
    pub v_max: T,
    pub gripper_close_ticks: u32,
    pub target_location: Vec3<T>,
    pub home_position: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WorldState<T> {
    pub tick: u64,
    pub dt: T,
    pub objects: Vec<ObjectState<T>>,
    pub end_effector: EndEffectorState<T>,
    pub workspace_bounds: Aabb<T>,
    pub gravity: T,
    pub params: SimParams<T>,
    pub rng: ChaCha8Rng,
    pub events: Vec<Event>,
}

impl<T: Scalar> WorldState<T> {
    pub fn object(&self, id: ObjectId) -> Option<&ObjectState<T>> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: ObjectId) -> Option<&mut ObjectState<T>> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn time(&self) -> T {
        T::from_u64_lossy(self.tick) * self.dt
    }

    pub(crate) fn emit(&mut self, tick: u64, kind: EventKind) {
        debug_assert!(self.events.last().is_none_or(|e| e.tick <= tick));
        self.events.push(Event { tick, kind });
    }

    /// Events stamped with `tick`.
    pub fn events_at(&self, tick: u64) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.tick == tick)
    }
}
