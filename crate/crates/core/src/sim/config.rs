use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ConfigSection, KvConfig};
use crate::geom::{Aabb, Vec3};
use crate::scalar::Scalar;

/// Scene sampling ranges and simulator constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SceneConfig<T> {
    pub control_rate_hz: T,
    pub speed_min: T,
    pub speed_max: T,
    pub friction_min: T,
    pub friction_max: T,
    pub n_objects: usize,
    pub workspace: Aabb<T>,
    /// Spawn positions keep this distance from the workspace edge.
    pub spawn_margin: T,
    pub object_radius: T,
    pub grasp_tolerance: T,
    pub grasp_speed_tolerance: T,
    pub place_tolerance: T,
    pub v_max: T,
    pub timeout_ticks: u64,
    pub gravity: T,
    /// Ticks a Close command spends in `Closing` before the grasp check.
    pub gripper_close_ticks: u32,
    /// Placement center (static container).
    pub target_location: Vec3<T>,
    /// Height of the end-effector home pose above the table.
    pub home_height: T,
}

impl<T: Scalar> Default for SceneConfig<T> {
    fn default() -> Self {
        Self {
            control_rate_hz: T::lit(25.0),
            speed_min: T::zero(),
            speed_max: T::lit(0.75),
            friction_min: T::zero(),
            friction_max: T::lit(0.02),
            n_objects: 1,
            workspace: Aabb::new(Vec3::from_f64([-0.5, -0.5, 0.0]), Vec3::from_f64([0.5, 0.5, 0.6])),
            spawn_margin: T::lit(0.15),
            object_radius: T::lit(0.03),
            grasp_tolerance: T::lit(0.02),
            grasp_speed_tolerance: T::lit(0.25),
            place_tolerance: T::lit(0.05),
            v_max: T::lit(1.5),
            timeout_ticks: 300,
            gravity: T::lit(9.81),
            gripper_close_ticks: 0,
            target_location: Vec3::from_f64([-0.3, 0.4, 0.0]),
            home_height: T::lit(0.25),
        }
    }
}

impl<T: Scalar> SceneConfig<T> {
    pub fn dt(&self) -> T {
        T::one() / self.control_rate_hz
    }

    /// Region where object centers may be spawned.
    pub fn spawn_region(&self) -> Aabb<T> {
        let m = Vec3::new(self.spawn_margin, self.spawn_margin, T::zero());
        Aabb::new(self.workspace.min + m, self.workspace.max - m)
    }

    /// End-effector home: center-back of the workspace at `home_height`.
    pub fn home_position(&self) -> Vec3<T> {
        let c = self.workspace.center();
        Vec3::new(
            self.workspace.min.x + self.spawn_margin,
            c.y,
            self.workspace.min.z + self.home_height,
        )
    }

    /// All objects static.
    pub fn with_static_objects(mut self) -> Self {
        self.speed_min = T::zero();
        self.speed_max = T::zero();
        self
    }

    pub fn with_speed(mut self, lo: T, hi: T) -> Self {
        self.speed_min = lo;
        self.speed_max = hi;
        self
    }

    pub fn with_friction(mut self, lo: T, hi: T) -> Self {
        self.friction_min = lo;
        self.friction_max = hi;
        self
    }
}

impl<T: Scalar> ConfigSection for SceneConfig<T> {
    const KEYS: &'static [&'static str] = &[
        "control_rate_hz",
        "speed_min",
        "speed_max",
        "friction_min",
        "friction_max",
        "n_objects",
        "workspace_min_x",
        "workspace_min_y",
        "workspace_min_z",
        "workspace_max_x",
        "workspace_max_y",
        "workspace_max_z",
        "spawn_margin",
        "object_radius",
        "grasp_tolerance",
        "grasp_speed_tolerance",
        "place_tolerance",
        "v_max",
        "timeout_ticks",
        "gravity",
        "gripper_close_ticks",
        "target_x",
        "target_y",
        "target_z",
        "home_height",
    ];

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        kv.read("control_rate_hz", &mut self.control_rate_hz)?;
        kv.read("speed_min", &mut self.speed_min)?;
        kv.read("speed_max", &mut self.speed_max)?;
        kv.read("friction_min", &mut self.friction_min)?;
        kv.read("friction_max", &mut self.friction_max)?;
        kv.read("n_objects", &mut self.n_objects)?;
        kv.read("workspace_min_x", &mut self.workspace.min.x)?;
        kv.read("workspace_min_y", &mut self.workspace.min.y)?;
        kv.read("workspace_min_z", &mut self.workspace.min.z)?;
        kv.read("workspace_max_x", &mut self.workspace.max.x)?;
        kv.read("workspace_max_y", &mut self.workspace.max.y)?;
        kv.read("workspace_max_z", &mut self.workspace.max.z)?;
        kv.read("spawn_margin", &mut self.spawn_margin)?;
        kv.read("object_radius", &mut self.object_radius)?;
        kv.read("grasp_tolerance", &mut self.grasp_tolerance)?;
        kv.read("grasp_speed_tolerance", &mut self.grasp_speed_tolerance)?;
        kv.read("place_tolerance", &mut self.place_tolerance)?;
        kv.read("v_max", &mut self.v_max)?;
        kv.read("timeout_ticks", &mut self.timeout_ticks)?;
        kv.read("gravity", &mut self.gravity)?;
        kv.read("gripper_close_ticks", &mut self.gripper_close_ticks)?;
        kv.read("target_x", &mut self.target_location.x)?;
        kv.read("target_y", &mut self.target_location.y)?;
        kv.read("target_z", &mut self.target_location.z)?;
        kv.read("home_height", &mut self.home_height)?;
        Ok(())
    }

    fn export(&self, kv: &mut KvConfig) {
        kv.set("control_rate_hz", self.control_rate_hz);
        kv.set("speed_min", self.speed_min);
        kv.set("speed_max", self.speed_max);
        kv.set("friction_min", self.friction_min);
        kv.set("friction_max", self.friction_max);
        kv.set("n_objects", self.n_objects);
        kv.set("workspace_min_x", self.workspace.min.x);
        kv.set("workspace_min_y", self.workspace.min.y);
        kv.set("workspace_min_z", self.workspace.min.z);
        kv.set("workspace_max_x", self.workspace.max.x);
        kv.set("workspace_max_y", self.workspace.max.y);
        kv.set("workspace_max_z", self.workspace.max.z);
        kv.set("spawn_margin", self.spawn_margin);
        kv.set("object_radius", self.object_radius);
        kv.set("grasp_tolerance", self.grasp_tolerance);
        kv.set("grasp_speed_tolerance", self.grasp_speed_tolerance);
        kv.set("place_tolerance", self.place_tolerance);
        kv.set("v_max", self.v_max);
        kv.set("timeout_ticks", self.timeout_ticks);
        kv.set("gravity", self.gravity);
        kv.set("gripper_close_ticks", self.gripper_close_ticks);
        kv.set("target_x", self.target_location.x);
        kv.set("target_y", self.target_location.y);
        kv.set("target_z", self.target_location.z);
        kv.set("home_height", self.home_height);
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.control_rate_hz > T::zero()) {
            return bad("control_rate_hz must be positive");
        }
        if !(self.speed_min >= T::zero() && self.speed_min <= self.speed_max) {
            return bad("speed range must satisfy 0 <= speed_min <= speed_max");
        }
        if !(self.friction_min >= T::zero()
            && self.friction_min <= self.friction_max
            && self.friction_max <= T::lit(10.0))
        {
            return bad("friction range must lie in [0, 10] with min <= max");
        }
        if !self.workspace.is_valid() {
            return bad("workspace box is empty");
        }
        if !(self.object_radius > T::zero()) {
            return bad("object_radius must be positive");
        }
        let region = self.spawn_region();
        if !(region.min.x <= region.max.x && region.min.y <= region.max.y) {
            return bad("spawn_margin leaves no spawn region");
        }
        if !(self.v_max > T::zero()) {
            return bad("v_max must be positive");
        }
        if !(self.grasp_tolerance >= T::zero()
            && self.grasp_speed_tolerance >= T::zero()
            && self.place_tolerance >= T::zero())
        {
            return bad("tolerances must be non-negative");
        }
        if !(self.gravity >= T::zero()) {
            return bad("gravity must be non-negative");
        }
        if !self.workspace.contains(self.home_position()) {
            return bad("home pose must lie inside the workspace");
        }
        if !self.target_location.is_finite() || !self.workspace.contains_xy(self.target_location) {
            return bad("target location must lie inside the workspace");
        }
        Ok(())
    }
}
