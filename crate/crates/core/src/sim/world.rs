use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{Pose6D, Quat, Vec3};
use crate::scalar::Scalar;

use super::config::SceneConfig;
use super::dynamics::{advance_free_motion, predict_pose};
use super::types::*;
use super::SimError;

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Uniform draw on the closed interval `[lo, hi]`.
pub(crate) fn uniform_closed<T: Scalar>(rng: &mut ChaCha8Rng, lo: T, hi: T) -> T {
    if lo == hi {
        // keep the stream position identical to the non-degenerate case
        let _: f64 = rng.random();
        return lo;
    }
    let u: f64 = rng.random_range(lo.as_f64()..=hi.as_f64());
    T::lit(u).max(lo).min(hi)
}

impl<T: Scalar> WorldState<T> {
    /// World at tick 0 with the end-effector at home and the given objects.
    pub fn from_parts(config: &SceneConfig<T>, objects: Vec<ObjectState<T>>, rng: ChaCha8Rng) -> Self {
        let home = config.home_position();
        let mut world = Self {
            tick: 0,
            dt: config.dt(),
            objects,
            end_effector: EndEffectorState::at_rest(home),
            workspace_bounds: config.workspace,
            gravity: config.gravity,
            params: SimParams {
                grasp_tolerance: config.grasp_tolerance,
                grasp_speed_tolerance: config.grasp_speed_tolerance,
                place_tolerance: config.place_tolerance,
                v_max: config.v_max,
                gripper_close_ticks: config.gripper_close_ticks,
                target_location: config.target_location,
                home_position: home,
            },
            rng,
            events: Vec::new(),
        };
        for o in &mut world.objects {
            let pending = o.motion_program.as_ref().is_some_and(|p| p.spawn_tick > 0);
            if pending {
                o.status = ObjectStatus::Pending;
            }
        }
        world
    }

    /// Advance one tick.
    pub fn step_mut(&mut self, command: &EndEffectorCommand<T>) {
        debug_assert!(command.is_valid(), "invalid end-effector command");
        let now = self.tick;
        let next = now + 1;
        let dt = self.dt;

        self.apply_scripted_motion(now);

        // End-effector: velocity-limited point kinematics.
        let ee_prev = self.end_effector.pose.position;
        if command.hold {
            self.end_effector.linear_velocity = Vec3::zero();
        } else {
            let target = self.workspace_bounds.clamp(command.target_position);
            let delta = target - ee_prev;
            let dist = delta.norm();
            let reach = self.params.v_max * dt;
            let new_pos = if dist <= reach {
                target
            } else {
                ee_prev + delta * (reach / dist)
            };
            self.end_effector.pose.position = new_pos;
            self.end_effector.pose.orientation = command.target_orientation.normalized();
            self.end_effector.linear_velocity = (new_pos - ee_prev) * (T::one() / dt);
        }
        let ee_pos = self.end_effector.pose.position;
        let ee_vel = self.end_effector.linear_velocity;

        // Free objects.
        let g = self.gravity;
        for o in self.objects.iter_mut().filter(|o| o.status == ObjectStatus::Free) {
            let (p, v) = advance_free_motion(o.pose.position, o.linear_velocity, o.friction, g, dt);
            o.pose.position = p;
            o.linear_velocity = v;
            o.pose.orientation = o.pose.orientation.integrate(o.angular_velocity, dt);
        }

        // Attached object rides with the end-effector.
        if let Some(id) = self.end_effector.attached_object {
            let offset = self.end_effector.grasp_offset;
            if let Some(o) = self.object_mut(id) {
                o.pose.position = ee_pos + offset;
                o.linear_velocity = ee_vel;
            }
        }

        if !command.hold {
            self.apply_gripper(command.gripper_command, next);
        } else if self.end_effector.gripper == Gripper::Closing {
            self.advance_closing(next);
        }

        // Workspace closure.
        let bounds = self.workspace_bounds;
        let mut dropped = Vec::new();
        for o in self.objects.iter_mut().filter(|o| o.status == ObjectStatus::Free) {
            if !bounds.contains_xy(o.pose.position) {
                o.status = ObjectStatus::Dropped;
                o.linear_velocity = Vec3::zero();
                dropped.push(o.id);
            }
        }
        for id in dropped {
            self.emit(next, EventKind::Dropped(id));
        }
        if !bounds.contains(self.end_effector.pose.position) {
            self.emit(next, EventKind::WorkspaceViolation);
        }

        self.tick = next;

        let mut spawned = Vec::new();
        for o in self.objects.iter_mut() {
            if o.status == ObjectStatus::Pending
                && o.motion_program.as_ref().is_some_and(|p| p.spawn_tick <= next)
            {
                o.status = ObjectStatus::Free;
                spawned.push(o.id);
            }
        }
        for id in spawned {
            self.emit(next, EventKind::Spawned(id));
        }
    }

    fn apply_scripted_motion(&mut self, now: u64) {
        let dt = self.dt;
        let mut changed = Vec::new();
        for o in self.objects.iter_mut().filter(|o| o.status == ObjectStatus::Free) {
            let Some(program) = o.motion_program.as_ref() else {
                continue;
            };
            for (_, change) in program.events.iter().filter(|(t, _)| *t == now) {
                o.linear_velocity = match *change {
                    ScriptedMotion::Turn(angle) => o.linear_velocity.rotate_z(angle),
                    ScriptedMotion::SetVelocity(v) => v,
                };
                changed.push(o.id);
            }
            if program.turn_rate != T::zero() {
                o.linear_velocity = o.linear_velocity.rotate_z(program.turn_rate * dt);
            }
        }
        for id in changed {
            self.emit(now, EventKind::DirectionChange(id));
        }
    }

    fn apply_gripper(&mut self, cmd: GripperCommand, next: u64) {
        match (cmd, self.end_effector.gripper) {
            (GripperCommand::Close, Gripper::Open) => {
                if self.params.gripper_close_ticks == 0 {
                    self.try_grasp(next);
                } else {
                    self.end_effector.gripper = Gripper::Closing;
                    self.end_effector.closing_remaining = self.params.gripper_close_ticks;
                }
            }
            (GripperCommand::Close, Gripper::Closing) => self.advance_closing(next),
            (GripperCommand::Close, Gripper::Closed) => {}
            (GripperCommand::Open, Gripper::Open) => {}
            (GripperCommand::Open, _) => self.release(next),
        }
    }

    fn advance_closing(&mut self, next: u64) {
        let ee = &mut self.end_effector;
        ee.closing_remaining = ee.closing_remaining.saturating_sub(1);
        if ee.closing_remaining == 0 {
            self.try_grasp(next);
        }
    }

    /// Close the gripper, attaching the nearest object that satisfies the
    /// distance and relative-speed gates.
    fn try_grasp(&mut self, next: u64) {
        self.end_effector.gripper = Gripper::Closed;
        self.end_effector.closing_remaining = 0;
        let ee_pos = self.end_effector.pose.position;
        let ee_vel = self.end_effector.linear_velocity;
        let params = &self.params;
        let candidate = self
            .objects
            .iter()
            .filter(|o| o.status == ObjectStatus::Free)
            .map(|o| (o.id, o.pose.position.distance(ee_pos), (o.linear_velocity - ee_vel).norm()))
            .filter(|&(_, d, rel)| d <= params.grasp_tolerance && rel <= params.grasp_speed_tolerance)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        if let Some((id, _, _)) = candidate {
            let o = self.object_mut(id).expect("candidate exists");
            o.status = ObjectStatus::Attached;
            o.linear_velocity = ee_vel;
            let offset = o.pose.position - ee_pos;
            self.end_effector.attached_object = Some(id);
            self.end_effector.grasp_offset = offset;
            self.emit(next, EventKind::Grasped(id));
        }
    }

    fn release(&mut self, next: u64) {
        self.end_effector.gripper = Gripper::Open;
        self.end_effector.closing_remaining = 0;
        let Some(id) = self.end_effector.attached_object.take() else {
            return;
        };
        self.end_effector.grasp_offset = Vec3::zero();
        let target = self.params.target_location;
        let tol = self.params.place_tolerance;
        let o = self.object_mut(id).expect("attached object exists");
        let horizontal = (o.pose.position - target).horizontal().norm();
        o.linear_velocity = Vec3::zero();
        o.angular_velocity = Vec3::zero();
        let placed = horizontal <= tol;
        if placed {
            o.status = ObjectStatus::Placed;
            o.pose.position = o.pose.position.with_z(target.z + o.radius);
        } else {
            o.status = ObjectStatus::Dropped;
        }
        self.emit(next, EventKind::Released(id));
        self.emit(next, if placed { EventKind::Placed(id) } else { EventKind::Dropped(id) });
    }

    /// Add `impulse` to a free object's velocity and log a disturbance.
    pub fn apply_disturbance_mut(&mut self, id: ObjectId, impulse: Vec3<T>) -> Result<(), SimError> {
        let tick = self.tick;
        let o = self.object_mut(id).ok_or(SimError::UnknownObject(id))?;
        match o.status {
            ObjectStatus::Attached => return Err(SimError::AttachedObject(id)),
            ObjectStatus::Free => o.linear_velocity += impulse,
            // nothing to push once the object has left the table
            _ => {}
        }
        self.emit(tick, EventKind::Disturbance(id));
        Ok(())
    }

    /// Append the timeout event at the current tick.
    pub fn mark_timeout(&mut self) {
        let tick = self.tick;
        self.emit(tick, EventKind::Timeout);
    }

    pub fn mark_policy_failure(&mut self) {
        let tick = self.tick;
        self.emit(tick, EventKind::PolicyFailure);
    }
}

/// Sample a scene: objects on the table with pairwise clearance.
pub fn spawn_scene<T: Scalar>(config: &SceneConfig<T>, seed: u64) -> Result<WorldState<T>, SimError> {
    use crate::config::ConfigSection;
    config
        .validate()
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = config.spawn_region();
    let radius = config.object_radius;
    let z = config.workspace.min.z + radius;
    let mut objects: Vec<ObjectState<T>> = Vec::with_capacity(config.n_objects);
    for i in 0..config.n_objects {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let x = uniform_closed(&mut rng, region.min.x, region.max.x);
            let y = uniform_closed(&mut rng, region.min.y, region.max.y);
            let p = Vec3::new(x, y, z);
            if objects
                .iter()
                .all(|o| o.pose.position.distance(p) >= o.radius + radius)
            {
                placed = Some(p);
                break;
            }
        }
        let position = placed.ok_or(SimError::InfeasiblePlacement {
            placed: i,
            requested: config.n_objects,
        })?;
        let speed = uniform_closed(&mut rng, config.speed_min, config.speed_max);
        let heading = uniform_closed(&mut rng, T::zero(), T::lit(std::f64::consts::TAU));
        let friction = uniform_closed(&mut rng, config.friction_min, config.friction_max);
        let velocity = Vec3::new(heading.cos() * speed, heading.sin() * speed, T::zero());
        let mut o = ObjectState::new(i as u32, "ball", position, velocity, friction, radius);
        o.pose = Pose6D::new(position, Quat::identity());
        objects.push(o);
    }
    Ok(WorldState::from_parts(config, objects, rng))
}

/// Functional form of [`WorldState::step_mut`].
pub fn step<T: Scalar>(mut world: WorldState<T>, command: &EndEffectorCommand<T>) -> WorldState<T> {
    world.step_mut(command);
    world
}

pub fn apply_disturbance<T: Scalar>(
    mut world: WorldState<T>,
    id: ObjectId,
    impulse: Vec3<T>,
) -> Result<WorldState<T>, SimError> {
    world.apply_disturbance_mut(id, impulse)?;
    Ok(world)
}

/// [`predict_pose`] using the world's gravity and tick length.
pub fn predict_in_world<T: Scalar>(world: &WorldState<T>, object: &ObjectState<T>, horizon: T) -> Pose6D<T> {
    predict_pose(object, horizon, world.gravity, world.dt)
}
