use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::Vec3;
use crate::scalar::Scalar;
use crate::sim::{
    predict_pose, EndEffectorCommand, Gripper, GripperCommand, ObjectState, ObjectStatus, SceneConfig, WorldState,
};
use crate::streaming::ActionChunk;

use super::{
    observe_exact, resolve_target, ControllerState, ExpertConfig, ExpertError, ExpertObservation, ObservedObject,
    Phase,
};

/// The state-machine controller bound to a scene's physical constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Expert<T: Scalar> {
    pub config: ExpertConfig<T>,
    pub scene: SceneConfig<T>,
}

impl<T: Scalar> Expert<T> {
    pub fn new(config: ExpertConfig<T>, scene: SceneConfig<T>) -> Self {
        Self { config, scene }
    }

    // friction is not observed; the belief lets objects coast
    fn belief_object(&self, o: &ObservedObject<T>) -> ObjectState<T> {
        let mut s = ObjectState::new(
            o.id.0,
            &o.label,
            o.position,
            o.velocity,
            T::zero(),
            o.radius,
        );
        s.id = o.id;
        if o.attached {
            s.status = ObjectStatus::Attached;
        }
        s
    }

    /// Object position `horizon` seconds ahead under the controller's motion model.
    pub fn predict(&self, o: &ObservedObject<T>, horizon: T) -> Vec3<T> {
        predict_pose(&self.belief_object(o), horizon, self.scene.gravity, self.scene.dt()).position
    }

    /// Hover point above the predicted object location.
    pub fn hover_point(&self, o: &ObservedObject<T>) -> Vec3<T> {
        let p = self.predict(o, self.config.prediction_horizon);
        Vec3::new(p.x, p.y, p.z + self.config.hover_offset)
    }

    fn target<'a>(&self, obs: &'a ExpertObservation<T>) -> Result<&'a ObservedObject<T>, ExpertError> {
        let id = resolve_target(obs).map_err(|e| match e {
            ExpertError::NoCandidates => ExpertError::TargetLost,
            other => other,
        })?;
        Ok(obs.object(id).expect("resolved id is observed"))
    }

    fn carry_height(&self, obs: &ExpertObservation<T>) -> T {
        let r = obs.attached().map_or(self.scene.object_radius, |o| o.radius);
        self.scene.workspace.min.z + r + self.config.lift_height
    }

    /// Phase after applying every transition enabled by `obs`.
    pub fn advance(&self, obs: &ExpertObservation<T>, phase: Phase) -> Result<Phase, ExpertError> {
        let ee = &obs.end_effector;
        let attached = ee.attached_object.is_some();
        let mut phase = phase;
        // at most one full cycle per tick
        for _ in 0..4 {
            let next = match phase {
                Phase::ApproachObject => {
                    if attached {
                        Phase::GraspLift
                    } else {
                        let o = self.target(obs)?;
                        let hover = self.hover_point(o);
                        let p = ee.position();
                        // already below hover height over the object: the descent has begun
                        let engaged = p.z < hover.z - self.config.hover_tolerance
                            && (p - o.position).horizontal().norm() <= self.config.hover_tolerance;
                        if engaged || p.distance(hover) <= self.config.hover_tolerance {
                            Phase::GraspLift
                        } else {
                            Phase::ApproachObject
                        }
                    }
                }
                Phase::GraspLift if attached => Phase::ApproachTargetPlace,
                Phase::GraspLift => Phase::GraspLift,
                Phase::ApproachTargetPlace if !attached => Phase::Reset,
                Phase::ApproachTargetPlace => Phase::ApproachTargetPlace,
                Phase::Reset => {
                    let home = self.scene.home_position();
                    let at_home = ee.position().distance(home) <= self.config.home_tolerance;
                    if at_home && resolve_target(obs).is_ok() {
                        Phase::ApproachObject
                    } else {
                        Phase::Reset
                    }
                }
            };
            if next == phase {
                break;
            }
            phase = next;
        }
        Ok(phase)
    }

    /// Command for `phase`, plus the updated controller state.
    fn command(
        &self,
        obs: &ExpertObservation<T>,
        phase: Phase,
        state: ControllerState,
    ) -> Result<(EndEffectorCommand<T>, ControllerState), ExpertError> {
        let ee = &obs.end_effector;
        let ws = &self.scene.workspace;
        let settle = self.config.settle_ticks;
        let ControllerState { settled, due, .. } = state;
        let is_due = due.is_some_and(|t| obs.tick >= t);
        let keep = |settled| ControllerState { phase, settled, due };
        let fired = ControllerState { phase, settled: 0, due: None };
        let out = match phase {
            Phase::ApproachObject => {
                let o = self.target(obs)?;
                (EndEffectorCommand::move_to(ws.clamp(self.hover_point(o)), GripperCommand::Open), keep(0))
            }
            Phase::GraspLift => {
                let o = self.target(obs)?;
                // track the object one tick ahead at its own height
                let next = self.predict(o, self.scene.dt());
                let target = ws.clamp(next);
                if ee.gripper == Gripper::Closing {
                    (EndEffectorCommand::move_to(target, GripperCommand::Close), keep(settled))
                } else if ee.gripper == Gripper::Closed {
                    // closed on nothing: reopen and keep tracking
                    (EndEffectorCommand::move_to(target, GripperCommand::Open), fired)
                } else {
                    let gate = ee.position().distance(o.position) <= self.config.close_distance
                        && (ee.linear_velocity - o.velocity).norm() <= self.config.close_speed;
                    if gate && (settled >= settle || is_due) {
                        (EndEffectorCommand::move_to(target, GripperCommand::Close), fired)
                    } else {
                        let next = keep(if gate { settled + 1 } else { 0 });
                        (EndEffectorCommand::move_to(target, GripperCommand::Open), next)
                    }
                }
            }
            Phase::ApproachTargetPlace => {
                let carry = self.carry_height(obs);
                let p = ee.position();
                let goal = obs.target_location.with_z(carry);
                let horizontal = (goal - p).horizontal().norm();
                if horizontal <= self.config.release_tolerance {
                    if settled >= settle || is_due {
                        (EndEffectorCommand::move_to(ws.clamp(goal), GripperCommand::Open), fired)
                    } else {
                        (EndEffectorCommand::move_to(ws.clamp(goal), GripperCommand::Close), keep(settled + 1))
                    }
                } else if p.z < carry - self.config.release_tolerance {
                    let lift = EndEffectorCommand::move_to(ws.clamp(p.with_z(carry)), GripperCommand::Close);
                    (lift, keep(0))
                } else {
                    (EndEffectorCommand::move_to(ws.clamp(goal), GripperCommand::Close), keep(0))
                }
            }
            Phase::Reset => {
                // rise straight up before heading home
                let home = self.scene.home_position();
                let p = ee.position();
                let target = if p.z < home.z - self.config.home_tolerance {
                    p.with_z(home.z)
                } else {
                    home
                };
                (EndEffectorCommand::move_to(target, GripperCommand::Open), fired)
            }
        };
        Ok(out)
    }

    /// One closed-loop control step: transition, then command for the new phase.
    pub fn step(
        &self,
        obs: &ExpertObservation<T>,
        state: impl Into<ControllerState>,
    ) -> Result<(EndEffectorCommand<T>, ControllerState), ExpertError> {
        let state = state.into();
        let phase = self.advance(obs, state.phase)?;
        let state = if phase == state.phase { state } else { ControllerState::new(phase) };
        self.command(obs, phase, state)
    }

    /// Simulator instance holding the controller's belief about `obs`.
    pub fn belief_world(&self, obs: &ExpertObservation<T>) -> WorldState<T> {
        let objects = obs.objects.iter().map(|o| self.belief_object(o)).collect();
        let mut world = WorldState::from_parts(&self.scene, objects, ChaCha8Rng::seed_from_u64(0));
        world.tick = obs.tick;
        world.end_effector = obs.end_effector.clone();
        world.params.target_location = obs.target_location;
        world
    }

    /// Emit `n + 1` commands for ticks `obs.tick ..= obs.tick + n` from a single
    /// observation.
    ///
    /// The controller is run against a frozen belief: objects extrapolated from
    /// the observation with the controller's motion model, the end-effector
    /// driven by its own commands. Nothing from the true world after
    /// `obs.tick` is consulted. If the belief loses the target mid-chunk the
    /// remaining slots repeat the last command.
    pub fn rollout(
        &self,
        obs: &ExpertObservation<T>,
        state: impl Into<ControllerState>,
        n: usize,
    ) -> Result<ActionChunk<T>, ExpertError> {
        self.plan(obs, state, n).map(|(chunk, _)| chunk)
    }

    /// [`Expert::rollout`] together with the controller state after each slot.
    pub fn plan(
        &self,
        obs: &ExpertObservation<T>,
        state: impl Into<ControllerState>,
        n: usize,
    ) -> Result<(ActionChunk<T>, Vec<ControllerState>), ExpertError> {
        if n == 0 {
            return Err(ExpertError::InvalidHorizon);
        }
        let (first, mut state) = self.step(obs, state)?;
        let mut actions = Vec::with_capacity(n + 1);
        let mut states = Vec::with_capacity(n + 1);
        actions.push(first);
        states.push(state);
        let mut belief = self.belief_world(obs);
        belief.step_mut(&first);
        for _ in 1..=n {
            let o = observe_exact(&belief, &obs.instruction, obs.target_location);
            match self.step(&o, state) {
                Ok((cmd, s)) => {
                    actions.push(cmd);
                    states.push(s);
                    state = s;
                    belief.step_mut(&cmd);
                }
                Err(_) => {
                    let last = *actions.last().expect("non-empty");
                    while actions.len() < n + 1 {
                        actions.push(last);
                        states.push(state);
                    }
                    break;
                }
            }
        }
        let phases = states.iter().map(|s| s.phase).collect();
        Ok((ActionChunk::new(obs.tick, actions).with_phases(phases), states))
    }
}
