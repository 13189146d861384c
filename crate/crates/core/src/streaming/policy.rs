use crate::expert::{ControllerState, Expert, ExpertObservation, Phase};
use crate::sim::GripperCommand;
use crate::scalar::Scalar;

use super::{ActionChunk, PolicyError};

/// Anything that turns one observation into an action chunk starting at the
/// observation tick.
pub trait ChunkPolicy<T: Scalar>: Send {
    fn infer(&mut self, observation: &ExpertObservation<T>, horizon: usize) -> Result<ActionChunk<T>, PolicyError>;

    /// Forget per-episode state.
    fn reset(&mut self) {}

    fn name(&self) -> String;
}

/// The state-machine expert rolled out against a frozen belief.
///
/// Between inferences the policy keeps the phase the expert held at the
/// previous observation tick; `advance` catches up from there. When the
/// previous plan agrees on the phase at the new observation tick, its settle
/// count is carried over and a grasp or release it scheduled from that tick
/// on stays due at the same tick. Without this a newer chunk whose belief
/// puts the gate one tick later would reopen a gripper the older chunk
/// already closed on the object.
#[derive(Debug, Clone)]
pub struct OraclePolicy<T: Scalar> {
    pub expert: Expert<T>,
    state: ControllerState,
    last: Option<(ActionChunk<T>, Vec<ControllerState>)>,
}

impl<T: Scalar> OraclePolicy<T> {
    pub fn new(expert: Expert<T>) -> Self {
        Self {
            expert,
            state: ControllerState::default(),
            last: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    fn carried(&self, observation: &ExpertObservation<T>) -> ControllerState {
        let Ok(phase) = self.expert.advance(observation, self.state.phase) else {
            return self.state;
        };
        let fresh = if self.state.phase == phase { self.state } else { ControllerState::new(phase) };
        let Some((chunk, states)) = &self.last else {
            return fresh;
        };
        let Some(j) = observation.tick.checked_sub(chunk.start_tick) else {
            return fresh;
        };
        let j = j as usize;
        let settled = match j.checked_sub(1).and_then(|i| states.get(i)) {
            Some(p) if p.phase == phase => p.settled,
            _ => fresh.settled,
        };
        let event = match phase {
            Phase::GraspLift => GripperCommand::Close,
            Phase::ApproachTargetPlace => GripperCommand::Open,
            _ => return ControllerState { settled, ..fresh },
        };
        let due = (j..states.len())
            .take_while(|&k| states[k].phase == phase)
            .find(|&k| chunk.actions[k].gripper_command == event)
            .map(|k| chunk.start_tick + k as u64);
        ControllerState { phase, settled, due }
    }
}

impl<T: Scalar> ChunkPolicy<T> for OraclePolicy<T> {
    fn infer(&mut self, observation: &ExpertObservation<T>, horizon: usize) -> Result<ActionChunk<T>, PolicyError> {
        let start = self.carried(observation);
        let (chunk, states) = self.expert.plan(observation, start, horizon)?;
        self.state = states[0];
        self.last = Some((chunk.clone(), states));
        Ok(chunk)
    }

    fn reset(&mut self) {
        self.state = ControllerState::default();
        self.last = None;
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}
