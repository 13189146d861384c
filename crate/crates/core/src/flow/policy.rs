use crate::datagen::ACTION_DIM;
use crate::expert::{Expert, ExpertObservation, Phase};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::streaming::{ActionChunk, ChunkPolicy, PolicyError};

use super::io::FlowModel;
use super::{decode_action, sample_chunk, ConditionVector};

/// Reshape a flat sample into a chunk starting at `start_tick`.
pub fn chunk_from_vector<T: Scalar>(v: &[T], start_tick: u64) -> Result<ActionChunk<T>, PolicyError> {
    if v.is_empty() || !v.len().is_multiple_of(ACTION_DIM) {
        return Err(PolicyError::Other(format!("sample width {} is not a multiple of {ACTION_DIM}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(PolicyError::Other("sample is not finite".into()));
    }
    let actions = v.chunks(ACTION_DIM).map(decode_action).collect();
    Ok(ActionChunk::new(start_tick, actions))
}

/// Chunks drawn from a trained flow model.
///
/// The phase fed to the network is tracked with the expert's transition
/// rules, which only read the observation.
#[derive(Debug, Clone)]
pub struct FlowPolicy<T: Scalar> {
    pub model: FlowModel<T>,
    pub sample_steps: usize,
    pub seed: u64,
    tracker: Expert<T>,
    phase: Phase,
}

impl<T: Scalar> FlowPolicy<T> {
    pub fn new(model: FlowModel<T>, tracker: Expert<T>, sample_steps: usize, seed: u64) -> Self {
        Self {
            model,
            sample_steps,
            seed,
            tracker,
            phase: Phase::ApproachObject,
        }
    }
}

impl<T: Scalar> ChunkPolicy<T> for FlowPolicy<T> {
    fn infer(&mut self, observation: &ExpertObservation<T>, horizon: usize) -> Result<ActionChunk<T>, PolicyError> {
        if horizon > self.model.horizon {
            return Err(PolicyError::Other(format!(
                "model horizon {} is shorter than the requested {horizon}",
                self.model.horizon
            )));
        }
        if let Ok(p) = self.tracker.advance(observation, self.phase) {
            self.phase = p;
        }
        let c = ConditionVector::from_observation(observation, self.phase);
        let seed = derive_seed(self.seed, &[observation.tick]);
        let v = sample_chunk(&self.model.params, &c.0, self.sample_steps, seed);
        let chunk = chunk_from_vector(&v[..(horizon + 1) * ACTION_DIM], observation.tick)?;
        Ok(chunk.with_phases(vec![self.phase; horizon + 1]))
    }

    fn reset(&mut self) {
        self.phase = Phase::ApproachObject;
    }

    fn name(&self) -> String {
        "flow".into()
    }
}
