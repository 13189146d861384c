use serde::{Deserialize, Serialize};

use crate::expert::Phase;
use crate::scalar::Scalar;
use crate::sim::EndEffectorCommand;

/// Commands for absolute ticks `start_tick ..= start_tick + horizon`, all
/// produced from the observation taken at `start_tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ActionChunk<T> {
    pub start_tick: u64,
    pub horizon: usize,
    pub actions: Vec<EndEffectorCommand<T>>,
    /// Tick at which the chunk became available for execution.
    pub delivery_tick: Option<u64>,
    /// Controller phase associated with each action, when the producer knows it.
    pub phases: Option<Vec<Phase>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChunkError {
    #[error("chunk must hold horizon + 1 actions (horizon {horizon}, got {len})")]
    Length { horizon: usize, len: usize },
    #[error("delivery tick {delivery} precedes start tick {start}")]
    DeliveredEarly { start: u64, delivery: u64 },
    #[error("action {0} is not a valid command")]
    InvalidAction(usize),
    #[error("phase annotations do not match the action count")]
    PhaseLength,
}

impl<T: Scalar> ActionChunk<T> {
    /// Chunk of `actions.len() - 1` horizon.
    pub fn new(start_tick: u64, actions: Vec<EndEffectorCommand<T>>) -> Self {
        assert!(!actions.is_empty(), "a chunk holds at least one action");
        Self {
            start_tick,
            horizon: actions.len() - 1,
            actions,
            delivery_tick: None,
            phases: None,
        }
    }

    pub fn with_phases(mut self, phases: Vec<Phase>) -> Self {
        self.phases = Some(phases);
        self
    }

    pub fn end_tick(&self) -> u64 {
        self.start_tick + self.horizon as u64
    }

    pub fn covers(&self, tick: u64) -> bool {
        tick >= self.start_tick && tick <= self.end_tick()
    }

    pub fn is_delivered_by(&self, tick: u64) -> bool {
        self.delivery_tick.is_some_and(|d| d <= tick)
    }

    /// Action scheduled for absolute tick `tick`.
    pub fn action_at(&self, tick: u64) -> Option<&EndEffectorCommand<T>> {
        if self.covers(tick) {
            self.actions.get((tick - self.start_tick) as usize)
        } else {
            None
        }
    }

    pub fn phase_at_index(&self, index: usize) -> Option<Phase> {
        self.phases.as_ref().and_then(|p| p.get(index).copied())
    }

    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.actions.len() != self.horizon + 1 {
            return Err(ChunkError::Length {
                horizon: self.horizon,
                len: self.actions.len(),
            });
        }
        if let Some(d) = self.delivery_tick {
            if d < self.start_tick {
                return Err(ChunkError::DeliveredEarly {
                    start: self.start_tick,
                    delivery: d,
                });
            }
        }
        if let Some(i) = self.actions.iter().position(|a| !a.is_valid()) {
            return Err(ChunkError::InvalidAction(i));
        }
        if self.phases.as_ref().is_some_and(|p| p.len() != self.actions.len()) {
            return Err(ChunkError::PhaseLength);
        }
        Ok(())
    }
}
