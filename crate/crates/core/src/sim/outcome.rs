use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::types::{EventKind, ObjectId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    InProgress,
    Success,
    Drop,
    Timeout,
    Aborted,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::InProgress
    }
}

/// Classify the episode so far.
///
/// Precedence is Aborted > Drop > Success > Timeout. Success requires every
/// instructed object to be placed; partial gathers are not successes.
pub fn evaluate<T: Scalar>(world: &WorldState<T>, instructed: &[ObjectId], timeout_ticks: u64) -> Outcome {
    let mut aborted = false;
    let mut dropped = false;
    let mut placed: Vec<ObjectId> = Vec::new();
    for e in &world.events {
        match e.kind {
            EventKind::WorkspaceViolation | EventKind::PolicyFailure => aborted = true,
            EventKind::Dropped(id) if instructed.contains(&id) => dropped = true,
            EventKind::Placed(id) if instructed.contains(&id) && !placed.contains(&id) => placed.push(id),
            _ => {}
        }
    }
    if aborted {
        Outcome::Aborted
    } else if dropped {
        Outcome::Drop
    } else if !instructed.is_empty() && placed.len() == instructed.len() {
        Outcome::Success
    } else if world.tick >= timeout_ticks {
        Outcome::Timeout
    } else {
        Outcome::InProgress
    }
}

/// Number of instructed objects placed so far (diagnostic, not success).
pub fn placed_count<T: Scalar>(world: &WorldState<T>, instructed: &[ObjectId]) -> usize {
    instructed
        .iter()
        .filter(|id| world.events.iter().any(|e| e.kind == EventKind::Placed(**id)))
        .count()
}
