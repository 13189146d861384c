//! Symbolic instruction grounding.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::sim::ObjectId;

use super::{ExpertError, ExpertObservation, ObservedObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Largest lateral (+y) coordinate.
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeedRank {
    Faster,
    Slower,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selector {
    ByLabel(String),
    ByRelativePosition(Side),
    ByRelativeSpeed(SpeedRank),
    /// Every object on the table, collected in id order.
    GatherAll,
}

impl Selector {
    /// Stable index used for one-hot encodings.
    pub fn index(&self) -> usize {
        match self {
            Selector::ByLabel(_) => 0,
            Selector::ByRelativePosition(Side::Left) => 1,
            Selector::ByRelativePosition(Side::Right) => 2,
            Selector::ByRelativeSpeed(SpeedRank::Faster) => 3,
            Selector::ByRelativeSpeed(SpeedRank::Slower) => 4,
            Selector::GatherAll => 5,
        }
    }

    pub const COUNT: usize = 6;

    /// Relative selectors compare candidates and need at least two.
    pub fn is_relative(&self) -> bool {
        matches!(self, Selector::ByRelativePosition(_) | Selector::ByRelativeSpeed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub selector: Selector,
    pub container_id: String,
}

impl TargetSpec {
    pub fn new(selector: Selector) -> Self {
        Self {
            selector,
            container_id: "bin".to_string(),
        }
    }
}

/// Pick the object the instruction refers to among free candidates.
///
/// Ties are broken by lowest id.
pub fn resolve_target<T: Scalar>(observation: &ExpertObservation<T>) -> Result<ObjectId, ExpertError> {
    let candidates: Vec<&ObservedObject<T>> = observation.objects.iter().filter(|o| !o.attached).collect();
    resolve_among(&observation.instruction.selector, &candidates)
}

pub(crate) fn resolve_among<T: Scalar>(
    selector: &Selector,
    candidates: &[&ObservedObject<T>],
) -> Result<ObjectId, ExpertError> {
    if candidates.is_empty() {
        return Err(ExpertError::NoCandidates);
    }
    // extreme by key, lowest id on ties
    let pick = |key: &dyn Fn(&ObservedObject<T>) -> T, want_max: bool| -> ObjectId {
        let mut best = candidates[0];
        for &c in &candidates[1..] {
            let ord = key(c).partial_cmp(&key(best)).unwrap_or(Ordering::Equal);
            let better = if want_max {
                ord == Ordering::Greater
            } else {
                ord == Ordering::Less
            };
            if better || (ord == Ordering::Equal && c.id < best.id) {
                best = c;
            }
        }
        best.id
    };
    match selector {
        Selector::ByLabel(label) => {
            let mut matches = candidates.iter().filter(|o| &o.label == label);
            let first = matches.next().ok_or(ExpertError::NoCandidates)?;
            if matches.next().is_some() {
                return Err(ExpertError::AmbiguousTarget(label.clone()));
            }
            Ok(first.id)
        }
        Selector::ByRelativePosition(side) => Ok(pick(&|o| o.position.y, *side == Side::Left)),
        Selector::ByRelativeSpeed(rank) => Ok(pick(&|o| o.velocity.norm(), *rank == SpeedRank::Faster)),
        Selector::GatherAll => Ok(candidates.iter().map(|o| o.id).min().expect("non-empty")),
    }
}
