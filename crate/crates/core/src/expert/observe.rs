//! Building controller observations from simulator state.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::scalar::Scalar;
use crate::sim::{ObjectId, ObjectStatus, WorldState};

use super::{estimate_velocity, ExpertObservation, ObservedObject, TargetSpec, VelocityFitWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VelocitySource {
    /// Simulator velocity (plus optional noise).
    Truth,
    /// Least-squares fit over recent observed positions.
    Estimated,
}

impl fmt::Display for VelocitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VelocitySource::Truth => "truth",
            VelocitySource::Estimated => "estimated",
        })
    }
}

impl FromStr for VelocitySource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truth" => Ok(VelocitySource::Truth),
            "estimated" => Ok(VelocitySource::Estimated),
            other => Err(format!("unknown velocity source {other:?}")),
        }
    }
}

/// Noise-free observation of `world`.
pub fn observe_exact<T: Scalar>(
    world: &WorldState<T>,
    instruction: &TargetSpec,
    target_location: Vec3<T>,
) -> ExpertObservation<T> {
    let objects = world
        .objects
        .iter()
        .filter(|o| o.status.is_active())
        .map(|o| ObservedObject {
            id: o.id,
            label: o.label.clone(),
            position: o.pose.position,
            velocity: o.linear_velocity,
            radius: o.radius,
            attached: o.status == ObjectStatus::Attached,
        })
        .collect();
    ExpertObservation {
        tick: world.tick,
        end_effector: world.end_effector.clone(),
        objects,
        instruction: instruction.clone(),
        target_location,
    }
}

/// Per-episode observation channel: optional Gaussian noise on free-object
/// state and optional windowed velocity estimation.
///
/// Call [`Observer::observe`] once per tick so the noise stream and the
/// velocity window advance identically regardless of how often a policy
/// consumes snapshots.
#[derive(Debug, Clone)]
pub struct Observer<T: Scalar> {
    pub position_noise: T,
    pub velocity_noise: T,
    pub source: VelocitySource,
    pub window: usize,
    rng: ChaCha8Rng,
    history: BTreeMap<ObjectId, VelocityFitWindow<T>>,
}

impl<T: Scalar> Observer<T> {
    pub fn new(position_noise: T, velocity_noise: T, source: VelocitySource, window: usize, seed: u64) -> Self {
        Self {
            position_noise,
            velocity_noise,
            source,
            window,
            rng: ChaCha8Rng::seed_from_u64(seed),
            history: BTreeMap::new(),
        }
    }

    /// Ground-truth observer.
    pub fn exact() -> Self {
        Self::new(T::zero(), T::zero(), VelocitySource::Truth, 8, 0)
    }

    fn gaussian_xy(&mut self, sigma: T) -> Vec3<T> {
        if sigma == T::zero() {
            return Vec3::zero();
        }
        let a: f64 = StandardNormal.sample(&mut self.rng);
        let b: f64 = StandardNormal.sample(&mut self.rng);
        Vec3::new(T::lit(a) * sigma, T::lit(b) * sigma, T::zero())
    }

    pub fn observe(
        &mut self,
        world: &WorldState<T>,
        instruction: &TargetSpec,
        target_location: Vec3<T>,
    ) -> ExpertObservation<T> {
        let mut obs = observe_exact(world, instruction, target_location);
        let tick = obs.tick;
        for o in obs.objects.iter_mut().filter(|o| !o.attached) {
            let dp = self.gaussian_xy(self.position_noise);
            let dv = self.gaussian_xy(self.velocity_noise);
            o.position += dp;
            match self.source {
                VelocitySource::Truth => o.velocity += dv,
                VelocitySource::Estimated => {
                    let w = self.history.entry(o.id).or_default();
                    w.push(tick, o.position, self.window);
                    o.velocity = estimate_velocity(w, world.dt).unwrap_or_else(|_| Vec3::zero());
                }
            }
        }
        // forget objects that left the table or were grasped
        self.history
            .retain(|id, _| obs.objects.iter().any(|o| o.id == *id && !o.attached));
        obs
    }
}
