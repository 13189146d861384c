//! Velocity from a short window of timestamped positions.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::scalar::Scalar;

use super::ExpertError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VelocityFitWindow<T> {
    /// `(tick, position)` with strictly increasing ticks.
    pub samples: Vec<(u64, Vec3<T>)>,
}

impl<T: Scalar> VelocityFitWindow<T> {
    pub fn new(samples: Vec<(u64, Vec3<T>)>) -> Self {
        Self { samples }
    }

    /// Append a sample, keeping at most `capacity` of the most recent ones.
    pub fn push(&mut self, tick: u64, position: Vec3<T>, capacity: usize) {
        debug_assert!(self.samples.last().is_none_or(|&(t, _)| t < tick));
        self.samples.push((tick, position));
        if self.samples.len() > capacity {
            let excess = self.samples.len() - capacity;
            self.samples.drain(..excess);
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Per-axis ordinary least-squares slope of position against time
/// (`tick * dt`). Exact for noiseless linear motion.
pub fn estimate_velocity<T: Scalar>(window: &VelocityFitWindow<T>, dt: T) -> Result<Vec3<T>, ExpertError> {
    let n = window.samples.len();
    if n < 2 {
        return Err(ExpertError::DegenerateWindow(n));
    }
    if window.samples.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(ExpertError::DegenerateWindow(n));
    }
    let nf = T::from_usize_lossy(n);
    // Center on the first tick so large absolute ticks do not cost precision.
    let t0 = window.samples[0].0;
    let times: Vec<T> = window
        .samples
        .iter()
        .map(|&(t, _)| T::from_u64_lossy(t - t0) * dt)
        .collect();
    let t_mean = times.iter().copied().sum::<T>() / nf;
    // Positions are taken relative to the first sample, which leaves the slope
    // unchanged and makes a constant window evaluate to exactly zero.
    let p0 = window.samples[0].1;
    let mut sxx = T::zero();
    let mut sxy = Vec3::zero();
    for (&t, &(_, p)) in times.iter().zip(&window.samples) {
        let dtc = t - t_mean;
        sxx += dtc * dtc;
        sxy += (p - p0) * dtc;
    }
    Ok(sxy.scale(T::one() / sxx))
}
