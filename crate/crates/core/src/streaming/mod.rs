//! Chunked action execution under inference latency.
//!
//! Four executor modes share one tick loop. Serialized modes wait for each
//! chunk to be used up before inferring again; continuous modes start the next
//! inference as soon as the previous one delivers. The latency-aware modes skip
//! actions whose tick has already passed and prefer the newest chunk.

mod chunk;
mod episode;
mod executor;
mod latency;
mod policy;
mod wallclock;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ConfigSection, KvConfig};
use crate::expert::ExpertError;

pub use chunk::{ActionChunk, ChunkError};
pub use episode::{run_closed_loop, run_episode, EpisodeContext, EpisodeError};
pub use executor::{select_action, CommandSource, Cursor, ExecutorState, InFlight, TickOutput};
pub use latency::{LatencyModel, LatencySampler};
pub use policy::{ChunkPolicy, OraclePolicy};
pub use wallclock::{run_wall_clock, WallClockOptions, WallClockRun, WallClockTick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExecutorMode {
    /// Wait for the chunk to run out, infer, execute from its first action.
    SerializedNaive,
    /// Serialized, but skip the actions whose tick passed during inference.
    SerializedLaas,
    /// Infer back to back; each delivered chunk runs from its first action.
    ContinuousOnly,
    /// Infer back to back; execute the newest chunk's action for the current tick.
    ContinuousLaas,
}

impl ExecutorMode {
    pub const ALL: [ExecutorMode; 4] = [
        ExecutorMode::SerializedNaive,
        ExecutorMode::SerializedLaas,
        ExecutorMode::ContinuousOnly,
        ExecutorMode::ContinuousLaas,
    ];

    pub fn is_continuous(self) -> bool {
        matches!(self, ExecutorMode::ContinuousOnly | ExecutorMode::ContinuousLaas)
    }

    pub fn is_latency_aware(self) -> bool {
        matches!(self, ExecutorMode::SerializedLaas | ExecutorMode::ContinuousLaas)
    }

    pub fn name(self) -> &'static str {
        match self {
            ExecutorMode::SerializedNaive => "serial",
            ExecutorMode::SerializedLaas => "serial-laas",
            ExecutorMode::ContinuousOnly => "ci",
            ExecutorMode::ContinuousLaas => "ci-laas",
        }
    }

    /// Short row label used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            ExecutorMode::SerializedNaive => "[1] neither",
            ExecutorMode::SerializedLaas => "[2] LAAS",
            ExecutorMode::ContinuousOnly => "[3] CI",
            ExecutorMode::ContinuousLaas => "[7] CI+LAAS",
        }
    }
}

impl fmt::Display for ExecutorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExecutorMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExecutorMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ExecutorMode::ALL.iter().map(|m| m.name()).collect();
                format!("unknown mode {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// What to command on ticks that no chunk covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GapBehavior {
    /// Keep the current pose.
    #[default]
    Hold,
    /// Re-issue the last executed command.
    RepeatLast,
}

impl fmt::Display for GapBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapBehavior::Hold => "hold",
            GapBehavior::RepeatLast => "repeat-last",
        })
    }
}

impl FromStr for GapBehavior {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hold" => Ok(GapBehavior::Hold),
            "repeat-last" => Ok(GapBehavior::RepeatLast),
            other => Err(format!("unknown gap behavior {other:?}")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error("malformed chunk: {0}")]
    Chunk(#[from] ChunkError),
    #[error("chunk starts at tick {got}, expected {expected}")]
    Misaligned { expected: u64, got: u64 },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    pub mode: ExecutorMode,
    pub latency_ticks: u64,
    /// Half-width of a uniform per-cycle latency draw; 0 means constant latency.
    pub latency_jitter: u64,
    pub chunk_horizon: usize,
    pub gap_behavior: GapBehavior,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            mode: ExecutorMode::ContinuousLaas,
            latency_ticks: 6,
            latency_jitter: 0,
            chunk_horizon: 20,
            gap_behavior: GapBehavior::Hold,
        }
    }
}

impl ExecutorConfig {
    pub fn new(mode: ExecutorMode, latency_ticks: u64) -> Self {
        Self {
            mode,
            latency_ticks,
            ..Self::default()
        }
    }

    /// Latency model for one episode; `seed` only matters with jitter.
    pub fn latency_model(&self, seed: u64) -> LatencyModel {
        if self.latency_jitter == 0 {
            LatencyModel::Constant(self.latency_ticks)
        } else {
            LatencyModel::UniformRandom {
                lo: self.latency_ticks.saturating_sub(self.latency_jitter),
                hi: self.latency_ticks + self.latency_jitter,
                seed,
            }
        }
    }

    pub fn executor<T: crate::scalar::Scalar>(&self, seed: u64) -> ExecutorState<T> {
        ExecutorState::new(self.mode, self.latency_model(seed), self.chunk_horizon, self.gap_behavior)
    }
}

impl ConfigSection for ExecutorConfig {
    const KEYS: &'static [&'static str] = &[
        "executor.mode",
        "executor.latency_ticks",
        "executor.latency_jitter",
        "executor.chunk_horizon",
        "executor.gap_behavior",
    ];

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        kv.read("executor.mode", &mut self.mode)?;
        kv.read("executor.latency_ticks", &mut self.latency_ticks)?;
        kv.read("executor.latency_jitter", &mut self.latency_jitter)?;
        kv.read("executor.chunk_horizon", &mut self.chunk_horizon)?;
        kv.read("executor.gap_behavior", &mut self.gap_behavior)?;
        Ok(())
    }

    fn export(&self, kv: &mut KvConfig) {
        kv.set("executor.mode", self.mode);
        kv.set("executor.latency_ticks", self.latency_ticks);
        kv.set("executor.latency_jitter", self.latency_jitter);
        kv.set("executor.chunk_horizon", self.chunk_horizon);
        kv.set("executor.gap_behavior", self.gap_behavior);
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.chunk_horizon == 0 {
            return Err(ConfigError::Invalid("executor.chunk_horizon must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
