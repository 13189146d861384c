//! Deterministic dynamic-manipulation simulator with a latency-aware
//! action-streaming runtime.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod bench;
pub mod config;
pub mod datagen;
pub mod expert;
pub mod flow;
pub mod geom;
pub mod scalar;
pub mod seed;
pub mod sim;
pub mod streaming;

pub use scalar::Scalar;

pub type Real = f64;
pub type Vector = geom::Vec3<Real>;
pub type World = sim::WorldState<Real>;
pub type SceneSettings = sim::SceneConfig<Real>;
pub type Command = sim::EndEffectorCommand<Real>;
pub type Chunk = streaming::ActionChunk<Real>;
pub type Episode = datagen::EpisodeLog<Real>;
pub type BenchScenario = bench::Scenario<Real>;
pub type Settings = config::Config<Real>;
pub type Oracle = streaming::OraclePolicy<Real>;
