//! Expert demonstration collection and the episode file format.

mod log;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::Scenario;
use crate::config::Config;
use crate::expert::Expert;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, stream};
use crate::sim::SimError;
use crate::streaming::{run_closed_loop, EpisodeContext, EpisodeError};

pub use log::{
    completion_time, episode_digest, path_length, read_episode, write_episode, EpisodeFooter, EpisodeHeader,
    EpisodeLog, ExecutorDescriptor, ObjectRecord, TickRecord, ACTION_DIM, SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u64, expected: u32 },
    #[error("corrupt or incomplete record at tick {tick}")]
    CorruptRecord { tick: u64 },
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

/// Fixed-width histogram over `[lo, lo + width * bins)`; the last bin absorbs overflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(lo: f64, width: f64, bins: usize) -> Self {
        Self {
            lo,
            width,
            counts: vec![0; bins.max(1)],
        }
    }

    pub fn add(&mut self, x: f64) {
        let last = self.counts.len() - 1;
        let i = ((x - self.lo) / self.width).floor();
        let i = if i < 0.0 { 0 } else { (i as usize).min(last) };
        self.counts[i] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub seed: u64,
    pub config_digest: String,
    /// Episode files written.
    pub episodes: usize,
    pub successes: usize,
    pub success_fraction: f64,
    /// Indices of written episodes that did not succeed.
    pub failed: Vec<usize>,
    /// Indices whose scene could not be spawned; no file is written for them.
    pub infeasible: Vec<usize>,
    pub speed_histogram: Histogram,
    pub friction_histogram: Histogram,
    pub per_dimension: BTreeMap<String, usize>,
}

pub fn episode_file_name(index: usize) -> String {
    format!("episode_{index:06}.jsonl")
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Seed of episode `index` under `master`.
pub fn episode_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[stream::EPISODE, index as u64])
}

/// Scenario and log for episode `index`; depends only on `(config, master, index)`.
pub fn collect_one<T: Scalar>(
    config: &Config<T>,
    master: u64,
    index: usize,
) -> Result<Result<EpisodeLog<T>, SimError>, DatagenError> {
    let seed = episode_seed(master, index);
    let scenario = match Scenario::from_spawn(&config.scene, derive_seed(seed, &[stream::SPAWN])) {
        Ok(s) => s,
        Err(e @ SimError::InfeasiblePlacement { .. }) => return Ok(Err(e)),
        Err(e) => return Err(DatagenError::Episode(e.into())),
    };
    let expert = Expert::new(config.expert.clone(), config.scene.clone());
    let ctx = EpisodeContext::new(seed)
        .with_digest(config.digest())
        .with_velocity(config.expert.velocity_source, config.expert.window);
    Ok(Ok(run_closed_loop(&scenario, &expert, &ctx)?))
}

/// Roll out `episodes` closed-loop expert episodes into `out_dir`.
pub fn collect<T: Scalar>(
    config: &Config<T>,
    episodes: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetSummary, DatagenError> {
    if episodes == 0 {
        return Err(DatagenError::InvalidRequest("at least one episode is required".into()));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(episodes);
    let results: Vec<Result<Result<EpisodeLog<T>, SimError>, DatagenError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w..episodes)
                        .step_by(workers)
                        .map(|i| (i, collect_one(config, seed, i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<_> = handles
            .into_iter()
            .flat_map(|h| h.join().expect("collection worker panicked"))
            .collect();
        all.sort_by_key(|(i, _)| *i);
        all.into_iter().map(|(_, r)| r).collect()
    });

    let speed_max = config.scene.speed_max.as_f64().max(1e-9);
    let friction_max = config.scene.friction_max.as_f64().max(1e-9);
    let mut summary = DatasetSummary {
        seed,
        config_digest: config.digest(),
        episodes: 0,
        successes: 0,
        success_fraction: 0.0,
        failed: Vec::new(),
        infeasible: Vec::new(),
        speed_histogram: Histogram::new(0.0, speed_max / 10.0, 10),
        friction_histogram: Histogram::new(0.0, friction_max / 10.0, 10),
        per_dimension: BTreeMap::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        let log = match r? {
            Ok(log) => log,
            Err(_) => {
                summary.infeasible.push(i);
                continue;
            }
        };
        let path = out_dir.join(episode_file_name(i));
        fs::write(&path, write_episode(&log)).map_err(io_err(&path))?;
        summary.episodes += 1;
        if log.footer.success {
            summary.successes += 1;
        } else {
            summary.failed.push(i);
        }
        for o in &log.header.scenario.objects {
            summary.speed_histogram.add(o.speed().as_f64());
            summary.friction_histogram.add(o.friction.as_f64());
        }
        *summary
            .per_dimension
            .entry(log.header.scenario.dimension.to_string())
            .or_default() += 1;
    }
    if summary.episodes > 0 {
        summary.success_fraction = summary.successes as f64 / summary.episodes as f64;
    }
    let path = out_dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(summary)
}

/// Every episode file in `dir`, in file-name order.
pub fn episode_files(dir: &Path) -> Result<Vec<PathBuf>, DatagenError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_episode_file<T: Scalar>(path: &Path) -> Result<EpisodeLog<T>, DatagenError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    read_episode(&bytes)
}

/// Load every episode in `dir`, optionally keeping only successes.
pub fn load_dataset<T: Scalar>(dir: &Path, successes_only: bool) -> Result<Vec<EpisodeLog<T>>, DatagenError> {
    let mut out = Vec::new();
    for path in episode_files(dir)? {
        let log = read_episode_file::<T>(&path)?;
        if !successes_only || log.footer.success {
            out.push(log);
        }
    }
    Ok(out)
}
