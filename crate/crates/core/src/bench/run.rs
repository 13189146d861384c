//! The evaluation sweep and its aggregate table.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::EpisodeLog;
use crate::expert::VelocitySource;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, stream};
use crate::sim::Outcome;
use crate::streaming::{run_episode, ChunkPolicy, EpisodeContext, ExecutorConfig, ExecutorMode};

use super::{Dimension, Scenario};

/// Sweep-wide settings for one (mode, latency) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRun {
    pub executor: ExecutorConfig,
    pub trials: usize,
    pub seed: u64,
    pub config_digest: String,
    pub velocity_source: VelocitySource,
    pub window: usize,
    /// Keep every episode log in the output.
    pub keep_logs: bool,
}

impl BenchRun {
    pub fn new(executor: ExecutorConfig, trials: usize, seed: u64) -> Self {
        Self {
            executor,
            trials,
            seed,
            config_digest: String::new(),
            velocity_source: VelocitySource::Truth,
            window: 8,
            keep_logs: false,
        }
    }

    /// Seed of `trial` on scenario `index`; independent of the mode so runs pair up.
    pub fn trial_seed(&self, index: usize, trial: usize) -> u64 {
        derive_seed(self.seed, &[stream::TRIAL, index as u64, trial as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub dimension: Dimension,
    pub scenario: String,
    pub scenario_index: usize,
    pub scenario_seed: u64,
    pub trial: usize,
    pub seed: u64,
    pub mode: ExecutorMode,
    pub latency_ticks: u64,
    pub outcome: Outcome,
    pub success: bool,
    pub path_length: f64,
    pub completion_time: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchEpisode<T> {
    pub record: TrialRecord,
    pub log: Option<EpisodeLog<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dimension: Dimension,
    pub mode: ExecutorMode,
    pub latency_ticks: u64,
    /// Percent.
    pub success_rate: f64,
    pub mean_path_length: f64,
    pub mean_completion_time: f64,
    pub trials: usize,
    /// SHA-256 over the trial seeds, in order.
    pub seed_digest: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    /// Aggregate trial records into one row per (dimension, mode, latency).
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut keys: Vec<(Dimension, ExecutorMode, u64)> = records
            .iter()
            .map(|r| (r.dimension, r.mode, r.latency_ticks))
            .collect();
        keys.sort();
        keys.dedup();
        let rows = keys
            .into_iter()
            .map(|(dimension, mode, latency_ticks)| {
                let group: Vec<&TrialRecord> = records
                    .iter()
                    .filter(|r| r.dimension == dimension && r.mode == mode && r.latency_ticks == latency_ticks)
                    .collect();
                let n = group.len() as f64;
                let successes = group.iter().filter(|r| r.success).count() as f64;
                let mut h = Sha256::new();
                for r in &group {
                    h.update(r.seed.to_le_bytes());
                }
                MetricsRow {
                    dimension,
                    mode,
                    latency_ticks,
                    success_rate: 100.0 * successes / n,
                    mean_path_length: group.iter().map(|r| r.path_length).sum::<f64>() / n,
                    mean_completion_time: group.iter().map(|r| r.completion_time).sum::<f64>() / n,
                    trials: group.len(),
                    seed_digest: hex::encode(h.finalize()),
                }
            })
            .collect();
        Self { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: MetricsTable) {
        self.rows.extend(other.rows);
        self.rows.sort_by_key(|r| (r.dimension, r.mode, r.latency_ticks));
    }

    pub fn row(&self, dimension: Dimension, mode: ExecutorMode, latency_ticks: u64) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.dimension == dimension && r.mode == mode && r.latency_ticks == latency_ticks)
    }
}

/// Everything needed to replay a sweep exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub seed: u64,
    pub config_digest: String,
    pub policy: String,
    pub executor: ExecutorConfig,
    pub trials_per_scenario: usize,
    /// `(name, scenario seed)` in sweep order.
    pub scenarios: Vec<(String, u64)>,
    pub records: Vec<TrialRecord>,
}

fn run_trial<T: Scalar>(
    policy: &mut dyn ChunkPolicy<T>,
    run: &BenchRun,
    scenario: &Scenario<T>,
    index: usize,
    trial: usize,
) -> BenchEpisode<T> {
    let seed = run.trial_seed(index, trial);
    let ctx = EpisodeContext::new(seed)
        .with_digest(run.config_digest.clone())
        .with_velocity(run.velocity_source, run.window);
    let mut record = TrialRecord {
        dimension: scenario.dimension,
        scenario: scenario.name.clone(),
        scenario_index: index,
        scenario_seed: scenario.seed,
        trial,
        seed,
        mode: run.executor.mode,
        latency_ticks: run.executor.latency_ticks,
        outcome: Outcome::Aborted,
        success: false,
        path_length: 0.0,
        completion_time: 0.0,
        error: None,
    };
    match run_episode(scenario, policy, &run.executor, &ctx) {
        Ok(log) => {
            record.outcome = log.footer.outcome;
            record.success = log.footer.success;
            record.path_length = log.footer.path_length.as_f64();
            record.completion_time = log.footer.completion_time.as_f64();
            record.error = log.footer.error.clone();
            BenchEpisode {
                record,
                log: run.keep_logs.then_some(log),
            }
        }
        // a broken scenario counts as a failed trial
        Err(e) => {
            record.error = Some(e.to_string());
            BenchEpisode { record, log: None }
        }
    }
}

/// Run every scenario `run.trials` times under one executor setting.
///
/// Trials run in parallel, one policy instance per worker; results come back
/// in (scenario, trial) order regardless of scheduling.
pub fn run_benchmark<T, F>(make_policy: F, run: &BenchRun, scenarios: &[Scenario<T>]) -> (MetricsTable, Vec<BenchEpisode<T>>)
where
    T: Scalar,
    F: Fn() -> Box<dyn ChunkPolicy<T>> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|i| (0..run.trials).map(move |t| (i, t)))
        .collect();
    if jobs.is_empty() {
        return (MetricsTable::default(), Vec::new());
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    let make_policy = &make_policy;
    let jobs = &jobs;
    let mut results: Vec<(usize, BenchEpisode<T>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    let mut policy = make_policy();
                    (w..jobs.len())
                        .step_by(workers)
                        .map(|j| {
                            let (i, t) = jobs[j];
                            (j, run_trial(policy.as_mut(), run, &scenarios[i], i, t))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("benchmark worker panicked"))
            .collect()
    });
    results.sort_by_key(|(j, _)| *j);
    let episodes: Vec<BenchEpisode<T>> = results.into_iter().map(|(_, e)| e).collect();
    let records: Vec<TrialRecord> = episodes.iter().map(|e| e.record.clone()).collect();
    (MetricsTable::from_records(&records), episodes)
}
