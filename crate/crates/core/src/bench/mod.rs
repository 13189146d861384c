//! Benchmark scenarios, the evaluation sweep and report rendering.

mod report;
mod run;
mod scenario;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ConfigSection, KvConfig};
use crate::scalar::Scalar;

pub use report::{parse_csv, render_report, ReportFormat};
pub use run::{run_benchmark, BenchEpisode, BenchRun, MetricsRow, MetricsTable, SweepManifest, TrialRecord};
pub use scenario::{
    generate_scenarios, Dimension, Disturbance, HeldOut, Scenario, ScenarioError, VG_LABELS, VU_LABELS,
};

/// Comma-separated list of values, e.g. `0.1,0.2,0.3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Grid<T>(pub Vec<T>);

impl<T: Scalar> fmt::Display for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl<T: Scalar> FromStr for Grid<T> {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|_| format!("bad grid entry {p:?}")))
            .collect::<Result<Vec<T>, _>>()
            .map(Grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BenchConfig<T> {
    pub trials: usize,
    pub scenarios_per_dim: usize,
    pub cr_speeds: Grid<T>,
    /// Speed range for movers outside CR and MG.
    pub base_speed_min: T,
    pub base_speed_max: T,
    /// Ranges the training data was collected under.
    pub train_speed_min: T,
    pub train_speed_max: T,
    pub train_friction_min: T,
    pub train_friction_max: T,
    /// Window for direction changes and pushes.
    pub da_tick_min: u64,
    pub da_tick_max: u64,
    pub ls_objects: usize,
    pub ls_spawn_interval: u64,
    pub vu_distractors: usize,
    pub sr_min_separation: T,
    pub mp_min_speed_gap: T,
    pub vg_radius_min: T,
    pub vg_radius_max: T,
    pub mg_speed_min: T,
    pub mg_speed_max: T,
    pub mg_friction_min: T,
    pub mg_friction_max: T,
    pub mg_turn_rate_min: T,
    pub mg_turn_rate_max: T,
    pub dr_impulses: usize,
    /// Impulse magnitude, m/s.
    pub dr_impulse: T,
    pub dr_noise: T,
}

impl<T: Scalar> Default for BenchConfig<T> {
    fn default() -> Self {
        Self {
            trials: 20,
            scenarios_per_dim: 10,
            cr_speeds: Grid([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7].map(T::lit).to_vec()),
            base_speed_min: T::lit(0.1),
            base_speed_max: T::lit(0.5),
            train_speed_min: T::zero(),
            train_speed_max: T::lit(0.75),
            train_friction_min: T::zero(),
            train_friction_max: T::lit(0.02),
            da_tick_min: 10,
            da_tick_max: 40,
            ls_objects: 3,
            ls_spawn_interval: 50,
            vu_distractors: 2,
            sr_min_separation: T::lit(0.15),
            mp_min_speed_gap: T::lit(0.15),
            vg_radius_min: T::lit(0.035),
            vg_radius_max: T::lit(0.045),
            mg_speed_min: T::lit(0.8),
            mg_speed_max: T::lit(1.0),
            mg_friction_min: T::lit(0.08),
            mg_friction_max: T::lit(0.15),
            mg_turn_rate_min: T::lit(0.3),
            mg_turn_rate_max: T::lit(0.8),
            dr_impulses: 2,
            dr_impulse: T::lit(0.3),
            dr_noise: T::lit(0.005),
        }
    }
}

macro_rules! bench_keys {
    ($($field:ident),* $(,)?) => {
        const BENCH_KEYS: &[&str] = &[$(concat!("bench.", stringify!($field))),*];

        impl<T: Scalar> BenchConfig<T> {
            fn apply_keys(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
                $(kv.read(concat!("bench.", stringify!($field)), &mut self.$field)?;)*
                Ok(())
            }

            fn export_keys(&self, kv: &mut KvConfig) {
                $(kv.set(concat!("bench.", stringify!($field)), &self.$field);)*
            }
        }
    };
}

bench_keys!(
    trials,
    scenarios_per_dim,
    cr_speeds,
    base_speed_min,
    base_speed_max,
    train_speed_min,
    train_speed_max,
    train_friction_min,
    train_friction_max,
    da_tick_min,
    da_tick_max,
    ls_objects,
    ls_spawn_interval,
    vu_distractors,
    sr_min_separation,
    mp_min_speed_gap,
    vg_radius_min,
    vg_radius_max,
    mg_speed_min,
    mg_speed_max,
    mg_friction_min,
    mg_friction_max,
    mg_turn_rate_min,
    mg_turn_rate_max,
    dr_impulses,
    dr_impulse,
    dr_noise,
);

impl<T: Scalar> ConfigSection for BenchConfig<T> {
    const KEYS: &'static [&'static str] = BENCH_KEYS;

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        self.apply_keys(kv)
    }

    fn export(&self, kv: &mut KvConfig) {
        self.export_keys(kv)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let ranges = [
            ("base_speed", self.base_speed_min, self.base_speed_max),
            ("train_speed", self.train_speed_min, self.train_speed_max),
            ("train_friction", self.train_friction_min, self.train_friction_max),
            ("vg_radius", self.vg_radius_min, self.vg_radius_max),
            ("mg_speed", self.mg_speed_min, self.mg_speed_max),
            ("mg_friction", self.mg_friction_min, self.mg_friction_max),
            ("mg_turn_rate", self.mg_turn_rate_min, self.mg_turn_rate_max),
        ];
        for (name, lo, hi) in ranges {
            if !(lo <= hi) || lo < T::zero() {
                return Err(ConfigError::Invalid(format!("bench.{name}_min/max must satisfy 0 <= min <= max")));
            }
        }
        if self.da_tick_min > self.da_tick_max {
            return Err(ConfigError::Invalid("bench.da_tick_min must not exceed bench.da_tick_max".into()));
        }
        if self.base_speed_max - self.base_speed_min < self.mp_min_speed_gap {
            return Err(ConfigError::Invalid("bench.mp_min_speed_gap exceeds the base speed range".into()));
        }
        let outside_speed = self.mg_speed_min > self.train_speed_max;
        let outside_friction =
            self.mg_friction_min > self.train_friction_max || self.mg_friction_max < self.train_friction_min;
        if !outside_speed && !outside_friction && self.mg_turn_rate_min <= T::zero() {
            return Err(ConfigError::Invalid(
                "MG ranges must leave the training ranges in at least one parameter".into(),
            ));
        }
        if self.cr_speeds.0.is_empty() || self.cr_speeds.0.iter().any(|&s| !(s >= T::zero())) {
            return Err(ConfigError::Invalid("bench.cr_speeds must be non-empty and non-negative".into()));
        }
        if self.ls_objects < 2 {
            return Err(ConfigError::Invalid("bench.ls_objects must be >= 2".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
