//! Line-delimited episode files: one header line, one line per tick, one footer line.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::Scenario;
use crate::expert::Phase;
use crate::geom::{Pose6D, Vec3};
use crate::scalar::Scalar;
use crate::sim::{EndEffectorCommand, EndEffectorState, EventKind, ObjectId, ObjectState, ObjectStatus, Outcome};
use crate::streaming::{CommandSource, ExecutorMode, GapBehavior, LatencyModel};

use super::DatagenError;

pub const SCHEMA_VERSION: u32 = 1;

/// Executor settings of a streamed episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutorDescriptor {
    pub mode: ExecutorMode,
    pub latency: LatencyModel,
    pub chunk_horizon: usize,
    pub gap_behavior: GapBehavior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpisodeHeader<T> {
    pub schema_version: u32,
    pub seed: u64,
    pub config_digest: String,
    /// Scalar type the episode was simulated in.
    pub scalar: String,
    pub dt: T,
    pub policy: String,
    /// `None` for closed-loop episodes.
    pub executor: Option<ExecutorDescriptor>,
    pub scenario: Scenario<T>,
}

/// Per-tick object state; static properties live in the header scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ObjectRecord<T> {
    pub id: ObjectId,
    pub status: ObjectStatus,
    pub pose: Pose6D<T>,
    pub linear_velocity: Vec3<T>,
}

impl<T: Scalar> From<&ObjectState<T>> for ObjectRecord<T> {
    fn from(o: &ObjectState<T>) -> Self {
        Self {
            id: o.id,
            status: o.status,
            pose: o.pose,
            linear_velocity: o.linear_velocity,
        }
    }
}

/// Action vector layout: position (3), orientation quaternion w,x,y,z (4),
/// gripper (1, positive = close). Models with a 32-wide action space place
/// these in the first eight slots and zero the rest.
pub const ACTION_DIM: usize = 8;

/// State at `tick` and the command applied from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TickRecord<T> {
    pub tick: u64,
    pub objects: Vec<ObjectRecord<T>>,
    pub end_effector: EndEffectorState<T>,
    pub phase: Option<Phase>,
    /// Absent on the terminal tick.
    pub command: Option<EndEffectorCommand<T>>,
    pub source: Option<CommandSource>,
    /// Start tick of the chunk delivered at this tick.
    pub delivered: Option<u64>,
    pub coverage_gap: bool,
    /// Events stamped with this tick.
    pub events: Vec<EventKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpisodeFooter<T> {
    pub outcome: Outcome,
    pub success: bool,
    pub path_length: T,
    pub completion_time: T,
    pub placed: Vec<(ObjectId, bool)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpisodeLog<T> {
    pub header: EpisodeHeader<T>,
    pub ticks: Vec<TickRecord<T>>,
    pub footer: EpisodeFooter<T>,
}

/// Sum of end-effector displacements between consecutive tick records.
pub fn path_length<T: Scalar>(ticks: &[TickRecord<T>]) -> T {
    ticks
        .windows(2)
        .map(|w| w[1].end_effector.position().distance(w[0].end_effector.position()))
        .fold(T::zero(), |a, b| a + b)
}

/// Elapsed time at the last tick record.
pub fn completion_time<T: Scalar>(ticks: &[TickRecord<T>], dt: T) -> T {
    ticks.last().map_or(T::zero(), |t| T::from_u64_lossy(t.tick) * dt)
}

impl<T: Scalar> EpisodeLog<T> {
    pub fn terminal_tick(&self) -> u64 {
        self.ticks.last().map_or(0, |t| t.tick)
    }

    /// Footer metrics as recomputed from the tick records.
    pub fn recompute_metrics(&self) -> (T, T) {
        (path_length(&self.ticks), completion_time(&self.ticks, self.header.dt))
    }

    /// Commands actually applied, in tick order.
    pub fn commands(&self) -> Vec<EndEffectorCommand<T>> {
        self.ticks.iter().filter_map(|t| t.command).collect()
    }

    pub fn hold_count(&self) -> usize {
        self.ticks
            .iter()
            .filter(|t| t.source == Some(CommandSource::Hold))
            .count()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", bound = "T: Scalar")]
enum Line<T> {
    Header(EpisodeHeader<T>),
    Tick(TickRecord<T>),
    Footer(EpisodeFooter<T>),
}

#[derive(Serialize)]
#[serde(rename_all = "lowercase", bound = "T: Scalar")]
enum LineRef<'a, T> {
    Header(&'a EpisodeHeader<T>),
    Tick(&'a TickRecord<T>),
    Footer(&'a EpisodeFooter<T>),
}

fn push_line<T: Scalar>(out: &mut Vec<u8>, line: &LineRef<'_, T>) {
    serde_json::to_writer(&mut *out, line).expect("episode records serialize");
    out.push(b'\n');
}

pub fn write_episode<T: Scalar>(log: &EpisodeLog<T>) -> Vec<u8> {
    let mut out = Vec::new();
    push_line(&mut out, &LineRef::Header(&log.header));
    for t in &log.ticks {
        push_line(&mut out, &LineRef::Tick(t));
    }
    push_line(&mut out, &LineRef::Footer(&log.footer));
    out
}

pub fn read_episode<T: Scalar>(bytes: &[u8]) -> Result<EpisodeLog<T>, DatagenError> {
    let text = std::str::from_utf8(bytes).map_err(|_| DatagenError::CorruptHeader("not UTF-8".into()))?;
    let mut lines = text.split_terminator('\n');
    let first = lines.next().ok_or_else(|| DatagenError::CorruptHeader("empty file".into()))?;

    // Check the version before interpreting anything else.
    let raw: serde_json::Value =
        serde_json::from_str(first).map_err(|e| DatagenError::CorruptHeader(e.to_string()))?;
    let found = raw
        .get("header")
        .and_then(|h| h.get("schema_version"))
        .and_then(|v| v.as_u64())
        .ok_or_else(|| DatagenError::CorruptHeader("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(DatagenError::SchemaMismatch {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    let header = match serde_json::from_str::<Line<T>>(first) {
        Ok(Line::Header(h)) => h,
        Ok(_) => return Err(DatagenError::CorruptHeader("first record is not a header".into())),
        Err(e) => return Err(DatagenError::CorruptHeader(e.to_string())),
    };

    let complete = bytes.last() == Some(&b'\n');
    let all: Vec<&str> = lines.collect();
    let mut ticks = Vec::new();
    let mut footer = None;
    for (i, line) in all.iter().enumerate() {
        let expected = ticks.len() as u64;
        let truncated = i + 1 == all.len() && !complete;
        if footer.is_some() {
            return Err(DatagenError::CorruptRecord { tick: expected });
        }
        match serde_json::from_str::<Line<T>>(line) {
            Ok(_) if truncated => return Err(DatagenError::CorruptRecord { tick: expected }),
            Ok(Line::Tick(t)) if t.tick == expected => ticks.push(t),
            Ok(Line::Footer(f)) => footer = Some(f),
            _ => return Err(DatagenError::CorruptRecord { tick: expected }),
        }
    }
    let footer = footer.ok_or(DatagenError::CorruptRecord {
        tick: ticks.len() as u64,
    })?;
    Ok(EpisodeLog { header, ticks, footer })
}

/// Hex SHA-256 of the serialized episode.
pub fn episode_digest<T: Scalar>(log: &EpisodeLog<T>) -> String {
    hex::encode(Sha256::digest(write_episode(log)))
}
