//! The tick-level execution state machine.

use serde::{Deserialize, Serialize};

use crate::expert::Phase;
use crate::scalar::Scalar;
use crate::sim::EndEffectorCommand;

use super::{ActionChunk, ExecutorMode, GapBehavior, LatencyModel, LatencySampler, PolicyError};

/// Where the command executed at a tick came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommandSource {
    Chunk { start_tick: u64, index: usize },
    Hold,
    ClosedLoop,
}

impl CommandSource {
    pub fn is_hold(self) -> bool {
        self == CommandSource::Hold
    }
}

/// The newest delivered chunk covering `tick`, with its action for that tick.
///
/// A chunk qualifies when `delivery_tick <= tick` and
/// `start_tick <= tick <= start_tick + horizon`; among qualifying chunks the
/// greatest `start_tick` wins. `None` means nothing covers the tick.
pub fn select_action<T: Scalar>(buffer: &[ActionChunk<T>], tick: u64) -> Option<(&ActionChunk<T>, &EndEffectorCommand<T>)> {
    buffer
        .iter()
        .filter(|c| c.is_delivered_by(tick) && c.covers(tick))
        .max_by_key(|c| c.start_tick)
        .and_then(|c| c.action_at(tick).map(|a| (c, a)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InFlight<T> {
    pub start_tick: u64,
    pub completes_at: u64,
    chunk: ActionChunk<T>,
}

/// Sequential read position used by every mode except CI+LAAS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cursor {
    pub start_tick: u64,
    pub index: usize,
}

/// What the executor decided at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput<T> {
    pub command: EndEffectorCommand<T>,
    pub source: CommandSource,
    pub phase: Option<Phase>,
    /// Observation tick of an inference started at this tick.
    pub started: Option<u64>,
    /// Start tick of a chunk delivered at this tick.
    pub delivered: Option<u64>,
    /// Continuous mode ran out of coverage after the first delivery.
    pub coverage_gap: bool,
}

#[derive(Debug, Clone)]
pub struct ExecutorState<T> {
    pub mode: ExecutorMode,
    pub horizon: usize,
    pub gap: GapBehavior,
    /// Delivered chunks, strictly increasing `start_tick`.
    pub buffer: Vec<ActionChunk<T>>,
    pub in_flight: Option<InFlight<T>>,
    pub cursor: Option<Cursor>,
    latency: LatencySampler,
    last_command: Option<EndEffectorCommand<T>>,
    last_tick: Option<u64>,
    delivered_any: bool,
}

impl<T: Scalar> ExecutorState<T> {
    pub fn new(mode: ExecutorMode, latency: LatencyModel, horizon: usize, gap: GapBehavior) -> Self {
        Self {
            mode,
            horizon,
            gap,
            buffer: Vec::new(),
            in_flight: None,
            cursor: None,
            latency: latency.sampler(),
            last_command: None,
            last_tick: None,
            delivered_any: false,
        }
    }

    pub fn latency_model(&self) -> LatencyModel {
        self.latency.model()
    }

    fn chunk(&self, start_tick: u64) -> Option<&ActionChunk<T>> {
        self.buffer.iter().find(|c| c.start_tick == start_tick)
    }

    fn cursor_exhausted(&self) -> bool {
        match self.cursor {
            None => true,
            Some(c) => self.chunk(c.start_tick).is_none_or(|ch| c.index > ch.horizon),
        }
    }

    fn deliver_due(&mut self, tick: u64) -> Option<u64> {
        if self.in_flight.as_ref().is_none_or(|f| f.completes_at != tick) {
            return None;
        }
        let InFlight { start_tick, chunk, .. } = self.in_flight.take().expect("checked above");
        let mut chunk = chunk;
        chunk.delivery_tick = Some(tick);
        debug_assert!(self.buffer.last().is_none_or(|c| c.start_tick < start_tick));
        self.buffer.push(chunk);
        self.delivered_any = true;
        self.cursor = match self.mode {
            ExecutorMode::SerializedNaive | ExecutorMode::ContinuousOnly => Some(Cursor { start_tick, index: 0 }),
            ExecutorMode::SerializedLaas => Some(Cursor {
                start_tick,
                index: (tick - start_tick) as usize,
            }),
            ExecutorMode::ContinuousLaas => None,
        };
        Some(start_tick)
    }

    fn should_start(&self) -> bool {
        if self.in_flight.is_some() {
            return false;
        }
        if self.mode.is_continuous() {
            true
        } else {
            self.cursor_exhausted()
        }
    }

    fn gap_command(&self) -> EndEffectorCommand<T> {
        match (self.gap, self.last_command) {
            (GapBehavior::RepeatLast, Some(c)) => c,
            _ => EndEffectorCommand::hold(),
        }
    }

    fn prune(&mut self, tick: u64) {
        let keep = self.cursor.map(|c| c.start_tick);
        self.buffer
            .retain(|c| c.end_tick() > tick || Some(c.start_tick) == keep);
    }

    /// Advance the executor by one tick.
    ///
    /// `observe` is invoked only when an inference starts at this tick, and its
    /// snapshot is the only input handed to `infer`. The chunk returned by
    /// `infer` becomes executable at `tick + m` for a fresh latency draw `m`.
    pub fn tick<O>(
        &mut self,
        tick: u64,
        observe: impl FnOnce() -> O,
        infer: impl FnOnce(O, u64, usize) -> Result<ActionChunk<T>, PolicyError>,
    ) -> Result<TickOutput<T>, PolicyError> {
        if let Some(prev) = self.last_tick {
            assert_eq!(tick, prev + 1, "executor ticks must advance by one");
        }
        self.last_tick = Some(tick);

        let mut delivered = self.deliver_due(tick);
        let mut started = None;
        if self.should_start() {
            let chunk = infer(observe(), tick, self.horizon)?;
            chunk.validate()?;
            if chunk.start_tick != tick {
                return Err(PolicyError::Misaligned {
                    expected: tick,
                    got: chunk.start_tick,
                });
            }
            let m = self.latency.draw();
            self.in_flight = Some(InFlight {
                start_tick: tick,
                completes_at: tick + m,
                chunk,
            });
            started = Some(tick);
            if m == 0 {
                delivered = self.deliver_due(tick);
            }
        }
        debug_assert!(self.in_flight.as_ref().is_none_or(|f| f.completes_at > tick));

        let picked = match self.mode {
            ExecutorMode::ContinuousLaas => select_action(&self.buffer, tick).map(|(c, a)| {
                let index = (tick - c.start_tick) as usize;
                (*a, c.start_tick, index, c.phase_at_index(index))
            }),
            _ => match self.cursor {
                Some(cur) if !self.cursor_exhausted() => {
                    let c = self.chunk(cur.start_tick).expect("cursor chunk retained");
                    let out = (c.actions[cur.index], cur.start_tick, cur.index, c.phase_at_index(cur.index));
                    self.cursor = Some(Cursor {
                        index: cur.index + 1,
                        ..cur
                    });
                    Some(out)
                }
                _ => None,
            },
        };

        let out = match picked {
            Some((command, start_tick, index, phase)) => {
                self.last_command = Some(command);
                TickOutput {
                    command,
                    source: CommandSource::Chunk { start_tick, index },
                    phase,
                    started,
                    delivered,
                    coverage_gap: false,
                }
            }
            None => TickOutput {
                command: self.gap_command(),
                source: CommandSource::Hold,
                phase: None,
                started,
                delivered,
                coverage_gap: self.mode.is_continuous() && self.delivered_any,
            },
        };
        self.prune(tick);
        Ok(out)
    }
}
