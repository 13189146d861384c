//! Real-time variant of the continuous latency-aware executor.
//!
//! The policy runs on its own thread. The tick loop never waits for it: each
//! tick polls for a finished chunk, starts a new inference if none is running,
//! executes the newest covering action and sleeps until the next tick.

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use crate::bench::Scenario;
use crate::expert::{ExpertObservation, Observer};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, stream};
use crate::sim::{EndEffectorCommand, Outcome};

use super::episode::EpisodeContext;
use super::{select_action, ActionChunk, ChunkPolicy, CommandSource, PolicyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WallClockOptions {
    pub tick_period: Duration,
    /// Minimum wall time of one inference; the worker sleeps out the rest.
    pub inference_delay: Duration,
    pub chunk_horizon: usize,
    pub max_ticks: u64,
}

impl WallClockOptions {
    /// Tick delay the deterministic executor should use to replay this run.
    pub fn equivalent_latency_ticks(&self) -> u64 {
        let p = self.tick_period.as_nanos();
        self.inference_delay.as_nanos().div_ceil(p) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallClockTick<T> {
    pub tick: u64,
    pub command: EndEffectorCommand<T>,
    pub source: CommandSource,
    pub started: Option<u64>,
    pub delivered: Option<u64>,
}

#[derive(Debug)]
pub struct WallClockRun<T, P> {
    pub ticks: Vec<WallClockTick<T>>,
    pub outcome: Outcome,
    pub error: Option<PolicyError>,
    /// The policy handed back by the worker.
    pub policy: P,
}

type Request<T> = (ExpertObservation<T>, u64, usize);

/// Run `scenario` in real time with the CI+LAAS merge rule.
pub fn run_wall_clock<T, P>(
    scenario: &Scenario<T>,
    mut policy: P,
    options: WallClockOptions,
    ctx: &EpisodeContext,
) -> WallClockRun<T, P>
where
    T: Scalar,
    P: ChunkPolicy<T> + 'static,
{
    policy.reset();
    let (req_tx, req_rx) = mpsc::channel::<Request<T>>();
    let (resp_tx, resp_rx) = mpsc::channel::<Result<ActionChunk<T>, PolicyError>>();
    let delay = options.inference_delay;
    let worker = thread::spawn(move || {
        for (obs, _start, n) in req_rx {
            let began = Instant::now();
            let result = policy.infer(&obs, n);
            if let Some(rest) = delay.checked_sub(began.elapsed()) {
                thread::sleep(rest);
            }
            if resp_tx.send(result).is_err() {
                break;
            }
        }
        policy
    });

    let mut world = scenario.build_world();
    let mut observer = Observer::new(
        scenario.position_noise,
        scenario.velocity_noise,
        ctx.velocity_source,
        ctx.window,
        derive_seed(ctx.seed, &[stream::OBSERVATION]),
    );
    let mut buffer: Vec<ActionChunk<T>> = Vec::new();
    let mut in_flight: Option<u64> = None;
    let mut ticks = Vec::new();
    let mut error = None;
    let t0 = Instant::now();

    while world.tick < options.max_ticks && !scenario.evaluate(&world).is_terminal() {
        let u = world.tick;
        let obs = observer.observe(&world, &scenario.instruction, scenario.scene.target_location);
        let mut delivered = None;
        match resp_rx.try_recv() {
            Ok(Ok(mut chunk)) => {
                chunk.delivery_tick = Some(u);
                delivered = Some(chunk.start_tick);
                buffer.push(chunk);
                in_flight = None;
            }
            Ok(Err(e)) => {
                error = Some(e);
                world.mark_policy_failure();
                break;
            }
            Err(_) => {}
        }
        let mut started = None;
        if in_flight.is_none() {
            req_tx
                .send((obs, u, options.chunk_horizon))
                .expect("inference worker alive");
            in_flight = Some(u);
            started = Some(u);
        }
        let (command, source) = match select_action(&buffer, u) {
            Some((c, a)) => (
                *a,
                CommandSource::Chunk {
                    start_tick: c.start_tick,
                    index: (u - c.start_tick) as usize,
                },
            ),
            None => (EndEffectorCommand::hold(), CommandSource::Hold),
        };
        buffer.retain(|c| c.end_tick() > u);
        ticks.push(WallClockTick {
            tick: u,
            command,
            source,
            started,
            delivered,
        });
        world.step_mut(&command);
        let next = t0 + options.tick_period * (u + 1) as u32;
        if let Some(rest) = next.checked_duration_since(Instant::now()) {
            thread::sleep(rest);
        }
    }

    drop(req_tx);
    let policy = worker.join().expect("inference worker panicked");
    WallClockRun {
        ticks,
        outcome: scenario.evaluate(&world),
        error,
        policy,
    }
}
