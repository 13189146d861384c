//! The episode driver: simulator, observer and command source in one tick loop.

use thiserror::Error;

use crate::bench::{Scenario, ScenarioError};
use crate::datagen::{
    completion_time, path_length, EpisodeFooter, EpisodeHeader, EpisodeLog, ExecutorDescriptor, ObjectRecord,
    TickRecord, SCHEMA_VERSION,
};
use crate::expert::{ControllerState, Expert, ExpertObservation, Observer, VelocitySource};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, stream};
use crate::sim::{ObjectStatus, Outcome, SimError, WorldState};

use super::{ChunkPolicy, CommandSource, ExecutorConfig, ExecutorState, PolicyError, TickOutput};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Per-episode settings that are not part of the scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeContext {
    pub seed: u64,
    pub config_digest: String,
    pub velocity_source: VelocitySource,
    pub window: usize,
}

impl EpisodeContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            config_digest: String::new(),
            velocity_source: VelocitySource::Truth,
            window: 8,
        }
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.config_digest = digest.into();
        self
    }

    pub fn with_velocity(mut self, source: VelocitySource, window: usize) -> Self {
        self.velocity_source = source;
        self.window = window;
        self
    }
}

trait CommandSourceLoop<T: Scalar> {
    fn command(&mut self, tick: u64, obs: ExpertObservation<T>) -> Result<TickOutput<T>, PolicyError>;
}

struct ClosedLoop<'a, T: Scalar> {
    expert: &'a Expert<T>,
    state: ControllerState,
}

impl<T: Scalar> CommandSourceLoop<T> for ClosedLoop<'_, T> {
    fn command(&mut self, _tick: u64, obs: ExpertObservation<T>) -> Result<TickOutput<T>, PolicyError> {
        let (command, state) = self.expert.step(&obs, self.state)?;
        self.state = state;
        let phase = state.phase;
        Ok(TickOutput {
            command,
            source: CommandSource::ClosedLoop,
            phase: Some(phase),
            started: None,
            delivered: None,
            coverage_gap: false,
        })
    }
}

struct Streamed<'a, T: Scalar> {
    executor: ExecutorState<T>,
    policy: &'a mut dyn ChunkPolicy<T>,
}

impl<T: Scalar> CommandSourceLoop<T> for Streamed<'_, T> {
    fn command(&mut self, tick: u64, obs: ExpertObservation<T>) -> Result<TickOutput<T>, PolicyError> {
        let policy = &mut *self.policy;
        self.executor.tick(tick, || obs, |o, _, n| policy.infer(&o, n))
    }
}

fn snapshot<T: Scalar>(world: &WorldState<T>) -> Vec<ObjectRecord<T>> {
    world.objects.iter().map(ObjectRecord::from).collect()
}

fn drive<T: Scalar>(
    scenario: &Scenario<T>,
    ctx: &EpisodeContext,
    policy_name: String,
    executor: Option<ExecutorDescriptor>,
    source: &mut dyn CommandSourceLoop<T>,
) -> Result<EpisodeLog<T>, EpisodeError> {
    scenario.validate()?;
    let mut world = scenario.build_world();
    let mut observer = Observer::new(
        scenario.position_noise,
        scenario.velocity_noise,
        ctx.velocity_source,
        ctx.window,
        derive_seed(ctx.seed, &[stream::OBSERVATION]),
    );
    let target = scenario.scene.target_location;
    let mut ticks: Vec<TickRecord<T>> = Vec::new();
    let mut error = None;

    loop {
        let outcome = scenario.evaluate(&world);
        let u = world.tick;
        let mut record = TickRecord {
            tick: u,
            objects: snapshot(&world),
            end_effector: world.end_effector.clone(),
            phase: None,
            command: None,
            source: None,
            delivered: None,
            coverage_gap: false,
            events: Vec::new(),
        };
        if outcome.is_terminal() {
            if outcome == Outcome::Timeout {
                world.mark_timeout();
            }
            ticks.push(record);
            break;
        }
        for d in scenario.disturbances.iter().filter(|d| d.tick == u) {
            // pushes on held or absent objects have no effect
            let free = world.object(d.object).is_some_and(|o| o.status == ObjectStatus::Free);
            if free {
                world.apply_disturbance_mut(d.object, d.impulse)?;
            }
        }
        let obs = observer.observe(&world, &scenario.instruction, target);
        match source.command(u, obs) {
            Ok(out) => {
                record.phase = out.phase;
                record.command = Some(out.command);
                record.source = Some(out.source);
                record.delivered = out.delivered;
                record.coverage_gap = out.coverage_gap;
                ticks.push(record);
                world.step_mut(&out.command);
            }
            Err(e) => {
                world.mark_policy_failure();
                error = Some(e.to_string());
                ticks.push(record);
                break;
            }
        }
    }

    for e in &world.events {
        if let Some(t) = ticks.get_mut(e.tick as usize) {
            t.events.push(e.kind);
        }
    }
    let outcome = scenario.evaluate(&world);
    let placed = scenario
        .instructed
        .iter()
        .map(|&id| {
            let p = world
                .events
                .iter()
                .any(|e| e.kind == crate::sim::EventKind::Placed(id));
            (id, p)
        })
        .collect();
    let footer = EpisodeFooter {
        outcome,
        success: outcome == Outcome::Success,
        path_length: path_length(&ticks),
        completion_time: completion_time(&ticks, world.dt),
        placed,
        error,
    };
    let header = EpisodeHeader {
        schema_version: SCHEMA_VERSION,
        seed: ctx.seed,
        config_digest: ctx.config_digest.clone(),
        scalar: T::TAG.to_string(),
        dt: world.dt,
        policy: policy_name,
        executor,
        scenario: scenario.clone(),
    };
    Ok(EpisodeLog { header, ticks, footer })
}

/// Run `scenario` with chunks from `policy` scheduled by the executor.
pub fn run_episode<T: Scalar>(
    scenario: &Scenario<T>,
    policy: &mut dyn ChunkPolicy<T>,
    config: &ExecutorConfig,
    ctx: &EpisodeContext,
) -> Result<EpisodeLog<T>, EpisodeError> {
    policy.reset();
    let latency_seed = derive_seed(ctx.seed, &[stream::LATENCY]);
    let descriptor = ExecutorDescriptor {
        mode: config.mode,
        latency: config.latency_model(latency_seed),
        chunk_horizon: config.chunk_horizon,
        gap_behavior: config.gap_behavior,
    };
    let name = policy.name();
    let mut source = Streamed {
        executor: config.executor(latency_seed),
        policy,
    };
    drive(scenario, ctx, name, Some(descriptor), &mut source)
}

/// Run `scenario` with the expert recomputing its command every tick.
pub fn run_closed_loop<T: Scalar>(
    scenario: &Scenario<T>,
    expert: &Expert<T>,
    ctx: &EpisodeContext,
) -> Result<EpisodeLog<T>, EpisodeError> {
    let mut source = ClosedLoop {
        expert,
        state: ControllerState::default(),
    };
    drive(scenario, ctx, "expert".into(), None, &mut source)
}
