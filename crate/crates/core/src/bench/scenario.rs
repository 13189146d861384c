//! Benchmark instances and their per-dimension generators.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expert::{Selector, Side, SpeedRank, TargetSpec};
use crate::geom::{Pose6D, Quat, Vec3};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, stream};
use crate::sim::{
    evaluate, spawn_scene, MotionProgram, ObjectId, ObjectState, Outcome, SceneConfig, ScriptedMotion, SimError,
    WorldState,
};

use super::BenchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    /// Closed-loop reactivity: one mover at a swept speed.
    CR,
    /// Dynamic adaptation: an abrupt direction change mid-episode.
    DA,
    /// Long-horizon sequencing: objects appear over time, gather them all.
    LS,
    /// Visual understanding analog: pick by label among distractors.
    VU,
    /// Spatial reasoning analog: pick the left or right object.
    SR,
    /// Motion perception analog: pick the faster or slower mover.
    MP,
    /// Visual generalization analog: held-out labels and sizes.
    VG,
    /// Motion generalization: held-out speeds, friction and curved paths.
    MG,
    /// Disturbance robustness: pushes and observation noise.
    DR,
}

impl Dimension {
    pub const ALL: [Dimension; 9] = [
        Dimension::CR,
        Dimension::DA,
        Dimension::LS,
        Dimension::VU,
        Dimension::SR,
        Dimension::MP,
        Dimension::VG,
        Dimension::MG,
        Dimension::DR,
    ];

    pub fn index(self) -> usize {
        Dimension::ALL.iter().position(|&d| d == self).expect("listed")
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::CR => "CR",
            Dimension::DA => "DA",
            Dimension::LS => "LS",
            Dimension::VU => "VU",
            Dimension::SR => "SR",
            Dimension::MP => "MP",
            Dimension::VG => "VG",
            Dimension::MG => "MG",
            Dimension::DR => "DR",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Dimension::ALL.iter().map(|d| d.name()).collect();
                format!("unknown dimension {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Velocity impulse applied to an object at the start of a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Disturbance<T> {
    pub tick: u64,
    pub object: ObjectId,
    pub impulse: Vec3<T>,
}

/// Which parameters were drawn outside the training ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HeldOut {
    pub speed: bool,
    pub friction: bool,
    pub trajectory: bool,
    pub appearance: bool,
}

impl HeldOut {
    pub fn any(self) -> bool {
        self.speed || self.friction || self.trajectory || self.appearance
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid {dimension} scenario: {reason}")]
    InvalidDimensionConfig { dimension: Dimension, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One benchmark instance: initial objects with their scripted motion, the
/// instruction, the disturbance schedule and the success parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scenario<T> {
    pub name: String,
    pub dimension: Dimension,
    pub seed: u64,
    pub scene: SceneConfig<T>,
    pub objects: Vec<ObjectState<T>>,
    pub instruction: TargetSpec,
    /// Objects that must be placed for success.
    pub instructed: Vec<ObjectId>,
    pub disturbances: Vec<Disturbance<T>>,
    /// Standard deviation of horizontal observation noise, meters.
    pub position_noise: T,
    pub velocity_noise: T,
    pub held_out: HeldOut,
}

impl<T: Scalar> Scenario<T> {
    /// Scenario over a freshly spawned scene; every object is instructed.
    pub fn from_spawn(scene: &SceneConfig<T>, seed: u64) -> Result<Self, SimError> {
        let world = spawn_scene(scene, seed)?;
        let instruction = if world.objects.len() == 1 {
            TargetSpec::new(Selector::ByLabel(world.objects[0].label.clone()))
        } else {
            TargetSpec::new(Selector::GatherAll)
        };
        Ok(Self {
            name: format!("spawn-{seed}"),
            dimension: Dimension::CR,
            seed,
            scene: scene.clone(),
            instructed: world.objects.iter().map(|o| o.id).collect(),
            objects: world.objects,
            instruction,
            disturbances: Vec::new(),
            position_noise: T::zero(),
            velocity_noise: T::zero(),
            held_out: HeldOut::default(),
        })
    }

    pub fn build_world(&self) -> WorldState<T> {
        WorldState::from_parts(&self.scene, self.objects.clone(), ChaCha8Rng::seed_from_u64(self.seed))
    }

    pub fn evaluate(&self, world: &WorldState<T>) -> Outcome {
        evaluate(world, &self.instructed, self.scene.timeout_ticks)
    }

    fn invalid(&self, reason: impl Into<String>) -> ScenarioError {
        ScenarioError::InvalidDimensionConfig {
            dimension: self.dimension,
            reason: reason.into(),
        }
    }

    /// Structural checks shared by every dimension.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.instructed.is_empty() {
            return Err(self.invalid("no instructed objects"));
        }
        let known = |id: ObjectId| self.objects.iter().any(|o| o.id == id);
        if let Some(id) = self.instructed.iter().find(|&&id| !known(id)) {
            return Err(self.invalid(format!("instructed object {id} does not exist")));
        }
        if let Some(d) = self.disturbances.iter().find(|d| !known(d.object)) {
            return Err(self.invalid(format!("disturbance targets unknown object {}", d.object)));
        }
        if let Some(o) = self.objects.iter().find(|o| !o.is_valid()) {
            return Err(self.invalid(format!("object {} violates its invariants", o.id)));
        }
        if self.instruction.selector.is_relative() && self.objects.len() < 2 {
            return Err(self.invalid("relative selector needs at least two candidates"));
        }
        match self.dimension {
            Dimension::MP => {
                let movers = self.objects.iter().filter(|o| o.speed() > T::zero()).count();
                if movers < 2 {
                    return Err(self.invalid("needs at least two moving candidates"));
                }
            }
            Dimension::LS => {
                let scheduled = self
                    .objects
                    .iter()
                    .any(|o| o.motion_program.as_ref().is_some_and(|p| p.spawn_tick > 0));
                if !scheduled {
                    return Err(self.invalid("spawn schedule is empty"));
                }
            }
            Dimension::MG if !(self.held_out.speed || self.held_out.friction || self.held_out.trajectory) => {
                return Err(self.invalid("no parameter outside the training ranges"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Check the held-out flags against recorded training ranges.
    pub fn check_held_out(&self, bench: &BenchConfig<T>) -> Result<(), ScenarioError> {
        let speed_out = self
            .objects
            .iter()
            .any(|o| o.speed() < bench.train_speed_min || o.speed() > bench.train_speed_max);
        let friction_out = self
            .objects
            .iter()
            .any(|o| o.friction < bench.train_friction_min || o.friction > bench.train_friction_max);
        let curved = self
            .objects
            .iter()
            .any(|o| o.motion_program.as_ref().is_some_and(|p| p.turn_rate != T::zero()));
        let flags = self.held_out;
        if flags.speed && !speed_out || flags.friction && !friction_out || flags.trajectory && !curved {
            return Err(self.invalid("held-out flag set but parameter lies inside the training range"));
        }
        Ok(())
    }
}

struct Gen<'a, T: Scalar> {
    rng: ChaCha8Rng,
    scene: &'a SceneConfig<T>,
    bench: &'a BenchConfig<T>,
    objects: Vec<ObjectState<T>>,
}

impl<T: Scalar> Gen<'_, T> {
    fn uniform(&mut self, lo: T, hi: T) -> T {
        crate::sim::uniform_closed(&mut self.rng, lo, hi)
    }

    fn heading(&mut self) -> T {
        self.uniform(T::zero(), T::lit(std::f64::consts::TAU))
    }

    fn train_friction(&mut self) -> T {
        self.uniform(self.bench.train_friction_min, self.bench.train_friction_max)
    }

    /// Free position at least `clearance` from every placed object.
    fn position(&mut self, radius: T) -> Result<Vec3<T>, SimError> {
        let region = self.scene.spawn_region();
        let z = self.scene.workspace.min.z + radius;
        for _ in 0..1000 {
            let x = self.uniform(region.min.x, region.max.x);
            let y = self.uniform(region.min.y, region.max.y);
            let p = Vec3::new(x, y, z);
            if self
                .objects
                .iter()
                .all(|o| o.position().horizontal().distance(p.horizontal()) >= o.radius + radius)
            {
                return Ok(p);
            }
        }
        Err(SimError::InfeasiblePlacement {
            placed: self.objects.len(),
            requested: self.objects.len() + 1,
        })
    }

    fn push(&mut self, label: &str, position: Vec3<T>, velocity: Vec3<T>, friction: T, radius: T) -> ObjectId {
        let id = self.objects.len() as u32;
        let mut o = ObjectState::new(id, label, position, velocity, friction, radius);
        o.pose = Pose6D::new(position, Quat::identity());
        self.objects.push(o);
        ObjectId(id)
    }

    fn mover(&mut self, label: &str, speed: T, friction: T, radius: T) -> Result<ObjectId, SimError> {
        let p = self.position(radius)?;
        let h = self.heading();
        Ok(self.push(label, p, polar(speed, h), friction, radius))
    }
}

fn polar<T: Scalar>(speed: T, heading: T) -> Vec3<T> {
    Vec3::new(heading.cos() * speed, heading.sin() * speed, T::zero())
}

/// Generate `count` scenarios for one dimension.
///
/// Scenario `i` depends only on `(dimension, i, seed, configs)`.
pub fn generate_scenarios<T: Scalar>(
    dimension: Dimension,
    count: usize,
    seed: u64,
    scene: &SceneConfig<T>,
    bench: &BenchConfig<T>,
) -> Result<Vec<Scenario<T>>, ScenarioError> {
    if count == 0 {
        return Err(ScenarioError::InvalidDimensionConfig {
            dimension,
            reason: "count must be at least 1".into(),
        });
    }
    (0..count)
        .map(|i| generate_one(dimension, i, seed, scene, bench))
        .collect()
}

fn generate_one<T: Scalar>(
    dimension: Dimension,
    i: usize,
    seed: u64,
    scene: &SceneConfig<T>,
    bench: &BenchConfig<T>,
) -> Result<Scenario<T>, ScenarioError> {
    let s = derive_seed(seed, &[stream::SCENARIO, dimension.index() as u64, i as u64]);
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(s),
        scene,
        bench,
        objects: Vec::new(),
    };
    let r = scene.object_radius;
    let (lo, hi) = (bench.base_speed_min, bench.base_speed_max);
    let mut disturbances = Vec::new();
    let mut held_out = HeldOut::default();
    let (mut position_noise, velocity_noise) = (T::zero(), T::zero());

    let (instruction, instructed) = match dimension {
        Dimension::CR => {
            let grid = &bench.cr_speeds.0;
            if grid.is_empty() {
                return Err(ScenarioError::InvalidDimensionConfig {
                    dimension,
                    reason: "empty speed grid".into(),
                });
            }
            let speed = grid[i % grid.len()];
            let f = g.train_friction();
            let id = g.mover("ball", speed, f, r)?;
            (TargetSpec::new(Selector::ByLabel("ball".into())), vec![id])
        }
        Dimension::DA => {
            let speed = g.uniform(lo, hi);
            let f = g.train_friction();
            let id = g.mover("ball", speed, f, r)?;
            let tick = g.rng.random_range(bench.da_tick_min..=bench.da_tick_max);
            let sign = if g.rng.random_bool(0.5) { T::one() } else { -T::one() };
            let turn = g.uniform(T::lit(std::f64::consts::FRAC_PI_2), T::lit(std::f64::consts::PI)) * sign;
            g.objects[0].motion_program = Some(MotionProgram {
                events: vec![(tick, ScriptedMotion::Turn(turn))],
                ..MotionProgram::default()
            });
            (TargetSpec::new(Selector::ByLabel("ball".into())), vec![id])
        }
        Dimension::LS => {
            let k = bench.ls_objects.max(2);
            let mut ids = Vec::with_capacity(k);
            for j in 0..k {
                let speed = g.uniform(lo, hi);
                let f = g.train_friction();
                let id = g.mover("ball", speed, f, r)?;
                g.objects[j].motion_program = Some(MotionProgram {
                    spawn_tick: j as u64 * bench.ls_spawn_interval,
                    ..MotionProgram::default()
                });
                ids.push(id);
            }
            (TargetSpec::new(Selector::GatherAll), ids)
        }
        Dimension::VU => {
            let pool = VU_LABELS;
            let target = pool[g.rng.random_range(0..pool.len())];
            let distractors: Vec<&str> = pool.iter().copied().filter(|&l| l != target).collect();
            let n = bench.vu_distractors.min(distractors.len());
            let speed = g.uniform(lo, hi);
            let f = g.train_friction();
            let id = g.mover(target, speed, f, r)?;
            for &label in distractors.iter().take(n) {
                let speed = g.uniform(lo, hi);
                let f = g.train_friction();
                g.mover(label, speed, f, r)?;
            }
            (TargetSpec::new(Selector::ByLabel(target.into())), vec![id])
        }
        Dimension::SR => {
            // Both objects share one velocity so their lateral order never changes.
            let side = if i.is_multiple_of(2) { Side::Left } else { Side::Right };
            let speed = g.uniform(lo, hi);
            let h = g.heading();
            let f = g.train_friction();
            let v = polar(speed, h);
            let a = g.position(r)?;
            let mut b = g.position(r)?;
            let mut attempts = 0;
            while (a.y - b.y).abs() < bench.sr_min_separation || a.distance(b) < r + r {
                attempts += 1;
                if attempts > 1000 {
                    return Err(SimError::InfeasiblePlacement { placed: 1, requested: 2 }.into());
                }
                b = g.position(r)?;
            }
            let want_larger_y = side == Side::Left;
            // the instructed object gets the lower id so ties resolve to it
            let (first, second) = if (a.y > b.y) == want_larger_y { (a, b) } else { (b, a) };
            let id = g.push("ball", first, v, f, r);
            g.push("ball", second, v, f, r);
            (TargetSpec::new(Selector::ByRelativePosition(side)), vec![id])
        }
        Dimension::MP => {
            let rank = if i.is_multiple_of(2) { SpeedRank::Faster } else { SpeedRank::Slower };
            let gap = bench.mp_min_speed_gap;
            let slow = g.uniform(lo, hi - gap);
            let fast = g.uniform(slow + gap, hi);
            // equal friction keeps the speed order; the target takes the lower id
            let f = g.train_friction();
            let (first, second) = match rank {
                SpeedRank::Faster => (fast, slow),
                SpeedRank::Slower => (slow, fast),
            };
            let id = g.mover("ball", first, f, r)?;
            g.mover("ball", second, f, r)?;
            (TargetSpec::new(Selector::ByRelativeSpeed(rank)), vec![id])
        }
        Dimension::VG => {
            let label = VG_LABELS[g.rng.random_range(0..VG_LABELS.len())];
            let radius = g.uniform(bench.vg_radius_min, bench.vg_radius_max);
            let speed = g.uniform(lo, hi);
            let f = g.train_friction();
            let id = g.mover(label, speed, f, radius)?;
            held_out.appearance = true;
            (TargetSpec::new(Selector::ByLabel(label.into())), vec![id])
        }
        Dimension::MG => {
            let speed = g.uniform(bench.mg_speed_min, bench.mg_speed_max);
            let f = g.uniform(bench.mg_friction_min, bench.mg_friction_max);
            let id = g.mover("ball", speed, f, r)?;
            let sign = if g.rng.random_bool(0.5) { T::one() } else { -T::one() };
            let rate = g.uniform(bench.mg_turn_rate_min, bench.mg_turn_rate_max) * sign;
            g.objects[0].motion_program = Some(MotionProgram {
                turn_rate: rate,
                ..MotionProgram::default()
            });
            held_out = HeldOut {
                speed: speed > bench.train_speed_max || speed < bench.train_speed_min,
                friction: f > bench.train_friction_max || f < bench.train_friction_min,
                trajectory: rate != T::zero(),
                appearance: false,
            };
            (TargetSpec::new(Selector::ByLabel("ball".into())), vec![id])
        }
        Dimension::DR => {
            let speed = g.uniform(lo, hi);
            let f = g.train_friction();
            let id = g.mover("ball", speed, f, r)?;
            for _ in 0..bench.dr_impulses {
                let tick = g.rng.random_range(bench.da_tick_min..=bench.da_tick_max);
                let h = g.heading();
                disturbances.push(Disturbance {
                    tick,
                    object: id,
                    impulse: polar(bench.dr_impulse, h),
                });
            }
            disturbances.sort_by_key(|d| d.tick);
            position_noise = bench.dr_noise;
            (TargetSpec::new(Selector::ByLabel("ball".into())), vec![id])
        }
    };

    let scenario = Scenario {
        name: format!("{dimension}-{i:04}"),
        dimension,
        seed: s,
        scene: scene.clone(),
        objects: g.objects,
        instruction,
        instructed,
        disturbances,
        position_noise,
        velocity_noise,
        held_out,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Labels seen during training-style scenarios.
pub const VU_LABELS: [&str; 4] = ["tennis", "apple", "cube", "can"];
/// Labels never used outside VG.
pub const VG_LABELS: [&str; 3] = ["mug", "bottle", "lemon"];
