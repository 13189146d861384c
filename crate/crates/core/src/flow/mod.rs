//! Conditional flow matching over flattened action chunks.
//!
//! Training regresses the field `u = eps - A` at the interpolant
//! `A_tau = tau * A + (1 - tau) * eps`; sampling starts from noise at
//! `tau = 0` and integrates `dA/dtau = -u` to `tau = 1` with Euler steps.

mod io;
mod mlp;
mod policy;
mod train;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ConfigSection, KvConfig};
use crate::datagen::ACTION_DIM;
use crate::expert::{resolve_target, ExpertObservation, Phase, Selector};
use crate::geom::{Quat, Vec3};
use crate::scalar::Scalar;
use crate::sim::{EndEffectorCommand, GripperCommand};

pub use io::{load_model, read_model, save_model, write_model, FlowModel, MODEL_MAGIC, MODEL_VERSION};
pub use mlp::{ForwardCache, Layer, MlpParams};
pub use policy::{chunk_from_vector, FlowPolicy};
pub use train::{
    adam_step, train, train_on_pairs, training_pairs, AdamState, TrainConfig, TrainOutcome, TrainingPair,
};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Frequencies of the sinusoidal flow-time features.
pub const TIME_FREQUENCIES: usize = 3;
pub const TIME_FEATURES: usize = 1 + 2 * TIME_FREQUENCIES;

pub fn time_features<T: Scalar>(tau: T) -> [T; TIME_FEATURES] {
    let mut out = [T::zero(); TIME_FEATURES];
    out[0] = tau;
    for k in 0..TIME_FREQUENCIES {
        let a = T::lit(std::f64::consts::PI * (k + 1) as f64) * tau;
        out[1 + 2 * k] = a.sin();
        out[2 + 2 * k] = a.cos();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FlowSample<T> {
    pub chunk: Vec<T>,
    pub noise: Vec<T>,
    pub tau: T,
    pub noisy: Vec<T>,
    pub target: Vec<T>,
}

impl<T: Scalar> FlowSample<T> {
    pub fn new(chunk: Vec<T>, noise: Vec<T>, tau: T) -> Self {
        assert_eq!(chunk.len(), noise.len(), "chunk and noise widths");
        let noisy = chunk
            .iter()
            .zip(&noise)
            .map(|(&a, &e)| tau * a + (T::one() - tau) * e)
            .collect();
        let target = chunk.iter().zip(&noise).map(|(&a, &e)| e - a).collect();
        Self {
            chunk,
            noise,
            tau,
            noisy,
            target,
        }
    }
}

pub fn standard_normal<T: Scalar>(rng: &mut impl Rng, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::lit(v)
        })
        .collect()
}

/// Draw `tau ~ U[0, 1]` and `eps ~ N(0, I)` for `chunk`.
pub fn make_flow_sample<T: Scalar>(chunk: &[T], rng: &mut impl Rng) -> FlowSample<T> {
    let tau = T::lit(rng.random_range(0.0..=1.0));
    let noise = standard_normal(rng, chunk.len());
    FlowSample::new(chunk.to_vec(), noise, tau)
}

/// Fixed-width state summary the network is conditioned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConditionVector<T>(pub Vec<T>);

/// end-effector (3), target position (3), target velocity (3), placement
/// location (3), phase one-hot (4), selector one-hot (6)
pub const CONDITION_DIM: usize = 12 + 4 + Selector::COUNT;

impl<T: Scalar> ConditionVector<T> {
    /// The resolved target, or the held object when nothing is resolvable.
    pub fn from_observation(obs: &ExpertObservation<T>, phase: Phase) -> Self {
        let target = resolve_target(obs)
            .ok()
            .and_then(|id| obs.object(id))
            .or_else(|| obs.attached());
        let (p, v) = target.map_or((Vec3::zero(), Vec3::zero()), |o| (o.position, o.velocity));
        let mut out = Vec::with_capacity(CONDITION_DIM);
        out.extend(obs.end_effector.position().to_array());
        out.extend(p.to_array());
        out.extend(v.to_array());
        out.extend(obs.target_location.to_array());
        out.extend((0..4).map(|i| if i == phase.index() { T::one() } else { T::zero() }));
        let s = obs.instruction.selector.index();
        out.extend((0..Selector::COUNT).map(|i| if i == s { T::one() } else { T::zero() }));
        debug_assert_eq!(out.len(), CONDITION_DIM);
        Self(out)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Network input: noisy chunk, condition, flow-time features.
pub fn network_input<T: Scalar>(noisy: &[T], condition: &[T], tau: T) -> Vec<T> {
    let mut x = Vec::with_capacity(noisy.len() + condition.len() + TIME_FEATURES);
    x.extend_from_slice(noisy);
    x.extend_from_slice(condition);
    x.extend(time_features(tau));
    x
}

/// Encode one command as `[position(3), quaternion(4), gripper]`.
pub fn encode_action<T: Scalar>(c: &EndEffectorCommand<T>) -> [T; ACTION_DIM] {
    let p = c.target_position;
    let q = c.target_orientation;
    let g = match c.gripper_command {
        GripperCommand::Close => T::one(),
        GripperCommand::Open => -T::one(),
    };
    [p.x, p.y, p.z, q.w, q.x, q.y, q.z, g]
}

/// Decode one action; the quaternion is renormalized and the gripper
/// channel thresholded at zero.
pub fn decode_action<T: Scalar>(v: &[T]) -> EndEffectorCommand<T> {
    let q = Quat::new(v[3], v[4], v[5], v[6]).normalized();
    let g = if v[7] > T::zero() {
        GripperCommand::Close
    } else {
        GripperCommand::Open
    };
    EndEffectorCommand {
        target_position: Vec3::new(v[0], v[1], v[2]),
        target_orientation: q,
        gripper_command: g,
        hold: false,
    }
}

/// Mean over the batch of `|E(x) - u|^2` and its exact gradient.
pub fn loss_and_grad<T: Scalar>(
    params: &MlpParams<T>,
    batch: &[(FlowSample<T>, ConditionVector<T>)],
) -> Result<(T, MlpParams<T>), FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyDataset);
    }
    let scale = T::one() / T::from_usize_lossy(batch.len());
    let two = T::two();
    let mut grad = params.zeros_like();
    let mut loss = T::zero();
    let mut cache = ForwardCache::default();
    for (s, c) in batch {
        let x = network_input(&s.noisy, &c.0, s.tau);
        if x.len() != params.input_dim() || s.target.len() != params.output_dim() {
            return Err(FlowError::Shape(format!(
                "sample gives {} inputs / {} outputs, network expects {} / {}",
                x.len(),
                s.target.len(),
                params.input_dim(),
                params.output_dim()
            )));
        }
        let out = params.forward_cached(&x, &mut cache);
        let mut upstream = Vec::with_capacity(out.len());
        let mut l = T::zero();
        for (o, u) in out.iter().zip(&s.target) {
            let r = *o - *u;
            l += r * r;
            upstream.push(two * r * scale);
        }
        loss += l;
        params.backward(&cache, &upstream, &mut grad);
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(FlowError::NonFiniteLoss);
    }
    Ok((loss, grad))
}

/// Integrate the learned field from `eps` (`tau = 0`) to `tau = 1` in `steps`
/// Euler steps: `A <- A - E(A, c, tau) / steps`.
pub fn integrate<T: Scalar>(params: &MlpParams<T>, condition: &[T], noise: Vec<T>, steps: usize) -> Vec<T> {
    assert!(steps >= 1, "at least one Euler step");
    let delta = T::one() / T::from_usize_lossy(steps);
    let mut a = noise;
    for k in 0..steps {
        let tau = T::from_usize_lossy(k) * delta;
        let e = params.forward(&network_input(&a, condition, tau));
        for (ai, ei) in a.iter_mut().zip(&e) {
            *ai -= delta * *ei;
        }
    }
    a
}

/// Draw a chunk vector: noise from `seed`, then [`integrate`].
pub fn sample_chunk<T: Scalar>(params: &MlpParams<T>, condition: &[T], steps: usize, seed: u64) -> Vec<T> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = standard_normal(&mut rng, params.output_dim());
    integrate(params, condition, noise, steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub hidden: usize,
    pub layers: usize,
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Euler steps at sampling time.
    pub sample_steps: usize,
    pub include_failures: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            layers: 2,
            steps: 2000,
            batch: 64,
            learning_rate: 1e-3,
            seed: 0,
            sample_steps: 10,
            include_failures: false,
        }
    }
}

impl ConfigSection for FlowConfig {
    const KEYS: &'static [&'static str] = &[
        "flow.hidden",
        "flow.layers",
        "flow.steps",
        "flow.batch",
        "flow.learning_rate",
        "flow.seed",
        "flow.sample_steps",
        "flow.include_failures",
    ];

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        kv.read("flow.hidden", &mut self.hidden)?;
        kv.read("flow.layers", &mut self.layers)?;
        kv.read("flow.steps", &mut self.steps)?;
        kv.read("flow.batch", &mut self.batch)?;
        kv.read("flow.learning_rate", &mut self.learning_rate)?;
        kv.read("flow.seed", &mut self.seed)?;
        kv.read("flow.sample_steps", &mut self.sample_steps)?;
        kv.read("flow.include_failures", &mut self.include_failures)?;
        Ok(())
    }

    fn export(&self, kv: &mut KvConfig) {
        kv.set("flow.hidden", self.hidden);
        kv.set("flow.layers", self.layers);
        kv.set("flow.steps", self.steps);
        kv.set("flow.batch", self.batch);
        kv.set("flow.learning_rate", self.learning_rate);
        kv.set("flow.seed", self.seed);
        kv.set("flow.sample_steps", self.sample_steps);
        kv.set("flow.include_failures", self.include_failures);
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.hidden == 0 || self.batch == 0 || self.sample_steps == 0 {
            return Err(ConfigError::Invalid(
                "flow.hidden, flow.batch and flow.sample_steps must be >= 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(ConfigError::Invalid("flow.learning_rate must be finite and >= 0".into()));
        }
        Ok(())
    }
}
