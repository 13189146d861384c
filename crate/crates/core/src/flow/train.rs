//! Imitation training of the flow network with Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{EpisodeLog, TickRecord};
use crate::expert::{ExpertObservation, ObservedObject};
use crate::scalar::Scalar;
use crate::sim::ObjectStatus;

use super::io::FlowModel;
use super::{encode_action, loss_and_grad, make_flow_sample, ConditionVector, FlowConfig, FlowError, MlpParams};
use super::{CONDITION_DIM, TIME_FEATURES};
use crate::datagen::ACTION_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair<T> {
    pub condition: ConditionVector<T>,
    pub chunk: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl From<&FlowConfig> for TrainConfig {
    fn from(c: &FlowConfig) -> Self {
        Self {
            steps: c.steps,
            batch: c.batch,
            learning_rate: c.learning_rate,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: MlpParams<T>,
    v: MlpParams<T>,
    t: i32,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &MlpParams<T>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(params: &mut MlpParams<T>, grad: &MlpParams<T>, state: &mut AdamState<T>, lr: T) {
    state.t += 1;
    let (b1, b2) = (T::lit(BETA1), T::lit(BETA2));
    let c1 = T::one() - b1.powi(state.t);
    let c2 = T::one() - b2.powi(state.t);
    let eps = T::lit(EPS);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grad.iter())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (T::one() - b1) * *g;
        *v = b2 * *v + (T::one() - b2) * *g * *g;
        let mh = *m / c1;
        let vh = *v / c2;
        *p -= lr * mh / (vh.sqrt() + eps);
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: MlpParams<T>,
    /// Minibatch loss before each update.
    pub losses: Vec<T>,
}

/// Train a fresh network on `(condition, chunk)` pairs.
///
/// `hidden` lists the hidden widths; input and output widths follow from the data.
pub fn train_on_pairs<T: Scalar>(
    pairs: &[TrainingPair<T>],
    hidden: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>, FlowError> {
    let first = pairs.first().ok_or(FlowError::EmptyDataset)?;
    let d = first.chunk.len();
    let c = first.condition.0.len();
    if pairs.iter().any(|p| p.chunk.len() != d || p.condition.0.len() != c) {
        return Err(FlowError::Shape("training pairs differ in width".into()));
    }
    let mut sizes = vec![d + c + TIME_FEATURES];
    sizes.extend_from_slice(hidden);
    sizes.push(d);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParams::init(&sizes, rng.random());
    let mut adam = AdamState::new(&params);
    let lr = T::lit(config.learning_rate);
    let mut losses = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let batch: Vec<_> = (0..config.batch.max(1))
            .map(|_| {
                let p = &pairs[rng.random_range(0..pairs.len())];
                (make_flow_sample(&p.chunk, &mut rng), p.condition.clone())
            })
            .collect();
        let (loss, grad) = loss_and_grad(&params, &batch)?;
        losses.push(loss);
        adam_step(&mut params, &grad, &mut adam, lr);
    }
    Ok(TrainOutcome { params, losses })
}

fn observation_at<T: Scalar>(log: &EpisodeLog<T>, record: &TickRecord<T>) -> ExpertObservation<T> {
    let scenario = &log.header.scenario;
    let objects = record
        .objects
        .iter()
        .filter(|o| matches!(o.status, ObjectStatus::Free | ObjectStatus::Attached))
        .filter_map(|o| {
            let s = scenario.objects.iter().find(|s| s.id == o.id)?;
            Some(ObservedObject {
                id: o.id,
                label: s.label.clone(),
                position: o.pose.position,
                velocity: o.linear_velocity,
                radius: s.radius,
                attached: o.status == ObjectStatus::Attached,
            })
        })
        .collect();
    ExpertObservation {
        tick: record.tick,
        end_effector: record.end_effector.clone(),
        objects,
        instruction: scenario.instruction.clone(),
        target_location: scenario.scene.target_location,
    }
}

/// One pair per commanded tick: the condition at that tick and the next
/// `horizon + 1` logged commands, padded with the last one.
pub fn training_pairs<T: Scalar>(logs: &[EpisodeLog<T>], horizon: usize) -> Vec<TrainingPair<T>> {
    let mut out = Vec::new();
    for log in logs {
        let commands = log.commands();
        let Some(&last) = commands.last() else { continue };
        for (u, record) in log.ticks.iter().enumerate() {
            let (Some(_), Some(phase)) = (record.command, record.phase) else {
                continue;
            };
            let obs = observation_at(log, record);
            let mut chunk = Vec::with_capacity((horizon + 1) * ACTION_DIM);
            for k in 0..=horizon {
                let c = commands.get(u + k).copied().unwrap_or(last);
                chunk.extend(encode_action(&c));
            }
            out.push(TrainingPair {
                condition: ConditionVector::from_observation(&obs, phase),
                chunk,
            });
        }
    }
    out
}

/// Train the chunk model on expert episodes.
pub fn train<T: Scalar>(
    logs: &[EpisodeLog<T>],
    config: &FlowConfig,
    horizon: usize,
    config_digest: &str,
) -> Result<(FlowModel<T>, Vec<T>), FlowError> {
    let pairs = training_pairs(logs, horizon);
    let hidden = vec![config.hidden; config.layers];
    let out = train_on_pairs(&pairs, &hidden, &TrainConfig::from(config))?;
    let model = FlowModel {
        params: out.params,
        horizon,
        condition_dim: CONDITION_DIM,
        seed: config.seed,
        config_digest: config_digest.to_string(),
    };
    Ok((model, out.losses))
}
