//! Configuration: flat key/value files mapped onto typed per-module sections.

mod kv;

use thiserror::Error;

pub use kv::KvConfig;

use crate::bench::BenchConfig;
use crate::expert::ExpertConfig;
use crate::flow::FlowConfig;
use crate::scalar::Scalar;
use crate::sim::SceneConfig;
use crate::streaming::ExecutorConfig;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "DOMSTREAM_CONFIG";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value:?}")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// A typed view over a subset of keys.
pub trait ConfigSection {
    const KEYS: &'static [&'static str];
    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError>;
    fn export(&self, kv: &mut KvConfig);
    fn validate(&self) -> Result<(), ConfigError>;
}

/// Merged, validated configuration for every module.
#[derive(Debug, Clone, PartialEq)]
pub struct Config<T: Scalar> {
    pub scene: SceneConfig<T>,
    pub expert: ExpertConfig<T>,
    pub executor: ExecutorConfig,
    pub flow: FlowConfig,
    pub bench: BenchConfig<T>,
}

impl<T: Scalar> Default for Config<T> {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            expert: ExpertConfig::default(),
            executor: ExecutorConfig::default(),
            flow: FlowConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl<T: Scalar> Config<T> {
    pub fn known_keys() -> impl Iterator<Item = &'static str> {
        SceneConfig::<T>::KEYS
            .iter()
            .chain(ExpertConfig::<T>::KEYS)
            .chain(ExecutorConfig::KEYS)
            .chain(FlowConfig::KEYS)
            .chain(BenchConfig::<T>::KEYS)
            .copied()
    }

    /// Defaults overlaid with `kv`; unknown keys are rejected.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let known: Vec<&str> = Self::known_keys().collect();
        if let Some(k) = kv.keys().find(|k| !known.contains(k)) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        let mut cfg = Self::default();
        cfg.scene.apply(kv)?;
        cfg.expert.apply(kv)?;
        cfg.executor.apply(kv)?;
        cfg.flow.apply(kv)?;
        cfg.bench.apply(kv)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_kv(&KvConfig::parse(text)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scene.validate()?;
        self.expert.validate()?;
        self.executor.validate()?;
        self.flow.validate()?;
        self.bench.validate()
    }

    /// Every key with its effective value.
    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        self.scene.export(&mut kv);
        self.expert.export(&mut kv);
        self.executor.export(&mut kv);
        self.flow.export(&mut kv);
        self.bench.export(&mut kv);
        kv
    }

    pub fn digest(&self) -> String {
        self.to_kv().digest()
    }
}
