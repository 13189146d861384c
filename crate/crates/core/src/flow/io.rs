//! Binary model files.
//!
//! Layout, little endian: magic (8 bytes), version u32, horizon u32,
//! condition width u32, layer count k u32, k+1 layer sizes u32, training seed
//! u64, digest length u32 and UTF-8 digest, parameter count u64, then every
//! parameter as f64 in layer order (weights row-major, then biases).

use std::fs;
use std::path::Path;

use crate::scalar::Scalar;

use super::{FlowError, MlpParams, TIME_FEATURES};
use crate::datagen::ACTION_DIM;

pub const MODEL_MAGIC: [u8; 8] = *b"DSFLOWMD";
pub const MODEL_VERSION: u32 = 1;

/// Trained network plus the shape information needed to use it.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel<T> {
    pub params: MlpParams<T>,
    pub horizon: usize,
    pub condition_dim: usize,
    pub seed: u64,
    pub config_digest: String,
}

impl<T: Scalar> FlowModel<T> {
    pub fn action_width(&self) -> usize {
        (self.horizon + 1) * ACTION_DIM
    }

    pub fn check_shapes(&self) -> Result<(), FlowError> {
        let d = self.action_width();
        if self.params.output_dim() != d || self.params.input_dim() != d + self.condition_dim + TIME_FEATURES {
            return Err(FlowError::Shape(format!(
                "network {:?} does not fit horizon {} with condition width {}",
                self.params.sizes(),
                self.horizon,
                self.condition_dim
            )));
        }
        Ok(())
    }
}

pub fn write_model<T: Scalar>(model: &FlowModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.horizon as u32).to_le_bytes());
    out.extend_from_slice(&(model.condition_dim as u32).to_le_bytes());
    let sizes = model.params.sizes();
    out.extend_from_slice(&(model.params.layers.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.seed.to_le_bytes());
    out.extend_from_slice(&(model.config_digest.len() as u32).to_le_bytes());
    out.extend_from_slice(model.config_digest.as_bytes());
    out.extend_from_slice(&(model.params.num_params() as u64).to_le_bytes());
    for p in model.params.iter() {
        out.extend_from_slice(&p.as_f64().to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FlowError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FlowError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FlowError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, FlowError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, FlowError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_model<T: Scalar>(bytes: &[u8]) -> Result<FlowModel<T>, FlowError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MODEL_MAGIC {
        return Err(FlowError::Format("not a model file".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(FlowError::Format(format!(
            "model version {version} is not supported (expected {MODEL_VERSION})"
        )));
    }
    let horizon = r.u32()? as usize;
    let condition_dim = r.u32()? as usize;
    let layers = r.u32()? as usize;
    if layers == 0 || layers > 64 {
        return Err(FlowError::Format(format!("implausible layer count {layers}")));
    }
    let sizes = (0..=layers)
        .map(|_| r.u32().map(|s| s as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let seed = r.u64()?;
    let digest_len = r.u32()? as usize;
    let config_digest = String::from_utf8(r.take(digest_len)?.to_vec())
        .map_err(|_| FlowError::Format("digest is not UTF-8".into()))?;
    let count = r.u64()? as usize;
    let mut params = MlpParams::zeros(&sizes);
    if count != params.num_params() {
        return Err(FlowError::Format(format!(
            "parameter count {count} does not match layer sizes {sizes:?}"
        )));
    }
    let values = (0..count)
        .map(|_| r.f64().map(T::lit))
        .collect::<Result<Vec<T>, _>>()?;
    if r.pos != bytes.len() {
        return Err(FlowError::Format("trailing bytes".into()));
    }
    params.set_flat(&values);
    let model = FlowModel {
        params,
        horizon,
        condition_dim,
        seed,
        config_digest,
    };
    model.check_shapes()?;
    Ok(model)
}

pub fn save_model<T: Scalar>(model: &FlowModel<T>, path: &Path) -> Result<(), FlowError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| FlowError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, write_model(model)).map_err(|source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<FlowModel<T>, FlowError> {
    let bytes = fs::read(path).map_err(|source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_model(&bytes)
}
