//! Checkpoint container.
//!
//! ```text
//! magic    8 bytes  "FACKPT\0\0"
//! version  u32
//! length   u64      byte count of everything that follows
//! header   u64 length + UTF-8 JSON {base, fa, task, config}
//! count    u64      number of parameter blobs
//! blob     name (u64 length + UTF-8), u8 trainable, u64 ndim, ndim x u64 dims, u64 length + f64 values (row-major)
//! ```
//!
//! Little-endian throughout. Saving a loaded checkpoint reproduces it byte for byte.

use std::path::Path;

use failaware_core::numkit::{Array, ParamSet};
use failaware_core::policies::{BaseArchitecture, FaArchitecture, PolicyWeights};
use failaware_core::tasks::TaskConfig;
use serde::{Deserialize, Serialize};

use crate::binfmt::{Reader, Writer};
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"FACKPT\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub base: BaseArchitecture,
    pub fa: Option<FaArchitecture>,
    pub task: TaskConfig,
    /// Echo of the run configuration that produced the checkpoint.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub weights: PolicyWeights,
}

impl Checkpoint {
    pub fn new(weights: PolicyWeights, task: TaskConfig, config: serde_json::Value) -> Self {
        Self {
            header: CheckpointHeader {
                base: weights.base,
                fa: weights.fa,
                task,
                config,
            },
            weights,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Writer::new();
        body.str(&serde_json::to_string(&self.header).expect("header serializes"));
        let params = &self.weights.params;
        body.u64(params.len() as u64);
        for p in params.iter() {
            body.str(&p.name);
            body.u8(u8::from(p.trainable));
            body.u64(p.value.shape().len() as u64);
            for d in p.value.shape() {
                body.u64(*d as u64);
            }
            body.f64s(p.value.data());
        }
        let body = body.into_inner();
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u64(body.len() as u64);
        w.bytes(&body);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader::new(bytes);
        if r.take(8).map_err(|_| "file too short for a checkpoint".to_string())? != MAGIC {
            return Err("not a checkpoint file (bad magic)".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("checkpoint version {version} is not supported (expected {VERSION})"));
        }
        let declared = r.size()?;
        if declared != r.remaining() {
            return Err(format!(
                "checkpoint size mismatch: header declares {declared} bytes, file holds {}",
                r.remaining()
            ));
        }
        let header: CheckpointHeader =
            serde_json::from_str(&r.str()?).map_err(|e| format!("bad checkpoint header: {e}"))?;
        let count = r.size()?;
        let mut params = ParamSet::new();
        for _ in 0..count {
            let name = r.str()?;
            let trainable = match r.u8()? {
                0 => false,
                1 => true,
                t => return Err(format!("parameter {name}: bad trainable flag {t}")),
            };
            let ndim = r.size()?;
            let shape = (0..ndim).map(|_| r.size()).collect::<Result<Vec<_>, _>>()?;
            let data = r.f64s()?;
            let value = Array::new(shape, data).map_err(|e| format!("parameter {name}: {e}"))?;
            params.insert(name, value, trainable).map_err(|e| e.to_string())?;
        }
        let weights = PolicyWeights {
            base: header.base,
            fa: header.fa,
            params,
        };
        Ok(Self { header, weights })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        crate::io::write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = crate::io::read_dependency(path, "checkpoint")?;
        Self::from_bytes(&bytes).map_err(|e| CliError::Dependency(format!("{}: {e}", path.display())))
    }

    /// Rejects a checkpoint whose shapes do not fit `task`.
    pub fn check_compatible(&self, task: &TaskConfig) -> CliResult<()> {
        let b = &self.header.base;
        if b.actions != task.action_count() || b.input != task.observation_len() {
            return Err(CliError::Dependency(format!(
                "checkpoint is incompatible with the task: checkpoint has {} actions and {} inputs, task has {} and {}",
                b.actions,
                b.input,
                task.action_count(),
                task.observation_len()
            )));
        }
        Ok(())
    }
}
