//! Dataset container.
//!
//! ```text
//! magic    8 bytes  "FADATA\0\0"
//! version  u32
//! header   u64 length + UTF-8 JSON {kind, config, assess, seed, count, observation_len, action_count}
//! records  count x { truth, observation: u64 length + f64 values }
//! truth    u8 tag: 0 label u64 | 1 costs (u64 length + f64, +inf = infeasible) | 2 cell u64 row, col, height, width
//! ```
//!
//! All integers and floats are little-endian, so files are bit-identical across platforms.

use std::path::Path;

use failaware_core::numkit::{Array, Rng};
use failaware_core::tasks::{AssessConfig, CostTable, TaskConfig, TaskInstance, Truth};
use serde::{Deserialize, Serialize};

use crate::binfmt::{Reader, Writer};
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"FADATA\0\0";
pub const VERSION: u32 = 1;
const DATA_STREAM: u64 = 0x6461_7461;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub kind: String,
    pub config: TaskConfig,
    pub assess: AssessConfig,
    pub seed: u64,
    pub count: usize,
    pub observation_len: usize,
    pub action_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub instances: Vec<TaskInstance>,
}

/// Instance `i` of the dataset stream for `seed`.
pub fn data_rng(seed: u64, i: usize) -> Rng {
    Rng::derive(seed, &[DATA_STREAM, i as u64])
}

impl Dataset {
    pub fn generate(task: &TaskConfig, assess: &AssessConfig, seed: u64, count: usize) -> CliResult<Self> {
        let instances = (0..count)
            .map(|i| task.generate(&mut data_rng(seed, i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            header: DatasetHeader {
                kind: task.kind().as_str().into(),
                config: task.clone(),
                assess: *assess,
                seed,
                count,
                observation_len: task.observation_len(),
                action_count: task.action_count(),
            },
            instances,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.str(&serde_json::to_string(&self.header).expect("header serializes"));
        for inst in &self.instances {
            match inst.truth() {
                Truth::Label(l) => {
                    w.u8(0);
                    w.u64(*l as u64);
                }
                Truth::Costs(c) => {
                    w.u8(1);
                    w.f64s(c.values());
                }
                Truth::Cell { row, col, height, width } => {
                    w.u8(2);
                    for v in [row, col, height, width] {
                        w.u64(*v as u64);
                    }
                }
            }
            w.f64s(inst.observation().data());
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != MAGIC {
            return Err("not a dataset file (bad magic)".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("dataset version {version} is not supported (expected {VERSION})"));
        }
        let header: DatasetHeader =
            serde_json::from_str(&r.str()?).map_err(|e| format!("bad dataset header: {e}"))?;
        let kind = header.config.kind();
        let n = header.action_count;
        let mut instances = Vec::with_capacity(header.count.min(1 << 20));
        for i in 0..header.count {
            let truth = match r.u8()? {
                0 => Truth::Label(r.size()?),
                1 => Truth::Costs(CostTable::new(r.f64s()?).map_err(|e| e.to_string())?),
                2 => Truth::Cell {
                    row: r.size()?,
                    col: r.size()?,
                    height: r.size()?,
                    width: r.size()?,
                },
                t => return Err(format!("record {i}: unknown truth tag {t}")),
            };
            let obs = Array::vector(r.f64s()?);
            let inst = TaskInstance::new(kind, obs, truth, n).map_err(|e| format!("record {i}: {e}"))?;
            instances.push(inst);
        }
        if r.remaining() != 0 {
            return Err(format!("{} trailing bytes after {} records", r.remaining(), header.count));
        }
        Ok(Self { header, instances })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        crate::io::write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = crate::io::read_dependency(path, "dataset")?;
        Self::from_bytes(&bytes).map_err(|e| CliError::Dependency(format!("{}: {e}", path.display())))
    }
}
