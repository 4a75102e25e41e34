//! TOML run configuration.
//!
//! Every section rejects unknown keys. Sections a command does not use may be
//! present and are ignored, so one file can drive a whole pipeline.

use std::path::{Path, PathBuf};

use failaware_core::episode::{EpisodeConfig, MemoryMode};
use failaware_core::numkit::{LossKind, OptimizerConfig};
use failaware_core::policies::{BaseArchitecture, FaArchitecture};
use failaware_core::tasks::{AssessConfig, TaskConfig};
use failaware_core::training::{BcConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "format_version")]
    pub format_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub task: TaskConfig,
    #[serde(default)]
    pub assess: AssessConfig,
    #[serde(default)]
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub policy: ArchSection,
    #[serde(default)]
    pub bc: BcSection,
    #[serde(default)]
    pub fa: Option<FaSection>,
    #[serde(default)]
    pub eval: Option<EvalSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub plot: Option<PlotSection>,
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub count: usize,
    #[serde(default = "default_dataset_file")]
    pub file: String,
}

fn default_dataset_file() -> String {
    "dataset.fad".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSection {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_features")]
    pub features_per_action: usize,
}

fn default_hidden() -> usize {
    64
}

fn default_features() -> usize {
    1
}

impl Default for ArchSection {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            features_per_action: default_features(),
        }
    }
}

impl ArchSection {
    pub fn architecture(&self, task: &TaskConfig) -> BaseArchitecture {
        BaseArchitecture {
            input: task.observation_len(),
            actions: task.action_count(),
            hidden: self.hidden,
            features_per_action: self.features_per_action,
        }
    }
}

/// Behavior cloning. Without `dataset`, `instances` training samples are generated in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub instances: Option<usize>,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub loss: Option<LossKind>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

impl BcSection {
    pub fn instances(&self) -> usize {
        self.instances.unwrap_or(2000)
    }

    pub fn config(&self, seed: u64) -> BcConfig {
        let d = BcConfig::default();
        BcConfig {
            optimizer: self.optimizer.unwrap_or(d.optimizer),
            loss: self.loss.unwrap_or(d.loss),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            seed,
        }
    }
}

/// Failure-aware training; unset fields take the task's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaSection {
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    pub architecture: FaArchitecture,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub loss: Option<LossKind>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub memory_mode: Option<MemoryMode>,
    #[serde(default)]
    pub epsilon_start: Option<f64>,
    #[serde(default)]
    pub epsilon_end: Option<f64>,
    #[serde(default)]
    pub epsilon_decay_episodes: Option<usize>,
    #[serde(default)]
    pub buffer_capacity: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub target_sync: Option<usize>,
    #[serde(default)]
    pub episodes: Option<usize>,
    #[serde(default)]
    pub train_every: Option<usize>,
    #[serde(default)]
    pub warmup: Option<usize>,
    #[serde(default)]
    pub reward_bonus: Option<f64>,
    #[serde(default)]
    pub log_every: Option<usize>,
}

impl FaSection {
    pub fn new(architecture: FaArchitecture) -> Self {
        Self {
            checkpoint: None,
            architecture,
            optimizer: None,
            loss: None,
            gamma: None,
            memory_mode: None,
            epsilon_start: None,
            epsilon_end: None,
            epsilon_decay_episodes: None,
            buffer_capacity: None,
            batch_size: None,
            target_sync: None,
            episodes: None,
            train_every: None,
            warmup: None,
            reward_bonus: None,
            log_every: None,
        }
    }

    pub fn train_config(&self, task: &TaskConfig, episode: &EpisodeConfig, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::for_task(task.kind());
        c.max_trials = episode.max_trials;
        c.memory_mode = self.memory_mode.unwrap_or(episode.memory_mode);
        c.seed = seed;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            optimizer,
            loss,
            gamma,
            epsilon_start,
            epsilon_end,
            buffer_capacity,
            batch_size,
            target_sync,
            episodes,
            train_every,
            reward_bonus,
            log_every
        );
        if self.epsilon_decay_episodes.is_some() {
            c.epsilon_decay_episodes = self.epsilon_decay_episodes;
        }
        if self.warmup.is_some() {
            c.warmup = self.warmup;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Re,
    Lpre,
    Sp,
    /// A failure-aware head loaded from a checkpoint.
    Fa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    /// Evaluation seeds; the master seed when empty.
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicySpec>,
}

fn default_episodes() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    CorrelationLength,
    K,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::CorrelationLength => "correlation_length",
            SweepAxis::K => "k",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPolicy {
    pub kind: PolicyKind,
    /// Head trained per sweep point for `kind = "fa"`.
    #[serde(default)]
    pub architecture: Option<FaArchitecture>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub policies: Vec<SweepPolicy>,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_true")]
    pub plot: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSection {
    pub csv: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::Config(format!("config file {} not found", path.display()))
            } else {
                CliError::io(path, e)
            }
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Config(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.task.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.episode.max_trials == 0 {
            return Err(CliError::Config("episode.max_trials must be at least 1".into()));
        }
        if matches!(self.task, TaskConfig::Localize(_)) && self.assess.k.is_multiple_of(2) {
            return Err(CliError::Config(format!("assess.k = {} must be odd", self.assess.k)));
        }
        Ok(())
    }

    /// Canonical JSON echo of the configuration.
    /// Everything that determines a run's results. The output directory is left
    /// out so the same run written to two places produces the same bytes.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("out");
        }
        v
    }

    pub fn eval_seeds(&self, seeds: &[u64]) -> Vec<u64> {
        if seeds.is_empty() {
            vec![self.seed]
        } else {
            seeds.to_vec()
        }
    }
}
