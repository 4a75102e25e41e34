use serde::{Deserialize, Serialize};

use crate::episode::{MemoryMode, DEFAULT_MAX_TRIALS};
use crate::error::{Error, Result};
use crate::numkit::{LossKind, OptimizerConfig};
use crate::tasks::TaskKind;

/// Behavior-cloning settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    #[serde(default = "bc_optimizer")]
    pub optimizer: OptimizerConfig,
    #[serde(default = "bc_loss")]
    pub loss: LossKind,
    #[serde(default = "bc_epochs")]
    pub epochs: usize,
    #[serde(default = "bc_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn bc_optimizer() -> OptimizerConfig {
    OptimizerConfig::adam(3e-3, 0.9, 0.999, 0.0)
}

fn bc_loss() -> LossKind {
    LossKind::SmoothL1
}

fn bc_epochs() -> usize {
    30
}

fn bc_batch() -> usize {
    32
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            optimizer: bc_optimizer(),
            loss: bc_loss(),
            epochs: bc_epochs(),
            batch_size: bc_batch(),
            seed: 0,
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Argument("epochs and batch size must be positive".into()));
        }
        Ok(())
    }
}

/// DQN settings for a failure-aware head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub loss: LossKind,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::max_trials")]
    pub max_trials: usize,
    #[serde(default)]
    pub memory_mode: MemoryMode,
    #[serde(default = "defaults::epsilon_start")]
    pub epsilon_start: f64,
    #[serde(default = "defaults::epsilon_end")]
    pub epsilon_end: f64,
    /// Episodes over which epsilon decays linearly; half of `episodes` when absent.
    #[serde(default)]
    pub epsilon_decay_episodes: Option<usize>,
    #[serde(default = "defaults::buffer_capacity")]
    pub buffer_capacity: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    /// Gradient steps between hard target-network syncs.
    #[serde(default = "defaults::target_sync")]
    pub target_sync: usize,
    #[serde(default = "defaults::episodes")]
    pub episodes: usize,
    /// Environment steps per gradient step.
    #[serde(default = "defaults::train_every")]
    pub train_every: usize,
    /// Transitions collected before the first gradient step; `batch_size` when absent.
    #[serde(default)]
    pub warmup: Option<usize>,
    /// Weight of the `100 / cost` bonus added to a passing reward. Zero keeps rewards binary.
    #[serde(default)]
    pub reward_bonus: f64,
    #[serde(default = "defaults::log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn gamma() -> f64 {
        0.2
    }
    pub fn max_trials() -> usize {
        super::DEFAULT_MAX_TRIALS
    }
    pub fn epsilon_start() -> f64 {
        1.0
    }
    pub fn epsilon_end() -> f64 {
        0.05
    }
    pub fn buffer_capacity() -> usize {
        10_000
    }
    pub fn batch_size() -> usize {
        64
    }
    pub fn target_sync() -> usize {
        500
    }
    pub fn episodes() -> usize {
        10_000
    }
    pub fn train_every() -> usize {
        1
    }
    pub fn log_every() -> usize {
        100
    }
}

impl TrainConfig {
    /// Per-task optimizer and loss defaults.
    pub fn for_task(kind: TaskKind) -> Self {
        let (optimizer, loss) = match kind {
            TaskKind::Classify => (OptimizerConfig::sgd(1e-4, 0.9, 1.0 / 32.0), LossKind::L1),
            TaskKind::Correlated => (OptimizerConfig::adam(1e-4, 0.9, 0.99, 1.0 / 32.0), LossKind::SmoothL1),
            TaskKind::Localize => (OptimizerConfig::adam(1e-3, 0.9, 0.999, 1.0 / 64.0), LossKind::SmoothL1),
        };
        Self {
            optimizer,
            loss,
            gamma: defaults::gamma(),
            max_trials: defaults::max_trials(),
            memory_mode: MemoryMode::Binary,
            epsilon_start: defaults::epsilon_start(),
            epsilon_end: defaults::epsilon_end(),
            epsilon_decay_episodes: None,
            buffer_capacity: defaults::buffer_capacity(),
            batch_size: defaults::batch_size(),
            target_sync: defaults::target_sync(),
            episodes: defaults::episodes(),
            train_every: defaults::train_every(),
            warmup: None,
            reward_bonus: 0.0,
            log_every: defaults::log_every(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Argument("gamma must lie in [0, 1)".into()));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) {
            return Err(Error::Argument("epsilon must lie in [0, 1]".into()));
        }
        if self.max_trials == 0
            || self.buffer_capacity == 0
            || self.batch_size == 0
            || self.target_sync == 0
            || self.train_every == 0
            || self.log_every == 0
        {
            return Err(Error::Argument("counts in the training config must be positive".into()));
        }
        if !(self.reward_bonus >= 0.0 && self.reward_bonus.is_finite()) {
            return Err(Error::Argument("reward bonus must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn warmup(&self) -> usize {
        self.warmup.unwrap_or(self.batch_size)
    }

    /// Linearly decayed exploration rate for `episode`.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let span = self.epsilon_decay_episodes.unwrap_or(self.episodes / 2);
        if span == 0 || episode >= span {
            return self.epsilon_end;
        }
        let frac = episode as f64 / span as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}
