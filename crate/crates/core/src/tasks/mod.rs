//! Synthetic self-assessable tasks: classification, correlated feasibility and grid localization.

mod classify;
mod correlated;
mod localize;

pub use classify::{class_means, gen_classification, ClassifyConfig};
pub use correlated::{gen_correlated, inverse_normal_cdf, CorrelatedConfig, CostTable};
pub use localize::{gen_localization, gen_map, raycast, GridMap, LocalizeConfig, Pose};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::episode::{AssessmentOutcome, Oracle};
use crate::error::{Error, Result};
use crate::numkit::{softmax, Array, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Classify,
    Correlated,
    Localize,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Classify => "classify",
            TaskKind::Correlated => "correlated",
            TaskKind::Localize => "localize",
        }
    }
}

/// Hidden ground truth of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truth {
    Label(usize),
    Costs(CostTable),
    Cell { row: usize, col: usize, height: usize, width: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    kind: TaskKind,
    observation: Array,
    truth: Truth,
    action_count: usize,
}

impl TaskInstance {
    /// Builds an instance, checking that the truth matches the kind and size.
    pub fn new(kind: TaskKind, observation: Array, truth: Truth, action_count: usize) -> Result<Self> {
        let ok = match (&kind, &truth) {
            (TaskKind::Classify, Truth::Label(l)) => *l < action_count,
            (TaskKind::Correlated, Truth::Costs(c)) => c.len() == action_count && c.feasible_count() > 0,
            (TaskKind::Localize, Truth::Cell { row, col, height, width }) => {
                height * width == action_count && row < height && col < width
            }
            _ => false,
        };
        if !ok || action_count == 0 {
            return Err(Error::Argument(format!(
                "inconsistent {} instance of {action_count} actions",
                kind.as_str()
            )));
        }
        Ok(Self {
            kind,
            observation,
            truth,
            action_count,
        })
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn observation(&self) -> &Array {
        &self.observation
    }

    pub fn truth(&self) -> &Truth {
        &self.truth
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskConfig {
    Classify(ClassifyConfig),
    Correlated(CorrelatedConfig),
    Localize(LocalizeConfig),
}

impl TaskConfig {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskConfig::Classify(_) => TaskKind::Classify,
            TaskConfig::Correlated(_) => TaskKind::Correlated,
            TaskConfig::Localize(_) => TaskKind::Localize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TaskConfig::Classify(c) => c.validate(),
            TaskConfig::Correlated(c) => c.validate(),
            TaskConfig::Localize(c) => c.validate(),
        }
    }

    pub fn action_count(&self) -> usize {
        match self {
            TaskConfig::Classify(c) => c.classes,
            TaskConfig::Correlated(c) => c.actions,
            TaskConfig::Localize(c) => c.height * c.width,
        }
    }

    pub fn observation_len(&self) -> usize {
        match self {
            TaskConfig::Classify(c) => c.dim,
            TaskConfig::Correlated(c) => c.actions,
            TaskConfig::Localize(c) => c.height * c.width + c.beams,
        }
    }

    pub fn generate(&self, rng: &mut Rng) -> Result<TaskInstance> {
        match self {
            TaskConfig::Classify(c) => gen_classification(c, rng),
            TaskConfig::Correlated(c) => gen_correlated(c, rng),
            TaskConfig::Localize(c) => gen_localization(c, rng),
        }
    }

    /// Behavior-cloning target distribution for `instance`.
    ///
    /// Classification uses the one-hot label, correlated feasibility a softmax of
    /// negative cost, and localization a Gaussian blob of width `k/3` around the
    /// true cell.
    pub fn bc_target(&self, instance: &TaskInstance, assess: &AssessConfig) -> Result<Vec<f64>> {
        if instance.kind() != self.kind() || instance.action_count() != self.action_count() {
            return Err(Error::Argument("instance does not match task config".into()));
        }
        match (self, instance.truth()) {
            (TaskConfig::Classify(_), Truth::Label(l)) => {
                let mut t = vec![0.0; instance.action_count()];
                t[*l] = 1.0;
                Ok(t)
            }
            (TaskConfig::Correlated(c), Truth::Costs(costs)) => {
                let logits: Vec<f64> = costs
                    .values()
                    .iter()
                    .map(|v| if v.is_finite() { -v / c.bc_temperature } else { -1e9 })
                    .collect();
                softmax(&logits)
            }
            (TaskConfig::Localize(_), Truth::Cell { row, col, height, width }) => {
                assess.check_k()?;
                let sigma = assess.k as f64 / 3.0;
                let mut t = Vec::with_capacity(height * width);
                for r in 0..*height {
                    for c in 0..*width {
                        let dr = r as f64 - *row as f64;
                        let dc = c as f64 - *col as f64;
                        t.push(libm::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma)));
                    }
                }
                let total: f64 = t.iter().sum();
                t.iter_mut().for_each(|v| *v /= total);
                Ok(t)
            }
            _ => Err(Error::Argument("instance truth does not match its kind".into())),
        }
    }
}

/// Anything that can hand out task instances for training.
pub trait InstanceSource {
    fn action_count(&self) -> usize;
    fn observation_len(&self) -> usize;
    fn draw(&self, rng: &mut Rng) -> Result<TaskInstance>;
}

impl InstanceSource for TaskConfig {
    fn action_count(&self) -> usize {
        TaskConfig::action_count(self)
    }

    fn observation_len(&self) -> usize {
        TaskConfig::observation_len(self)
    }

    fn draw(&self, rng: &mut Rng) -> Result<TaskInstance> {
        self.generate(rng)
    }
}

/// A fixed list of instances drawn uniformly with replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePool {
    instances: Vec<TaskInstance>,
}

impl InstancePool {
    pub fn new(instances: Vec<TaskInstance>) -> Result<Self> {
        let first = instances
            .first()
            .ok_or_else(|| Error::Argument("empty instance pool".into()))?;
        let (n, d) = (first.action_count(), first.observation().len());
        if instances.iter().any(|i| i.action_count() != n || i.observation().len() != d) {
            return Err(Error::Argument("instance pool mixes shapes".into()));
        }
        Ok(Self { instances })
    }

    pub fn instances(&self) -> &[TaskInstance] {
        &self.instances
    }
}

impl InstanceSource for InstancePool {
    fn action_count(&self) -> usize {
        self.instances[0].action_count()
    }

    fn observation_len(&self) -> usize {
        self.instances[0].observation().len()
    }

    fn draw(&self, rng: &mut Rng) -> Result<TaskInstance> {
        Ok(self.instances[rng.below(self.instances.len())].clone())
    }
}

/// Oracle settings. `k` is the full width of the localization success box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessConfig {
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    5
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self { k: default_k() }
    }
}

impl AssessConfig {
    fn check_k(&self) -> Result<()> {
        if self.k.is_multiple_of(2) {
            return Err(Error::Argument(format!("neighborhood size k={} must be odd", self.k)));
        }
        Ok(())
    }
}

/// Ground-truth self-assessment of `action` on `instance`.
pub fn assess(instance: &TaskInstance, action: usize, cfg: &AssessConfig) -> Result<AssessmentOutcome> {
    if action >= instance.action_count() {
        return Err(Error::Argument(format!(
            "action {action} out of range for {} actions",
            instance.action_count()
        )));
    }
    match instance.truth() {
        Truth::Label(l) => Ok(if action == *l {
            AssessmentOutcome::pass()
        } else {
            AssessmentOutcome::fail()
        }),
        Truth::Costs(costs) => Ok(AssessmentOutcome::with_cost(costs.values()[action])),
        Truth::Cell { row, col, width, .. } => {
            cfg.check_k()?;
            let half = cfg.k / 2;
            let (r, c) = (action / width, action % width);
            let passed = r.abs_diff(*row) <= half && c.abs_diff(*col) <= half;
            Ok(if passed {
                AssessmentOutcome::pass()
            } else {
                AssessmentOutcome::fail()
            })
        }
    }
}

/// [`assess`] bound to a fixed config.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruth(pub AssessConfig);

impl Oracle for GroundTruth {
    fn assess(&self, instance: &TaskInstance, action: usize) -> Result<AssessmentOutcome> {
        assess(instance, action, &self.0)
    }
}
