//! The invariant-observation trial loop.
//!
//! One observation is held fixed for a whole episode. The first action comes from
//! the policy's base affordance map; after every failed assessment the failed
//! index is zeroed in the failure memory and the policy re-chooses among the
//! remaining candidates, until a pass or until the trial budget runs out.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{softmax, Array, Rng};
use crate::tasks::TaskInstance;

pub const DEFAULT_MAX_TRIALS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSet {
    size: usize,
}

impl ActionSet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Argument("action set must contain at least one action".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, action: usize) -> bool {
        action < self.size
    }
}

/// Non-negative action preferences summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceMap {
    values: Vec<f64>,
}

impl AffordanceMap {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("empty affordance map".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Argument("affordance entries must be finite and non-negative".into()));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("affordance map sums to {total}, not 1")));
        }
        Ok(Self { values })
    }

    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        Self::new(softmax(logits)?)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryMode {
    #[default]
    Binary,
    Normalized,
}

/// Per-action trial memory. An action is a candidate while its entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureMemory {
    mode: MemoryMode,
    values: Vec<f64>,
}

impl FailureMemory {
    pub fn mode(&self) -> MemoryMode {
        self.mode
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_candidate(&self, action: usize) -> bool {
        self.values.get(action).is_some_and(|v| *v > 0.0)
    }

    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| i)
    }

    pub fn candidate_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    pub fn exhausted(&self) -> bool {
        self.candidate_count() == 0
    }

    /// Zeroes the entry of `failed_action` in place.
    pub fn mark_failed(&mut self, failed_action: usize) -> Result<()> {
        let n = self.values.len();
        let slot = self
            .values
            .get_mut(failed_action)
            .ok_or_else(|| Error::Argument(format!("action {failed_action} out of range for {n} actions")))?;
        *slot = 0.0;
        Ok(())
    }

    /// Memory rebuilt from an initial state and a list of failed actions.
    pub fn with_failures(initial: &[f64], mode: MemoryMode, failed: &[usize]) -> Result<Self> {
        let mut m = Self {
            mode,
            values: initial.to_vec(),
        };
        for &a in failed {
            m.mark_failed(a)?;
        }
        Ok(m)
    }
}

/// Binary mode starts from all ones; normalized mode copies the affordance map.
pub fn init_memory(mode: MemoryMode, affordance: Option<&AffordanceMap>, n: usize) -> Result<FailureMemory> {
    if n == 0 {
        return Err(Error::Argument("memory over an empty action set".into()));
    }
    let values = match mode {
        MemoryMode::Binary => vec![1.0; n],
        MemoryMode::Normalized => {
            let aff = affordance
                .ok_or_else(|| Error::Argument("normalized memory needs an affordance map".into()))?;
            if aff.len() != n {
                return Err(Error::Dimension {
                    context: "normalized memory",
                    expected: n,
                    got: aff.len(),
                });
            }
            aff.values().to_vec()
        }
    };
    Ok(FailureMemory { mode, values })
}

pub fn update_memory(m: &FailureMemory, failed_action: usize) -> Result<FailureMemory> {
    let mut next = m.clone();
    next.mark_failed(failed_action)?;
    Ok(next)
}

/// Pass/fail result of one self-assessment, with a planning cost for cost-bearing tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssessmentOutcome {
    pub passed: bool,
    pub cost: Option<f64>,
}

impl AssessmentOutcome {
    pub fn pass() -> Self {
        Self {
            passed: true,
            cost: None,
        }
    }

    pub fn fail() -> Self {
        Self {
            passed: false,
            cost: None,
        }
    }

    pub fn with_cost(cost: f64) -> Self {
        Self {
            passed: cost.is_finite(),
            cost: Some(cost),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStep {
    pub action: usize,
    pub outcome: AssessmentOutcome,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TrialStep>,
    pub succeeded: bool,
    pub trials_used: usize,
}

impl EpisodeTrace {
    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    /// Cost of the last assessed action, if the task reports costs.
    pub fn final_cost(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.outcome.cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    #[serde(default = "default_max_trials")]
    pub max_trials: usize,
    #[serde(default)]
    pub memory_mode: MemoryMode,
}

fn default_max_trials() -> usize {
    DEFAULT_MAX_TRIALS
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_trials: DEFAULT_MAX_TRIALS,
            memory_mode: MemoryMode::Binary,
        }
    }
}

/// Per-episode policy state. `hidden` is only used by recurrent policies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyState {
    pub hidden: Option<Array>,
    pub trial_index: usize,
}

/// Everything a policy may look at when choosing the next action.
pub struct Decision<'a> {
    pub observation: &'a Array,
    pub memory: &'a FailureMemory,
    pub trial: usize,
    pub affordance: Option<&'a AffordanceMap>,
    pub state: &'a mut PolicyState,
    pub rng: &'a mut Rng,
}

pub trait Policy: Sync {
    fn name(&self) -> String;

    /// Number of actions this policy was built for, if fixed.
    fn action_count(&self) -> Option<usize>;

    /// Base affordance map for an observation; `None` for policies without one.
    fn affordance(&self, observation: &Array) -> Result<Option<AffordanceMap>>;

    fn select(&self, decision: Decision<'_>) -> Result<usize>;

    /// State at episode start.
    fn initial_state(&self) -> PolicyState {
        PolicyState::default()
    }
}

pub trait Oracle {
    fn assess(&self, instance: &TaskInstance, action: usize) -> Result<AssessmentOutcome>;
}

/// Runs one episode on `instance` and returns its trace.
pub fn run_episode(
    policy: &dyn Policy,
    instance: &TaskInstance,
    oracle: &dyn Oracle,
    cfg: &EpisodeConfig,
    rng: &mut Rng,
) -> Result<EpisodeTrace> {
    if cfg.max_trials == 0 {
        return Err(Error::Argument("max_trials must be at least 1".into()));
    }
    let n = instance.action_count();
    let actions = ActionSet::new(n)?;
    if let Some(p) = policy.action_count() {
        if p != n {
            return Err(Error::Argument(format!(
                "policy `{}` expects {p} actions, instance has {n}",
                policy.name()
            )));
        }
    }
    let observation = instance.observation();
    let affordance = policy.affordance(observation)?;
    let mut memory = init_memory(cfg.memory_mode, affordance.as_ref(), n)?;
    let mut state = policy.initial_state();
    let mut trace = EpisodeTrace::default();

    for trial in 0..cfg.max_trials {
        if memory.exhausted() {
            break;
        }
        state.trial_index = trial;
        let action = policy.select(Decision {
            observation,
            memory: &memory,
            trial,
            affordance: affordance.as_ref(),
            state: &mut state,
            rng,
        })?;
        if !actions.contains(action) {
            return Err(Error::ProtocolViolation {
                action,
                reason: "action index out of range",
            });
        }
        if !memory.is_candidate(action) {
            return Err(Error::ProtocolViolation {
                action,
                reason: "action already failed",
            });
        }
        let outcome = oracle.assess(instance, action)?;
        trace.steps.push(TrialStep { action, outcome });
        trace.trials_used += 1;
        if outcome.passed {
            trace.succeeded = true;
            break;
        }
        memory.mark_failed(action)?;
    }
    Ok(trace)
}
