use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use super::metrics::{compute_metrics, MetricsReport};
use crate::episode::{run_episode, EpisodeConfig, EpisodeTrace, Policy};
use crate::error::{Error, Result};
use crate::numkit::Rng;
use crate::tasks::{AssessConfig, GroundTruth, TaskConfig};

const INSTANCE_STREAM: u64 = 0x6576_616c;
const POLICY_STREAM: u64 = 0x706f_6c69;

/// Generator for evaluation instance `index` under `seed`.
pub fn instance_rng(seed: u64, index: usize) -> Rng {
    Rng::derive(seed, &[INSTANCE_STREAM, index as u64])
}

/// Policy randomness for evaluation episode `index` under `seed`.
pub fn policy_rng(seed: u64, index: usize) -> Rng {
    Rng::derive(seed, &[POLICY_STREAM, index as u64])
}

/// Runs episodes `range` of the evaluation stream of `seed`.
///
/// Every episode draws its instance and its policy randomness from streams keyed
/// by its index, so disjoint ranges can run anywhere and concatenate to the same
/// traces as one pass.
pub fn evaluate(
    policy: &dyn Policy,
    task: &TaskConfig,
    assess: &AssessConfig,
    episode: &EpisodeConfig,
    seed: u64,
    range: Range<usize>,
) -> Result<Vec<EpisodeTrace>> {
    task.validate()?;
    if let Some(n) = policy.action_count() {
        if n != task.action_count() {
            return Err(Error::Argument(alloc::format!(
                "policy `{}` has {n} actions, task has {}",
                policy.name(),
                task.action_count()
            )));
        }
    }
    let oracle = GroundTruth(*assess);
    range
        .map(|i| {
            let instance = task.generate(&mut instance_rng(seed, i))?;
            run_episode(policy, &instance, &oracle, episode, &mut policy_rng(seed, i))
        })
        .collect()
}

pub struct SuiteCell<'a> {
    pub policy: &'a dyn Policy,
    pub task_label: String,
    pub task: &'a TaskConfig,
    pub assess: AssessConfig,
    pub episode: EpisodeConfig,
    pub seed: u64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub policy: String,
    pub task: String,
    pub seed: u64,
    pub report: MetricsReport,
}

/// Metrics for every cell, in order.
pub fn run_suite(cells: &[SuiteCell<'_>]) -> Result<Vec<SuiteRow>> {
    cells
        .iter()
        .map(|c| {
            if c.episodes == 0 {
                return Err(Error::Argument("suite cell with zero episodes".into()));
            }
            let traces = evaluate(c.policy, c.task, &c.assess, &c.episode, c.seed, 0..c.episodes)?;
            Ok(SuiteRow {
                policy: c.policy.name(),
                task: c.task_label.clone(),
                seed: c.seed,
                report: compute_metrics(&traces)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::RandomPolicy;
    use crate::tasks::ClassifyConfig;

    #[test]
    fn split_ranges_concatenate() {
        let task = TaskConfig::Classify(ClassifyConfig::default());
        let p = RandomPolicy::default();
        let cfg = EpisodeConfig::default();
        let a = AssessConfig::default();
        let whole = evaluate(&p, &task, &a, &cfg, 3, 0..40).unwrap();
        let mut parts = evaluate(&p, &task, &a, &cfg, 3, 0..17).unwrap();
        parts.extend(evaluate(&p, &task, &a, &cfg, 3, 17..40).unwrap());
        assert_eq!(whole, parts);
    }

    #[test]
    fn action_mismatch_rejected() {
        let task = TaskConfig::Classify(ClassifyConfig::default());
        let p = RandomPolicy { actions: Some(7) };
        let err = evaluate(&p, &task, &AssessConfig::default(), &EpisodeConfig::default(), 0, 0..1);
        assert!(matches!(err, Err(Error::Argument(_))));
    }
}
