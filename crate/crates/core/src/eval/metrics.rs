use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::episode::EpisodeTrace;
use crate::error::{Error, Result};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub episodes: usize,
    pub tsr: f64,
    pub tns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: usize,
    pub successes: usize,
    /// Success rate over all episodes.
    pub tsr: f64,
    /// Wilson 95% interval on `tsr`.
    pub tsr_ci: (f64, f64),
    /// Mean trials over successful episodes; `None` when nothing succeeded.
    pub tns: Option<f64>,
    /// Normal 95% interval on `tns`.
    pub tns_ci: Option<(f64, f64)>,
    /// Mean of `100 / cost` with failures counted as 0; `None` for tasks without costs.
    pub pc_recip: Option<f64>,
    pub per_seed: Vec<SeedMetrics>,
}

/// Wilson score interval for `successes` out of `n` at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> Result<(f64, f64)> {
    if n == 0 || successes > n {
        return Err(Error::Argument("wilson interval needs 0 <= successes <= n, n > 0".into()));
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}

/// Normal-approximation 95% interval on a sample mean.
pub fn mean_interval(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Argument("interval of an empty sample".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Ok((mean, mean));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let half = Z95 * libm::sqrt(var / n);
    Ok((mean - half, mean + half))
}

/// Metrics over a set of episodes. The result does not depend on trace order.
pub fn compute_metrics(traces: &[EpisodeTrace]) -> Result<MetricsReport> {
    if traces.is_empty() {
        return Err(Error::Argument("no traces to summarize".into()));
    }
    let episodes = traces.len();
    let trials: Vec<f64> = traces
        .iter()
        .filter(|t| t.succeeded)
        .map(|t| t.trials_used as f64)
        .collect();
    let successes = trials.len();
    let tsr = successes as f64 / episodes as f64;
    let (tns, tns_ci) = if trials.is_empty() {
        (None, None)
    } else {
        (
            Some(trials.iter().sum::<f64>() / successes as f64),
            Some(mean_interval(&trials)?),
        )
    };
    let has_cost = traces.iter().any(|t| t.steps.iter().any(|s| s.outcome.cost.is_some()));
    let pc_recip = if has_cost {
        let mut recips: Vec<f64> = traces
            .iter()
            .map(|t| match t.final_cost() {
                Some(c) if t.succeeded && c > 0.0 && c.is_finite() => 100.0 / c,
                _ => 0.0,
            })
            .collect();
        recips.sort_by(f64::total_cmp);
        Some(recips.iter().sum::<f64>() / episodes as f64)
    } else {
        None
    };
    Ok(MetricsReport {
        episodes,
        successes,
        tsr,
        tsr_ci: wilson_interval(successes, episodes)?,
        tns,
        tns_ci,
        pc_recip,
        per_seed: Vec::new(),
    })
}

/// Pools per-seed trace sets into one report with a per-seed breakdown.
pub fn merge_seeds(per_seed: &[(u64, &[EpisodeTrace])]) -> Result<MetricsReport> {
    let mut all = Vec::new();
    let mut breakdown = Vec::with_capacity(per_seed.len());
    for (seed, traces) in per_seed {
        let r = compute_metrics(traces)?;
        breakdown.push(SeedMetrics {
            seed: *seed,
            episodes: r.episodes,
            tsr: r.tsr,
            tns: r.tns,
        });
        all.extend_from_slice(traces);
    }
    let mut report = compute_metrics(&all)?;
    report.per_seed = breakdown;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{AssessmentOutcome, TrialStep};
    use alloc::vec;

    fn trace(outcomes: &[AssessmentOutcome]) -> EpisodeTrace {
        EpisodeTrace {
            steps: outcomes
                .iter()
                .enumerate()
                .map(|(i, o)| TrialStep { action: i, outcome: *o })
                .collect(),
            succeeded: outcomes.last().is_some_and(|o| o.passed),
            trials_used: outcomes.len(),
        }
    }

    #[test]
    fn success_rate_and_trials() {
        let p = AssessmentOutcome::pass();
        let f = AssessmentOutcome::fail();
        let traces = vec![trace(&[p]), trace(&[f, f, p]), trace(&[f, f, f, f, f])];
        let r = compute_metrics(&traces).unwrap();
        assert!((r.tsr - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.tns, Some(2.0));
        assert_eq!(r.pc_recip, None);
    }

    #[test]
    fn reciprocal_cost_with_failures_as_zero() {
        let traces = vec![
            trace(&[AssessmentOutcome::with_cost(50.0)]),
            trace(&[AssessmentOutcome::with_cost(f64::INFINITY)]),
        ];
        assert_eq!(compute_metrics(&traces).unwrap().pc_recip, Some(1.0));
    }

    #[test]
    fn no_success_means_undefined_tns() {
        let r = compute_metrics(&[trace(&[AssessmentOutcome::fail()])]).unwrap();
        assert_eq!(r.tns, None);
        assert_eq!(r.tsr, 0.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(compute_metrics(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn wilson_reference() {
        let (lo, hi) = wilson_interval(25, 100).unwrap();
        assert!((lo - 0.175_452_113_6).abs() < 1e-9, "{lo}");
        assert!((hi - 0.343_044_635_5).abs() < 1e-9, "{hi}");
        assert_eq!(wilson_interval(0, 10).unwrap().0, 0.0);
    }
}
