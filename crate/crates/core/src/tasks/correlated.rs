use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{TaskInstance, TaskKind, Truth};
use crate::error::{Error, Result};
use crate::numkit::{argmax, Array, Rng};

/// Per-action planning cost; infinite for infeasible actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    #[serde(with = "infinite_as_null")]
    values: Vec<f64>,
}

impl CostTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan() || *v < 0.0 || *v == f64::NEG_INFINITY) {
            return Err(Error::Argument("costs must be non-negative or +infinity".into()));
        }
        Ok(Self { values })
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

    pub fn is_feasible(&self, action: usize) -> bool {
        self.values.get(action).is_some_and(|v| v.is_finite())
    }

    pub fn feasible_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }
}

mod infinite_as_null {
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

/// Thresholded smooth random field over a ring of candidate actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatedConfig {
    #[serde(default = "defaults::actions")]
    pub actions: usize,
    /// Gaussian kernel length over circular index distance; 0 gives independent actions.
    #[serde(default = "defaults::correlation_length")]
    pub correlation_length: f64,
    #[serde(default = "defaults::feasible_fraction")]
    pub feasible_fraction: f64,
    /// Standard deviation of the observation noise added to the field.
    #[serde(default = "defaults::noise")]
    pub noise: f64,
    #[serde(default = "defaults::base_cost")]
    pub base_cost: f64,
    /// Extra cost per index step away from the field's peak.
    #[serde(default = "defaults::distance_penalty")]
    pub distance_penalty: f64,
    /// Softmax temperature of the cloning target.
    #[serde(default = "defaults::bc_temperature")]
    pub bc_temperature: f64,
}

mod defaults {
    pub fn actions() -> usize {
        25
    }
    pub fn correlation_length() -> f64 {
        5.0
    }
    pub fn feasible_fraction() -> f64 {
        0.1
    }
    pub fn noise() -> f64 {
        3.0
    }
    pub fn base_cost() -> f64 {
        50.0
    }
    pub fn distance_penalty() -> f64 {
        10.0
    }
    pub fn bc_temperature() -> f64 {
        2.5
    }
}

impl Default for CorrelatedConfig {
    fn default() -> Self {
        Self {
            actions: defaults::actions(),
            correlation_length: defaults::correlation_length(),
            feasible_fraction: defaults::feasible_fraction(),
            noise: defaults::noise(),
            base_cost: defaults::base_cost(),
            distance_penalty: defaults::distance_penalty(),
            bc_temperature: defaults::bc_temperature(),
        }
    }
}

impl CorrelatedConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if self.actions < 2 {
            return Err(Error::Argument("correlated task needs at least 2 actions".into()));
        }
        if !finite_nonneg(self.correlation_length) {
            return Err(Error::Argument("correlation length must be finite and >= 0".into()));
        }
        if !(self.feasible_fraction > 0.0 && self.feasible_fraction < 1.0) {
            return Err(Error::Argument("feasible fraction must lie in (0, 1)".into()));
        }
        if !finite_nonneg(self.noise) || !finite_nonneg(self.base_cost) || !finite_nonneg(self.distance_penalty) {
            return Err(Error::Argument("noise and costs must be finite and >= 0".into()));
        }
        if !(self.bc_temperature > 0.0 && self.bc_temperature.is_finite()) {
            return Err(Error::Argument("bc temperature must be positive".into()));
        }
        Ok(())
    }
}

/// Standard normal quantile, by bisection on the complementary error function.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument("quantile level must lie in (0, 1)".into()));
    }
    let cdf = |x: f64| 0.5 * libm::erfc(-x / core::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn ring_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Unit-variance field: white noise smoothed by a circular Gaussian kernel.
fn smooth_field(n: usize, length: f64, rng: &mut Rng) -> Vec<f64> {
    let xi: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    if length == 0.0 {
        return xi;
    }
    let kernel: Vec<f64> = (0..n)
        .map(|d| {
            let d = ring_distance(0, d, n) as f64;
            libm::exp(-d * d / (2.0 * length * length))
        })
        .collect();
    let norm = libm::sqrt(kernel.iter().map(|k| k * k).sum::<f64>());
    (0..n)
        .map(|i| (0..n).map(|j| kernel[ring_distance(i, j, n)] * xi[j]).sum::<f64>() / norm)
        .collect()
}

pub fn gen_correlated(cfg: &CorrelatedConfig, rng: &mut Rng) -> Result<TaskInstance> {
    cfg.validate()?;
    let n = cfg.actions;
    let threshold = inverse_normal_cdf(1.0 - cfg.feasible_fraction)?;
    let field = loop {
        let g = smooth_field(n, cfg.correlation_length, rng);
        if g.iter().any(|v| *v > threshold) {
            break g;
        }
    };
    let peak = argmax(&field).ok_or_else(|| Error::Generation("empty field".into()))?;
    let costs: Vec<f64> = field
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if *v > threshold {
                cfg.base_cost + cfg.distance_penalty * ring_distance(i, peak, n) as f64
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let obs: Vec<f64> = field.iter().map(|g| g + cfg.noise * rng.normal()).collect();
    TaskInstance::new(
        TaskKind::Correlated,
        Array::vector(obs),
        Truth::Costs(CostTable::new(costs)?),
        n,
    )
}
