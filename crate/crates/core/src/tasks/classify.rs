use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{TaskInstance, TaskKind, Truth};
use crate::error::{Error, Result};
use crate::numkit::{Array, Rng};

/// Class-conditional Gaussian features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    #[serde(default = "defaults::classes")]
    pub classes: usize,
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    /// Distance between class means.
    #[serde(default = "defaults::separation")]
    pub separation: f64,
    #[serde(default = "defaults::noise_std")]
    pub noise_std: f64,
    /// Seed for the class-mean directions when `classes > dim`.
    #[serde(default)]
    pub means_seed: u64,
}

mod defaults {
    pub fn classes() -> usize {
        20
    }
    pub fn dim() -> usize {
        16
    }
    pub fn separation() -> f64 {
        3.0
    }
    pub fn noise_std() -> f64 {
        1.0
    }
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            classes: defaults::classes(),
            dim: defaults::dim(),
            separation: defaults::separation(),
            noise_std: defaults::noise_std(),
            means_seed: 0,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.dim < 1 {
            return Err(Error::Argument("classify needs classes >= 2 and dim >= 1".into()));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Argument("class separation must be finite and non-negative".into()));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Argument("noise_std must be positive".into()));
        }
        Ok(())
    }
}

/// Per-class means.
///
/// With `classes <= dim` the means are `s/sqrt(2)` times distinct basis vectors,
/// so every pair sits exactly `s` apart. Otherwise they are `s/sqrt(2)` times
/// random unit directions drawn from `means_seed`, which puts pairs roughly `s`
/// apart in high dimension.
pub fn class_means(cfg: &ClassifyConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let scale = cfg.separation / core::f64::consts::SQRT_2;
    let mut means = Vec::with_capacity(cfg.classes);
    if cfg.classes <= cfg.dim {
        for c in 0..cfg.classes {
            let mut m = vec![0.0; cfg.dim];
            m[c] = scale;
            means.push(m);
        }
    } else {
        let mut rng = Rng::derive(cfg.means_seed, &[0x6d65616e73]);
        for _ in 0..cfg.classes {
            let mut v: Vec<f64> = (0..cfg.dim).map(|_| rng.normal()).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
            v.iter_mut().for_each(|x| *x *= scale / norm);
            means.push(v);
        }
    }
    Ok(means)
}

pub fn gen_classification(cfg: &ClassifyConfig, rng: &mut Rng) -> Result<TaskInstance> {
    let means = class_means(cfg)?;
    let label = rng.below(cfg.classes);
    let x: Vec<f64> = means[label].iter().map(|m| m + cfg.noise_std * rng.normal()).collect();
    TaskInstance::new(TaskKind::Classify, Array::vector(x), Truth::Label(label), cfg.classes)
}
