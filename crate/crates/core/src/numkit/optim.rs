//! First-order optimizers with decoupled weight decay.
//!
//! Weight decay is applied to the weights directly (`w -= lr * wd * w`, using the
//! pre-step value), never folded into the gradient. Frozen parameters are skipped
//! and stay bitwise identical.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OptimizerConfig {
    SgdMomentum {
        lr: f64,
        momentum: f64,
        weight_decay: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        weight_decay: f64,
    },
}

fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn sgd(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Self::SgdMomentum {
            lr,
            momentum,
            weight_decay,
        }
    }

    pub fn adam(lr: f64, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        Self::Adam {
            lr,
            beta1,
            beta2,
            eps: default_eps(),
            weight_decay,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Self::SgdMomentum { lr, .. } | Self::Adam { lr, .. } => lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Option<Vec<f64>>>,
    second: Vec<Option<Vec<f64>>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every trainable parameter of `params`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Consistency(format!(
                "gradient set covers {} parameters, parameter set has {}",
                grads.len(),
                params.len()
            )));
        }
        for i in 0..params.len() {
            let p = params.param(i);
            if p.trainable && grads.get(i).is_none() {
                return Err(Error::Consistency(format!(
                    "missing gradient for trainable parameter `{}`",
                    p.name
                )));
            }
        }
        if self.first.len() != params.len() {
            self.first = vec![None; params.len()];
            self.second = vec![None; params.len()];
        }
        self.steps += 1;
        let t = self.steps as f64;
        for i in 0..params.len() {
            let param = params.param_mut(i);
            if !param.trainable {
                continue;
            }
            let g = grads.get(i).expect("checked above");
            let w = param.value.data_mut();
            if g.len() != w.len() {
                return Err(Error::Dimension {
                    context: "optimizer gradient",
                    expected: w.len(),
                    got: g.len(),
                });
            }
            let m = self.first[i].get_or_insert_with(|| vec![0.0; w.len()]);
            match self.config {
                OptimizerConfig::SgdMomentum {
                    lr,
                    momentum,
                    weight_decay,
                } => {
                    for ((wi, gi), vi) in w.iter_mut().zip(g).zip(m.iter_mut()) {
                        *vi = momentum * *vi + gi;
                        *wi -= lr * *vi + lr * weight_decay * *wi;
                    }
                }
                OptimizerConfig::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                    weight_decay,
                } => {
                    let v = self.second[i].get_or_insert_with(|| vec![0.0; w.len()]);
                    let c1 = 1.0 - libm::pow(beta1, t);
                    let c2 = 1.0 - libm::pow(beta2, t);
                    for (((wi, gi), mi), vi) in w.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *wi -= lr * (mhat / (libm::sqrt(vhat) + eps) + weight_decay * *wi);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Array;

    fn single(value: f64, trainable: bool) -> (ParamSet, Grads) {
        let mut p = ParamSet::new();
        p.insert("w", Array::vector(vec![value]), trainable).unwrap();
        let mut g = Grads::for_params(&p);
        g.set(0, vec![1.0]);
        (p, g)
    }

    #[test]
    fn sgd_momentum_recursion() {
        let (mut p, g) = single(0.0, true);
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1, 0.9, 0.0));
        opt.step(&mut p, &g).unwrap();
        assert!((p.get("w").unwrap().data()[0] + 0.1).abs() < 1e-15);
        opt.step(&mut p, &g).unwrap();
        assert!((p.get("w").unwrap().data()[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn frozen_parameter_untouched() {
        let (mut p, g) = single(0.75, false);
        let mut opt = Optimizer::new(OptimizerConfig::adam(0.1, 0.9, 0.99, 0.5));
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p.get("w").unwrap().data()[0].to_bits(), 0.75f64.to_bits());
    }

    #[test]
    fn missing_gradient_is_consistency_error() {
        let mut p = ParamSet::new();
        p.insert("w", Array::vector(vec![0.0]), true).unwrap();
        let g = Grads::for_params(&p);
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1, 0.9, 0.0));
        assert!(matches!(opt.step(&mut p, &g), Err(Error::Consistency(_))));
    }

    #[test]
    fn adam_first_step_is_lr_sign() {
        for g0 in [3.0, -0.5, 120.0] {
            let mut p = ParamSet::new();
            p.insert("w", Array::vector(vec![0.0]), true).unwrap();
            let mut g = Grads::for_params(&p);
            g.set(0, vec![g0]);
            let lr = 1e-3;
            let mut opt = Optimizer::new(OptimizerConfig::adam(lr, 0.9, 0.99, 0.0));
            opt.step(&mut p, &g).unwrap();
            let w = p.get("w").unwrap().data()[0];
            // Bias correction makes mhat = g and vhat = g^2 on the first step.
            let expected = -lr * g0 / (g0.abs() + 1e-8);
            assert!((w - expected).abs() < 1e-12);
            assert!((w + lr * g0.signum()).abs() < 1e-6 * lr);
        }
    }

    #[test]
    fn decoupled_decay_shrinks_weights_without_gradient_signal() {
        let mut p = ParamSet::new();
        p.insert("w", Array::vector(vec![2.0]), true).unwrap();
        let mut g = Grads::for_params(&p);
        g.set(0, vec![0.0]);
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1, 0.9, 0.5));
        opt.step(&mut p, &g).unwrap();
        assert!((p.get("w").unwrap().data()[0] - 1.9).abs() < 1e-15);
    }
}
