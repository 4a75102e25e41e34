use alloc::vec::Vec;

use super::config::BcConfig;
use crate::error::{Error, Result};
use crate::numkit::{argmax, Array, Grads, Optimizer, Rng, Tape};
use crate::policies::PolicyWeights;
use crate::tasks::{AssessConfig, TaskConfig, TaskInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct BcSample {
    pub observation: Array,
    pub target: Vec<f64>,
}

/// Cloning samples for a list of instances.
pub fn bc_dataset(task: &TaskConfig, assess: &AssessConfig, instances: &[TaskInstance]) -> Result<Vec<BcSample>> {
    instances
        .iter()
        .map(|inst| {
            Ok(BcSample {
                observation: inst.observation().clone(),
                target: task.bc_target(inst, assess)?,
            })
        })
        .collect()
}

/// Fraction of samples whose predicted argmax equals the target argmax.
pub fn bc_accuracy(weights: &PolicyWeights, data: &[BcSample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    let mut hits = 0usize;
    for s in data {
        let aff = crate::policies::base_forward(&s.observation, weights)?;
        if argmax(aff.values()) == argmax(&s.target) {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Fits the base policy's softmax output to the samples' targets.
///
/// Returns the mean training loss of every epoch.
pub fn train_bc(weights: &mut PolicyWeights, data: &[BcSample], cfg: &BcConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    if weights.fa.is_some() {
        return Err(Error::Argument("behavior cloning expects a base policy".into()));
    }
    for s in data {
        if s.target.len() != weights.base.actions {
            return Err(Error::Dimension {
                context: "cloning target",
                expected: weights.base.actions,
                got: s.target.len(),
            });
        }
    }
    let mut rng = Rng::derive(cfg.seed, &[0x6263]);
    let mut opt = Optimizer::new(cfg.optimizer);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = Grads::for_params(&weights.params);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let s = &data[i];
                let mut tape = Tape::new();
                let x = tape.input_ref(s.observation.data());
                let e = weights.embed_observation(&mut tape, x)?;
                let logits = weights.base_logits(&mut tape, e)?;
                let p = tape.softmax(logits)?;
                let t = tape.input_ref(&s.target);
                let l = tape.loss(cfg.loss, p, t)?;
                total += tape.scalar(l);
                tape.backward_into(l, &mut grads, scale)?;
            }
            fill_missing(&weights.params, &mut grads);
            opt.step(&mut weights.params, &grads)?;
        }
        curve.push(total / data.len() as f64);
    }
    Ok(curve)
}

/// Gives every trainable parameter a gradient slot, zero if it received none.
pub(crate) fn fill_missing(params: &crate::numkit::ParamSet, grads: &mut Grads) {
    for i in 0..params.len() {
        let p = params.param(i);
        if p.trainable {
            grads.slot_mut(i, p.value.len());
        }
    }
}
