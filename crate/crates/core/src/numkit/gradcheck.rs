//! Central finite-difference check of tape gradients.
//!
//! Relative error per entry is `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
//! The floor keeps entries whose true gradient is numerically zero from being
//! scored by round-off alone.

use alloc::string::String;
use alloc::vec::Vec;

use super::params::{Grads, ParamSet};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    pub floor: f64,
    /// Minimum distance from a ReLU or L1 kink required at the probe point.
    pub kink_margin: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-4,
            kink_margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn param(&self, name: &str) -> Option<&ParamCheck> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Compares tape gradients of the scalar built by `f` against central differences
/// for every trainable parameter.
pub fn grad_check<F>(f: F, params: &ParamSet, cfg: GradCheckConfig) -> Result<GradCheckReport>
where
    F: for<'p> Fn(&mut Tape<'p>, &'p ParamSet) -> Result<Var>,
{
    let mut grads = Grads::for_params(params);
    {
        let mut tape = Tape::new();
        let out = f(&mut tape, params)?;
        let kink = tape.kink_distance();
        if kink < cfg.kink_margin {
            return Err(Error::Probe(alloc::format!(
                "probe lies {kink:e} from a non-differentiable kink"
            )));
        }
        tape.backward_into(out, &mut grads, 1.0)?;
    }
    let eval = |p: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let out = f(&mut tape, p)?;
        let v = tape.scalar(out);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Probe(alloc::format!("non-finite loss {v}")))
        }
    };
    let mut work = params.clone();
    let mut checks = Vec::new();
    let mut overall = 0.0f64;
    for i in 0..params.len() {
        let p = params.param(i);
        if !p.trainable {
            continue;
        }
        let analytic = grads.get(i);
        let mut check = ParamCheck {
            name: p.name.clone(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_index: 0,
        };
        for j in 0..p.value.len() {
            let original = p.value.data()[j];
            work.param_mut(i).value.data_mut()[j] = original + cfg.step;
            let plus = eval(&work)?;
            work.param_mut(i).value.data_mut()[j] = original - cfg.step;
            let minus = eval(&work)?;
            work.param_mut(i).value.data_mut()[j] = original;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic.map_or(0.0, |g| g[j]);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(cfg.floor);
            if rel > check.max_rel_error {
                check.max_rel_error = rel;
                check.worst_index = j;
            }
            check.max_abs_error = check.max_abs_error.max(abs);
        }
        overall = overall.max(check.max_rel_error);
        checks.push(check);
    }
    Ok(GradCheckReport {
        params: checks,
        max_rel_error: overall,
        passed: overall < cfg.tolerance,
    })
}
