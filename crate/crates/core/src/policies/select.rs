use alloc::string::String;
use alloc::vec::Vec;

use super::{base_forward, FaArchitecture, PolicyWeights};
use crate::episode::{AffordanceMap, Decision, FailureMemory, Policy, PolicyState};
use crate::error::{Error, Result};
use crate::numkit::{masked_argmax, Array, Rng, Tape};

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { context, expected, got });
    }
    Ok(())
}

/// Highest value among candidate actions, lowest index on ties.
fn best_candidate(values: &[f64], m: &FailureMemory) -> Result<usize> {
    check_len("scores vs memory", m.len(), values.len())?;
    masked_argmax(values, |i| m.is_candidate(i)).ok_or(Error::ExhaustedActions)
}

/// Uniform draw over the actions whose memory entry is positive.
pub fn select_random(m: &FailureMemory, rng: &mut Rng) -> Result<usize> {
    let count = m.candidate_count();
    if count == 0 {
        return Err(Error::ExhaustedActions);
    }
    let pick = rng.below(count);
    m.candidates().nth(pick).ok_or(Error::ExhaustedActions)
}

/// Process of elimination: the highest-affordance action not yet failed.
pub fn select_sorting(aff: &AffordanceMap, m: &FailureMemory) -> Result<usize> {
    best_candidate(aff.values(), m)
}

/// Base policy on the first trial, then uniform over the remaining actions.
pub fn select_lpre(aff: &AffordanceMap, m: &FailureMemory, t: usize, rng: &mut Rng) -> Result<usize> {
    if t == 0 {
        select_sorting(aff, m)
    } else {
        select_random(m, rng)
    }
}

/// Feature-masking Q-values `D(E_o(o) * E_m(m))` for every action.
pub fn fmp1_q_values(o: &Array, m: &FailureMemory, w: &PolicyWeights) -> Result<Vec<f64>> {
    w.check_observation(o)?;
    check_len("memory", w.base.actions, m.len())?;
    let mut tape = Tape::new();
    let x = tape.input_ref(o.data());
    let e = w.embed_observation(&mut tape, x)?;
    let mv = tape.input_ref(m.values());
    let q = w.fmp1_q(&mut tape, e, mv)?;
    Ok(tape.value(q).to_vec())
}

/// Feature-masking re-decision over the untried actions.
pub fn select_fmp1(o: &Array, m: &FailureMemory, w: &PolicyWeights) -> Result<usize> {
    let q = fmp1_q_values(o, m, w)?;
    best_candidate(&q, m)
}

/// Recurrent re-decision.
///
/// At `t = 0` the observation embedding seeds the hidden state and the action is
/// the base policy's choice, unless the head is configured to emit it. At later
/// trials the encoded memory advances the hidden state and the action is the
/// best untried action under the failure-aware decoder.
pub fn select_fmp2(
    o: &Array,
    m: &FailureMemory,
    state: PolicyState,
    w: &PolicyWeights,
) -> Result<(usize, PolicyState)> {
    let fa = *w.fa()?;
    let width = w
        .recurrent_width()
        .ok_or_else(|| Error::Argument("policy is not recurrent".into()))?;
    check_len("memory", w.base.actions, m.len())?;
    let hidden = state.hidden.unwrap_or_else(|| Array::zeros(alloc::vec![width]));
    check_len("recurrent hidden state", width, hidden.len())?;
    let t = state.trial_index;

    let mut tape = Tape::new();
    let h_prev = tape.input_ref(hidden.data());
    let h = if t == 0 {
        w.check_observation(o)?;
        let x = tape.input_ref(o.data());
        let e = w.embed_observation(&mut tape, x)?;
        w.gru(&mut tape, e, h_prev)?
    } else {
        let mv = tape.input_ref(m.values());
        let em = w.encode_memory(&mut tape, mv)?;
        w.gru(&mut tape, em, h_prev)?
    };
    let action = if t == 0 && !fa.emits_first() {
        select_sorting(&base_forward(o, w)?, m)?
    } else {
        let q = w.fa_decode(&mut tape, h)?;
        best_candidate(tape.value(q), m)?
    };
    let next = PolicyState {
        hidden: Some(Array::vector(tape.value(h).to_vec())),
        trial_index: t + 1,
    };
    Ok((action, next))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy {
    pub actions: Option<usize>,
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "RE".into()
    }

    fn action_count(&self) -> Option<usize> {
        self.actions
    }

    fn affordance(&self, _observation: &Array) -> Result<Option<AffordanceMap>> {
        Ok(None)
    }

    fn select(&self, d: Decision<'_>) -> Result<usize> {
        select_random(d.memory, d.rng)
    }
}

fn base_affordance(w: &PolicyWeights, o: &Array) -> Result<Option<AffordanceMap>> {
    base_forward(o, w).map(Some)
}

fn required(aff: Option<&AffordanceMap>) -> Result<&AffordanceMap> {
    aff.ok_or_else(|| Error::Argument("policy needs the base affordance map".into()))
}

#[derive(Debug, Clone, Copy)]
pub struct LprePolicy<'w> {
    pub weights: &'w PolicyWeights,
}

impl Policy for LprePolicy<'_> {
    fn name(&self) -> String {
        "LPRE".into()
    }

    fn action_count(&self) -> Option<usize> {
        Some(self.weights.base.actions)
    }

    fn affordance(&self, o: &Array) -> Result<Option<AffordanceMap>> {
        base_affordance(self.weights, o)
    }

    fn select(&self, d: Decision<'_>) -> Result<usize> {
        select_lpre(required(d.affordance)?, d.memory, d.trial, d.rng)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SortingPolicy<'w> {
    pub weights: &'w PolicyWeights,
}

impl Policy for SortingPolicy<'_> {
    fn name(&self) -> String {
        "SP".into()
    }

    fn action_count(&self) -> Option<usize> {
        Some(self.weights.base.actions)
    }

    fn affordance(&self, o: &Array) -> Result<Option<AffordanceMap>> {
        base_affordance(self.weights, o)
    }

    fn select(&self, d: Decision<'_>) -> Result<usize> {
        select_sorting(required(d.affordance)?, d.memory)
    }
}

/// FMP-1, FMP-1.5, FMP-1-identity or FMP-2, depending on the attached head.
#[derive(Debug, Clone, Copy)]
pub struct FailureAwarePolicy<'w> {
    weights: &'w PolicyWeights,
}

impl<'w> FailureAwarePolicy<'w> {
    pub fn new(weights: &'w PolicyWeights) -> Result<Self> {
        weights.fa()?;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &'w PolicyWeights {
        self.weights
    }
}

impl Policy for FailureAwarePolicy<'_> {
    fn name(&self) -> String {
        self.weights.label().into()
    }

    fn action_count(&self) -> Option<usize> {
        Some(self.weights.base.actions)
    }

    fn affordance(&self, o: &Array) -> Result<Option<AffordanceMap>> {
        base_affordance(self.weights, o)
    }

    fn select(&self, d: Decision<'_>) -> Result<usize> {
        let w = self.weights;
        match w.fa()? {
            FaArchitecture::Fmp2 { .. } => {
                let state = core::mem::take(d.state);
                let (action, next) = select_fmp2(d.observation, d.memory, state, w)?;
                *d.state = next;
                Ok(action)
            }
            _ if d.trial == 0 => select_sorting(required(d.affordance)?, d.memory),
            _ => select_fmp1(d.observation, d.memory, w),
        }
    }

    fn initial_state(&self) -> PolicyState {
        PolicyState {
            hidden: self.weights.recurrent_width().map(|n| Array::zeros(alloc::vec![n])),
            trial_index: 0,
        }
    }
}
