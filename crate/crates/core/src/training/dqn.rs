use alloc::collections::BTreeSet;
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use super::bc::fill_missing;
use super::config::TrainConfig;
use super::replay::{ReplayBuffer, Transition};
use crate::episode::{init_memory, AssessmentOutcome, FailureMemory, Oracle};
use crate::error::{Error, Result};
use crate::numkit::{masked_argmax, Array, Grads, Optimizer, Rng, Tape, Var};
use crate::policies::{base_forward, select_random, select_sorting, FaArchitecture, PolicyWeights};
use crate::tasks::InstanceSource;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqnLogRow {
    pub episode: usize,
    pub epsilon: f64,
    pub mean_reward: f64,
    /// Mean regression loss of the gradient steps in this window, if any.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DqnReport {
    /// Total reward of every episode.
    pub episode_rewards: Vec<f64>,
    pub log: Vec<DqnLogRow>,
    pub gradient_steps: usize,
    pub transitions: usize,
    /// Distinct per-step rewards, ascending.
    pub distinct_rewards: Vec<f64>,
}

/// Reward of one assessment: 1 on pass plus an optional `bonus * 100 / cost`, 0 on failure.
pub fn reward(outcome: &AssessmentOutcome, bonus: f64) -> Result<f64> {
    if let Some(c) = outcome.cost {
        if outcome.passed != c.is_finite() {
            return Err(Error::Contract("assessment pass flag disagrees with its cost".into()));
        }
    }
    let r = if outcome.passed {
        let shaped = match outcome.cost {
            Some(c) if c > 0.0 => bonus * 100.0 / c,
            _ => 0.0,
        };
        1.0 + shaped
    } else {
        0.0
    };
    if bonus == 0.0 && r != 0.0 && r != 1.0 {
        return Err(Error::Contract("reward is not binary".into()));
    }
    Ok(r)
}

/// `r` for terminal transitions, else `r + gamma * max` of `next_q` over actions with positive next memory.
pub fn bootstrap_target(reward: f64, terminal: bool, next_q: &[f64], next_memory: &[f64], gamma: f64) -> Result<f64> {
    if terminal {
        return Ok(reward);
    }
    if next_q.len() != next_memory.len() {
        return Err(Error::Dimension {
            context: "next-state values vs memory",
            expected: next_memory.len(),
            got: next_q.len(),
        });
    }
    let best = masked_argmax(next_q, |i| next_memory[i] > 0.0)
        .ok_or_else(|| Error::Contract("non-terminal transition with exhausted memory".into()))?;
    Ok(reward + gamma * next_q[best])
}

fn memory_var<'p>(tape: &mut Tape<'p>, m: &'p FailureMemory) -> Var {
    tape.input_ref(m.values())
}

/// Q-values at the transition's decision (`next = false`) or at its successor state.
fn transition_q<'p>(
    tape: &mut Tape<'p>,
    w: &'p PolicyWeights,
    t: &'p Transition,
    memories: &'p [FailureMemory],
) -> Result<Var> {
    let e = tape.input_ref(&t.embedding);
    match w.fa {
        Some(FaArchitecture::Fmp2 { .. }) => {
            let vars: Vec<Var> = memories.iter().map(|m| memory_var(tape, m)).collect();
            let h = w.fmp2_hidden(tape, e, &vars)?;
            w.fa_decode(tape, h)
        }
        Some(_) => {
            let m = memories
                .last()
                .ok_or_else(|| Error::Consistency("missing memory for feature masking".into()))?;
            let mv = memory_var(tape, m);
            w.fmp1_q(tape, e, mv)
        }
        None => Err(Error::Argument("policy has no failure-aware head".into())),
    }
}

/// Memories the head consumes for the decision state or its successor.
fn state_memories(w: &PolicyWeights, t: &Transition, next: bool) -> Result<Vec<FailureMemory>> {
    if w.fa.is_some_and(|f| f.is_recurrent()) {
        t.memory_sequence(next)
    } else if next {
        Ok(vec![t.next_memory()?])
    } else {
        Ok(vec![t.memory()?])
    }
}

/// Bootstrap targets of a batch under `target` weights.
pub fn q_targets(batch: &[&Transition], target: &PolicyWeights, gamma: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(batch.len());
    for t in batch {
        if t.terminal {
            out.push(t.reward);
            continue;
        }
        let memories = state_memories(target, t, true)?;
        let mut tape = Tape::new();
        let q = transition_q(&mut tape, target, t, &memories)?;
        let next_m = memories.last().map(|m| m.values()).unwrap_or(&[]);
        out.push(bootstrap_target(t.reward, false, tape.value(q), next_m, gamma)?);
    }
    Ok(out)
}

/// Recurrent hidden state carried through one training episode.
enum Head {
    Masking,
    Recurrent(Array),
}

fn greedy_q(w: &PolicyWeights, embedding: &[f64], m: &FailureMemory, head: &mut Head, advance: bool) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    match head {
        Head::Masking => {
            let e = tape.input_ref(embedding);
            let mv = tape.input_ref(m.values());
            let q = w.fmp1_q(&mut tape, e, mv)?;
            Ok(tape.value(q).to_vec())
        }
        Head::Recurrent(h) => {
            let hv = tape.input_ref(h.data());
            let next = if advance {
                let mv = tape.input_ref(m.values());
                let em = w.encode_memory(&mut tape, mv)?;
                w.gru(&mut tape, em, hv)?
            } else {
                hv
            };
            let q = w.fa_decode(&mut tape, next)?;
            let q = tape.value(q).to_vec();
            let nh = Array::vector(tape.value(next).to_vec());
            *h = nh;
            Ok(q)
        }
    }
}

fn seed_hidden(w: &PolicyWeights, embedding: &[f64]) -> Result<Array> {
    let width = w.recurrent_width().unwrap_or(0);
    let zeros = vec![0.0; width];
    let mut tape = Tape::new();
    let e = tape.input_ref(embedding);
    let h = tape.input_ref(&zeros);
    let h = w.gru(&mut tape, e, h)?;
    Ok(Array::vector(tape.value(h).to_vec()))
}

/// Trains the failure-aware head of `weights` with DQN on instances drawn from `source`.
///
/// The first action of every episode comes from the base policy unless the head
/// emits it; every later action is epsilon-greedy over the untried actions.
/// Frozen parameters are never touched.
pub fn dqn_train(
    weights: &mut PolicyWeights,
    source: &dyn InstanceSource,
    oracle: &dyn Oracle,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<DqnReport> {
    cfg.validate()?;
    let fa = weights
        .fa
        .ok_or_else(|| Error::Argument("policy has no failure-aware head".into()))?;
    if !fa.has_trainable_head() {
        return Err(Error::Argument(alloc::format!("{} has nothing to train", fa.label())));
    }
    if source.action_count() != weights.base.actions || source.observation_len() != weights.base.input {
        return Err(Error::Argument("policy and task disagree on shapes".into()));
    }
    let n = weights.base.actions;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut opt = Optimizer::new(cfg.optimizer);
    let mut target = weights.clone();
    let mut report = DqnReport::default();
    let mut rewards_seen: BTreeSet<u64> = BTreeSet::new();
    let (mut window_reward, mut window_loss, mut window_steps) = (0.0, 0.0, 0usize);
    let mut env_steps = 0usize;

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let instance = source.draw(rng)?;
        let obs = instance.observation();
        let embedding: Rc<[f64]> = Rc::from(weights.observation_embedding(obs)?.into_data());
        let aff = base_forward(obs, weights)?;
        let mut memory = init_memory(cfg.memory_mode, Some(&aff), n)?;
        let initial: Rc<[f64]> = Rc::from(memory.values().to_vec());
        let mut head = if fa.is_recurrent() {
            Head::Recurrent(seed_hidden(weights, &embedding)?)
        } else {
            Head::Masking
        };
        let mut history = Vec::new();
        let mut total = 0.0;

        for trial in 0..cfg.max_trials {
            if memory.exhausted() {
                break;
            }
            let learned = trial > 0 || fa.emits_first();
            let action = if !learned {
                select_sorting(&aff, &memory)?
            } else {
                let q = greedy_q(weights, &embedding, &memory, &mut head, trial > 0)?;
                if rng.uniform() < epsilon {
                    select_random(&memory, rng)?
                } else {
                    masked_argmax(&q, |i| memory.is_candidate(i)).ok_or(Error::ExhaustedActions)?
                }
            };
            if !memory.is_candidate(action) {
                return Err(Error::ProtocolViolation {
                    action,
                    reason: "exploration picked a failed action",
                });
            }
            let outcome = oracle.assess(&instance, action)?;
            let r = reward(&outcome, cfg.reward_bonus)?;
            rewards_seen.insert(r.to_bits());
            total += r;
            let mut after = memory.clone();
            after.mark_failed(action)?;
            let terminal = outcome.passed || trial + 1 == cfg.max_trials || after.exhausted();
            if learned {
                buffer.push(Transition {
                    embedding: embedding.clone(),
                    initial_memory: initial.clone(),
                    memory_mode: cfg.memory_mode,
                    history: history.clone(),
                    action,
                    reward: r,
                    terminal,
                });
                report.transitions += 1;
                env_steps += 1;
                if buffer.len() >= cfg.warmup() && env_steps.is_multiple_of(cfg.train_every) {
                    let loss = gradient_step(weights, &target, &buffer, &mut opt, cfg, rng)?;
                    report.gradient_steps += 1;
                    window_loss += loss;
                    window_steps += 1;
                    if report.gradient_steps % cfg.target_sync == 0 {
                        target.params = weights.params.clone();
                    }
                }
            }
            if outcome.passed {
                break;
            }
            history.push(action);
            memory = after;
        }
        report.episode_rewards.push(total);
        window_reward += total;
        if (episode + 1) % cfg.log_every == 0 || episode + 1 == cfg.episodes {
            let span = (episode % cfg.log_every) + 1;
            report.log.push(DqnLogRow {
                episode: episode + 1,
                epsilon,
                mean_reward: window_reward / span as f64,
                loss: (window_steps > 0).then(|| window_loss / window_steps as f64),
            });
            window_reward = 0.0;
            window_loss = 0.0;
            window_steps = 0;
        }
    }
    report.distinct_rewards = rewards_seen.into_iter().map(f64::from_bits).collect();
    Ok(report)
}

fn gradient_step(
    weights: &mut PolicyWeights,
    target: &PolicyWeights,
    buffer: &ReplayBuffer,
    opt: &mut Optimizer,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<f64> {
    let batch = buffer.sample(cfg.batch_size, rng)?;
    let ys = q_targets(&batch, target, cfg.gamma)?;
    let mut grads = Grads::for_params(&weights.params);
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    {
        let w: &PolicyWeights = weights;
        for (t, y) in batch.iter().zip(&ys) {
            let memories = state_memories(w, t, false)?;
            let yv = [*y];
            let mut tape = Tape::new();
            let q = transition_q(&mut tape, w, t, &memories)?;
            let qa = tape.pick(q, t.action)?;
            let target_var = tape.input_ref(&yv);
            let l = tape.loss(cfg.loss, qa, target_var)?;
            total += tape.scalar(l);
            tape.backward_into(l, &mut grads, scale)?;
        }
    }
    fill_missing(&weights.params, &mut grads);
    opt.step(&mut weights.params, &grads)?;
    Ok(total * scale)
}
