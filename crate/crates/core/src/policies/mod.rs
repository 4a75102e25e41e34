//! The base policy and the re-decision policies built on top of it.
//!
//! All weights of one policy live in a single [`ParamSet`] with namespaced
//! names: `obs.` for the observation encoder, `dec.` for the base decoder,
//! `mem.` for a learned memory encoder, `fa.` for the failure-aware decoder and
//! `gru.` for the recurrent cell. The `obs.` and `dec.` groups are the part
//! shared with the base policy and are frozen once a failure-aware head is attached.

mod select;

pub use select::{
    fmp1_q_values, select_fmp1, select_fmp2, select_lpre, select_random, select_sorting, FailureAwarePolicy,
    LprePolicy, RandomPolicy, SortingPolicy,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::episode::AffordanceMap;
use crate::error::{Error, Result};
use crate::numkit::{gru_step, init_gru, Array, ParamSet, Rng, Tape, Var};

pub const SHARED_PREFIXES: [&str; 2] = ["obs.", "dec."];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseArchitecture {
    /// Observation length.
    pub input: usize,
    pub actions: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Embedding features per action; the embedding is `actions * features_per_action` wide.
    #[serde(default = "default_features")]
    pub features_per_action: usize,
}

fn default_hidden() -> usize {
    64
}

fn default_features() -> usize {
    1
}

impl BaseArchitecture {
    pub fn new(input: usize, actions: usize) -> Self {
        Self {
            input,
            actions,
            hidden: default_hidden(),
            features_per_action: default_features(),
        }
    }

    pub fn embed_width(&self) -> usize {
        self.actions * self.features_per_action
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.actions == 0 || self.hidden == 0 || self.features_per_action == 0 {
            return Err(Error::Argument("network widths must be positive".into()));
        }
        Ok(())
    }
}

/// How the failure memory is mapped into embedding space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryEncoder {
    Identity,
    /// Each memory entry repeated once per feature of its action.
    Replica,
    /// Same shape as the observation encoder, with its own weights.
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FaArchitecture {
    /// Feature masking: `D(E_o(o) * E_m(m))` with a trainable copy of the base decoder.
    Fmp1 { memory_encoder: MemoryEncoder },
    /// Feature masking over the base affordance with identity encoder and decoder.
    Fmp1Identity,
    /// Recurrent memory: `E_o(o)` seeds a GRU that then consumes `E_m(m_t)`.
    Fmp2 {
        memory_encoder: MemoryEncoder,
        #[serde(default = "default_hidden")]
        hidden: usize,
        /// Whether the recurrent head also picks the first action.
        #[serde(default)]
        emits_first: bool,
    },
}

impl FaArchitecture {
    pub fn label(&self) -> &'static str {
        match self {
            FaArchitecture::Fmp1 {
                memory_encoder: MemoryEncoder::Learned,
            } => "FMP-1.5",
            FaArchitecture::Fmp1 { .. } => "FMP-1",
            FaArchitecture::Fmp1Identity => "FMP-1-identity",
            FaArchitecture::Fmp2 { .. } => "FMP-2",
        }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self, FaArchitecture::Fmp2 { .. })
    }

    pub fn has_trainable_head(&self) -> bool {
        !matches!(self, FaArchitecture::Fmp1Identity)
    }

    pub fn memory_encoder(&self) -> Option<MemoryEncoder> {
        match self {
            FaArchitecture::Fmp1 { memory_encoder } | FaArchitecture::Fmp2 { memory_encoder, .. } => {
                Some(*memory_encoder)
            }
            FaArchitecture::Fmp1Identity => None,
        }
    }

    pub fn emits_first(&self) -> bool {
        matches!(self, FaArchitecture::Fmp2 { emits_first: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyWeights {
    pub base: BaseArchitecture,
    pub fa: Option<FaArchitecture>,
    pub params: ParamSet,
}

fn fan_in_init(params: &mut ParamSet, prefix: &str, rows: usize, cols: usize, rng: &mut Rng) -> Result<()> {
    let scale = 1.0 / libm::sqrt(cols as f64);
    params.insert_uniform(alloc::format!("{prefix}w"), rows, cols, scale, rng)?;
    params.insert(alloc::format!("{prefix}b"), Array::zeros(vec![rows]), true)
}

fn encoder_init(params: &mut ParamSet, prefix: &str, input: usize, hidden: usize, out: usize, rng: &mut Rng) -> Result<()> {
    fan_in_init(params, &alloc::format!("{prefix}0."), hidden, input, rng)?;
    fan_in_init(params, &alloc::format!("{prefix}1."), out, hidden, rng)
}

impl PolicyWeights {
    /// Freshly initialized base policy.
    pub fn base(arch: BaseArchitecture, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let mut params = ParamSet::new();
        encoder_init(&mut params, "obs.", arch.input, arch.hidden, arch.embed_width(), rng)?;
        fan_in_init(&mut params, "dec.", arch.actions, arch.embed_width(), rng)?;
        Ok(Self {
            base: arch,
            fa: None,
            params,
        })
    }

    /// Adds a failure-aware head and freezes the shared partition.
    pub fn attach_fa(&mut self, fa: FaArchitecture, rng: &mut Rng) -> Result<()> {
        if self.fa.is_some() {
            return Err(Error::Argument("failure-aware head already attached".into()));
        }
        let n = self.base.actions;
        let embed = self.base.embed_width();
        if fa.memory_encoder() == Some(MemoryEncoder::Identity) && embed != n {
            return Err(Error::Dimension {
                context: "identity memory encoder width",
                expected: embed,
                got: n,
            });
        }
        if fa.memory_encoder() == Some(MemoryEncoder::Learned) {
            encoder_init(&mut self.params, "mem.", n, self.base.hidden, embed, rng)?;
        }
        match fa {
            FaArchitecture::Fmp1 { .. } => {
                let w = self.params.get("dec.w")?.clone();
                let b = self.params.get("dec.b")?.clone();
                self.params.insert("fa.w", w, true)?;
                self.params.insert("fa.b", b, true)?;
            }
            FaArchitecture::Fmp1Identity => {}
            FaArchitecture::Fmp2 { hidden, .. } => {
                if hidden == 0 {
                    return Err(Error::Argument("recurrent width must be positive".into()));
                }
                init_gru(&mut self.params, "gru.", embed, hidden, rng)?;
                fan_in_init(&mut self.params, "fa.", n, hidden, rng)?;
            }
        }
        for prefix in SHARED_PREFIXES {
            self.params.freeze_prefix(prefix);
        }
        self.fa = Some(fa);
        Ok(())
    }

    /// Names of the parameters shared with the base policy.
    pub fn shared_partition(&self) -> Vec<String> {
        self.params
            .names()
            .filter(|n| SHARED_PREFIXES.iter().any(|p| n.starts_with(p)))
            .map(String::from)
            .collect()
    }

    pub fn label(&self) -> &'static str {
        self.fa.as_ref().map_or("pi0", FaArchitecture::label)
    }

    pub fn recurrent_width(&self) -> Option<usize> {
        match self.fa {
            Some(FaArchitecture::Fmp2 { hidden, .. }) => Some(hidden),
            _ => None,
        }
    }

    fn fa(&self) -> Result<&FaArchitecture> {
        self.fa
            .as_ref()
            .ok_or_else(|| Error::Argument("policy has no failure-aware head".into()))
    }

    fn check_observation(&self, o: &Array) -> Result<()> {
        if o.len() != self.base.input {
            return Err(Error::Dimension {
                context: "observation",
                expected: self.base.input,
                got: o.len(),
            });
        }
        Ok(())
    }

    /// Observation encoder `E_o`.
    pub fn embed_observation<'p>(&'p self, tape: &mut Tape<'p>, x: Var) -> Result<Var> {
        two_layer(tape, &self.params, "obs.", x)
    }

    /// Base decoder logits.
    pub fn base_logits<'p>(&'p self, tape: &mut Tape<'p>, e: Var) -> Result<Var> {
        let w = tape.param(&self.params, "dec.w")?;
        let b = tape.param(&self.params, "dec.b")?;
        tape.affine(e, w, Some(b))
    }

    /// Memory encoder `E_m`.
    pub fn encode_memory<'p>(&'p self, tape: &mut Tape<'p>, m: Var) -> Result<Var> {
        match self.fa()?.memory_encoder() {
            Some(MemoryEncoder::Identity) | None => Ok(m),
            Some(MemoryEncoder::Replica) => Ok(tape.replicate(m, self.base.features_per_action)),
            Some(MemoryEncoder::Learned) => two_layer(tape, &self.params, "mem.", m),
        }
    }

    /// Failure-aware decoder producing one Q-value per action.
    pub fn fa_decode<'p>(&'p self, tape: &mut Tape<'p>, x: Var) -> Result<Var> {
        let w = tape.param(&self.params, "fa.w")?;
        let b = tape.param(&self.params, "fa.b")?;
        tape.affine(x, w, Some(b))
    }

    /// FMP-1 Q-values from an observation embedding and a memory vector.
    pub fn fmp1_q<'p>(&'p self, tape: &mut Tape<'p>, e: Var, m: Var) -> Result<Var> {
        match self.fa()? {
            FaArchitecture::Fmp1 { .. } => {
                let em = self.encode_memory(tape, m)?;
                let masked = tape.mul(e, em)?;
                self.fa_decode(tape, masked)
            }
            FaArchitecture::Fmp1Identity => {
                let logits = self.base_logits(tape, e)?;
                let aff = tape.softmax(logits)?;
                tape.mul(aff, m)
            }
            FaArchitecture::Fmp2 { .. } => Err(Error::Argument("recurrent head used as feature masking".into())),
        }
    }

    /// One recurrent step.
    pub fn gru<'p>(&'p self, tape: &mut Tape<'p>, x: Var, h: Var) -> Result<Var> {
        gru_step(tape, &self.params, "gru.", x, h)
    }

    /// Recurrent hidden state after the observation embedding and the given memories.
    pub fn fmp2_hidden<'p>(&'p self, tape: &mut Tape<'p>, e: Var, memories: &[Var]) -> Result<Var> {
        let width = self.recurrent_width().ok_or_else(|| Error::Argument("policy is not recurrent".into()))?;
        let mut h = tape.input(vec![0.0; width]);
        h = self.gru(tape, e, h)?;
        for &m in memories {
            let em = self.encode_memory(tape, m)?;
            h = self.gru(tape, em, h)?;
        }
        Ok(h)
    }

    /// Eager observation embedding.
    pub fn observation_embedding(&self, o: &Array) -> Result<Array> {
        self.check_observation(o)?;
        let mut tape = Tape::new();
        let x = tape.input_ref(o.data());
        let e = self.embed_observation(&mut tape, x)?;
        Ok(Array::vector(tape.value(e).to_vec()))
    }
}

fn two_layer<'p>(tape: &mut Tape<'p>, params: &'p ParamSet, prefix: &str, x: Var) -> Result<Var> {
    let w0 = tape.param(params, &alloc::format!("{prefix}0.w"))?;
    let b0 = tape.param(params, &alloc::format!("{prefix}0.b"))?;
    let h = tape.affine(x, w0, Some(b0))?;
    let h = tape.tanh(h);
    let w1 = tape.param(params, &alloc::format!("{prefix}1.w"))?;
    let b1 = tape.param(params, &alloc::format!("{prefix}1.b"))?;
    let e = tape.affine(h, w1, Some(b1))?;
    Ok(tape.relu(e))
}

/// Base policy affordance map for an observation.
pub fn base_forward(o: &Array, w: &PolicyWeights) -> Result<AffordanceMap> {
    w.check_observation(o)?;
    let mut tape = Tape::new();
    let x = tape.input_ref(o.data());
    let e = w.embed_observation(&mut tape, x)?;
    let logits = w.base_logits(&mut tape, e)?;
    AffordanceMap::from_logits(tape.value(logits))
}
