use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::array::Array;
use super::rng::Rng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array,
    pub trainable: bool,
}

/// Named parameters with per-parameter trainable flags, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
    index: BTreeMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array, trainable: bool) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Argument(format!("duplicate parameter name `{name}`")));
        }
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            value,
            trainable,
        });
        Ok(())
    }

    /// Inserts a `rows x cols` matrix with entries uniform in `[-scale, scale]`.
    pub fn insert_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        scale: f64,
        rng: &mut Rng,
    ) -> Result<()> {
        let data = (0..rows * cols).map(|_| rng.uniform_in(-scale, scale)).collect();
        self.insert(name, Array::new(vec![rows, cols], data)?, true)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.index_of(name)
            .map(|i| &self.params[i].value)
            .ok_or_else(|| missing(name))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array> {
        match self.index_of(name) {
            Some(i) => Ok(&mut self.params[i].value),
            None => Err(missing(name)),
        }
    }

    pub fn param(&self, i: usize) -> &Param {
        &self.params[i]
    }

    pub fn param_mut(&mut self, i: usize) -> &mut Param {
        &mut self.params[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn is_trainable(&self, name: &str) -> Result<bool> {
        self.index_of(name)
            .map(|i| self.params[i].trainable)
            .ok_or_else(|| missing(name))
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<()> {
        let i = self.index_of(name).ok_or_else(|| missing(name))?;
        self.params[i].trainable = trainable;
        Ok(())
    }

    /// Marks every parameter whose name starts with `prefix` as frozen.
    pub fn freeze_prefix(&mut self, prefix: &str) {
        for p in &mut self.params {
            if p.name.starts_with(prefix) {
                p.trainable = false;
            }
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn frozen_names(&self) -> Vec<String> {
        self.params
            .iter()
            .filter(|p| !p.trainable)
            .map(|p| p.name.to_string())
            .collect()
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

fn missing(name: &str) -> Error {
    Error::Argument(format!("unknown parameter `{name}`"))
}

/// Gradient accumulator aligned with a [`ParamSet`] by parameter index.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    slots: Vec<Option<Vec<f64>>>,
}

impl Grads {
    pub fn for_params(params: &ParamSet) -> Self {
        Self {
            slots: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&[f64]> {
        self.slots.get(i).and_then(|s| s.as_deref())
    }

    /// Accumulation buffer for parameter `i`, allocated as zeros on first use.
    pub fn slot_mut(&mut self, i: usize, len: usize) -> &mut [f64] {
        let slot = &mut self.slots[i];
        if slot.is_none() {
            *slot = Some(vec![0.0; len]);
        }
        slot.as_mut().unwrap()
    }

    pub fn set(&mut self, i: usize, grad: Vec<f64>) {
        self.slots[i] = Some(grad);
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.slots.iter_mut().flatten() {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn clear(&mut self) {
        for g in self.slots.iter_mut().flatten() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Largest absolute gradient entry.
    pub fn max_abs(&self) -> f64 {
        self.slots
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut p = ParamSet::new();
        p.insert("w", Array::vector(vec![1.0]), true).unwrap();
        assert!(p.insert("w", Array::vector(vec![2.0]), true).is_err());
        assert_eq!(p.get("w").unwrap().data(), &[1.0]);
    }

    #[test]
    fn freeze_prefix_only_touches_prefix() {
        let mut p = ParamSet::new();
        p.insert("obs.w0", Array::vector(vec![1.0]), true).unwrap();
        p.insert("dec.w", Array::vector(vec![1.0]), true).unwrap();
        p.freeze_prefix("obs.");
        assert!(!p.is_trainable("obs.w0").unwrap());
        assert!(p.is_trainable("dec.w").unwrap());
        assert_eq!(p.frozen_names(), vec!["obs.w0".to_string()]);
    }
}
