use indexmap::IndexMap;

use super::Tensor;
use crate::error::{Error, Result};

/// Named trainable tensors. Iteration follows insertion order so optimizer
/// updates and serialisation are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    entries: IndexMap<String, Tensor>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<usize> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter name `{name}`")));
        }
        let (idx, _) = self
            .entries
            .insert_full(name, tensor.with_requires_grad(true));
        Ok(idx)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.get_index_of(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Contract(format!("missing parameter `{name}`")))
    }

    pub fn by_index(&self, idx: usize) -> (&str, &Tensor) {
        let (k, v) = self.entries.get_index(idx).expect("parameter index in range");
        (k.as_str(), v)
    }

    pub(crate) fn by_index_mut(&mut self, idx: usize) -> (&str, &mut Tensor) {
        let (k, v) = self
            .entries
            .get_index_mut(idx)
            .expect("parameter index in range");
        (k.as_str(), v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    pub fn zero_grads(&mut self) {
        for t in self.entries.values_mut() {
            let n = t.numel();
            t.set_grad(vec![0.0; n]);
        }
    }

    pub fn clear_grads(&mut self) {
        for t in self.entries.values_mut() {
            t.clear_grad();
        }
    }
}
