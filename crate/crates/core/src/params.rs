use std::collections::HashMap;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn new(index: usize) -> Self {
        Self(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

/// Which part of the network a parameter belongs to. Drives the
/// stage-wise freeze mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    /// Feature processor of prompt slot 0..4.
    Processor(usize),
    Integration,
    Classifier,
}

/// Named, ordered parameter set. Insertion order is the canonical order
/// for checkpoints and optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<S = f32> {
    names: Vec<String>,
    groups: Vec<ParamGroup>,
    tensors: Vec<Tensor<S>>,
    index: HashMap<String, ParamId>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            groups: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, group: ParamGroup, value: Tensor<S>) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter `{name}`");
        let id = ParamId(self.tensors.len());
        self.names.push(name.to_string());
        self.groups.push(group);
        self.tensors.push(value);
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn group(&self, id: ParamId) -> ParamGroup {
        self.groups[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<S>> {
        self.id(name).map(|id| self.get(id))
    }

    /// Replaces a tensor; the new value must keep the old shape.
    pub fn set(&mut self, id: ParamId, value: Tensor<S>) -> Result<()> {
        if value.dims() != self.tensors[id.0].dims() {
            return Err(Error::shape(
                &format!("set `{}`", self.names[id.0]),
                self.tensors[id.0].dims(),
                value.dims(),
            ));
        }
        self.tensors[id.0] = value;
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<S>)> {
        self.ids()
            .map(move |id| (id, self.names[id.0].as_str(), &self.tensors[id.0]))
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.tensors.iter().map(|t| t.dims().to_vec()).collect()
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn count_where(&self, pred: impl Fn(ParamGroup) -> bool) -> usize {
        self.ids()
            .filter(|&id| pred(self.group(id)))
            .map(|id| self.get(id).len())
            .sum()
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            names: self.names.clone(),
            groups: self.groups.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
            index: self.index.clone(),
        }
    }

    /// Binds every parameter as a leaf of `graph`; the returned vector is
    /// indexed by `ParamId`.
    pub fn bind(&self, graph: &mut Graph<S>) -> Vec<Var> {
        self.iter()
            .map(|(id, _, t)| graph.param(id, t.clone()))
            .collect()
    }

    /// Like [`bind`](Self::bind), but parameters for which `trainable` is
    /// false enter as constants and get no gradient.
    pub fn bind_masked(&self, graph: &mut Graph<S>, trainable: impl Fn(ParamId) -> bool) -> Vec<Var> {
        self.iter()
            .map(|(id, _, t)| {
                if trainable(id) {
                    graph.param(id, t.clone())
                } else {
                    graph.constant(t.clone())
                }
            })
            .collect()
    }
}
