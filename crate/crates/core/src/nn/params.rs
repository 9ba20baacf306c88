use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Gradients, Shape, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// One trainable tensor and the group it is counted and checkpointed under.
#[derive(Clone, Debug)]
pub struct Param {
    pub group: String,
    pub name: String,
    value: Arc<Tensor>,
}

impl Param {
    pub fn value(&self) -> &Tensor {
        &self.value
    }
}

/// Ordered collection of every trainable tensor of a model.
///
/// Insertion order is the checkpoint order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, group: impl Into<String>, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Param {
            group: group.into(),
            name: name.into(),
            value: Arc::new(value),
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        Arc::make_mut(&mut self.params[id.0].value)
    }

    /// Replaces a parameter value; the shape must not change.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let current = self.get(id).shape();
        if current != value.shape() {
            return Err(Error::Dimension {
                op: "set parameter",
                lhs: current.clone(),
                rhs: value.shape().clone(),
            });
        }
        self.params[id.0].value = Arc::new(value);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Group names in first-appearance order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.params {
            if !out.contains(&p.group) {
                out.push(p.group.clone());
            }
        }
        out
    }

    pub fn ids_in_group<'a>(&'a self, group: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.iter().filter(move |(_, p)| p.group == group).map(|(id, _)| id)
    }

    /// Sets every element of every tensor in `group` to `value`.
    pub fn fill_group(&mut self, group: &str, value: f64) {
        for p in self.params.iter_mut().filter(|p| p.group == group) {
            Arc::make_mut(&mut p.value).data_mut().fill(value);
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub(crate) fn shared(&self, id: ParamId) -> Arc<Tensor> {
        Arc::clone(&self.params[id.0].value)
    }
}

/// Seeded source of initial parameter values.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn uniform(&mut self, dims: &[usize], fan_in: usize) -> Tensor {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let shape = Shape::new(dims.to_vec()).expect("parameter dims are positive");
        let data = (0..shape.numel())
            .map(|_| self.rng.random_range(-bound..=bound))
            .collect();
        Tensor::new(dims.to_vec(), data).expect("consistent parameter shape")
    }

    pub fn zeros(&mut self, dims: &[usize]) -> Tensor {
        Tensor::zeros(&Shape::new(dims.to_vec()).expect("parameter dims are positive"))
    }
}

/// A tape plus the bindings of parameters recorded on it.
///
/// Parameters are recorded lazily the first time a layer asks for them and
/// share storage with the [`ParamStore`].
pub struct Graph<'s> {
    pub tape: Tape,
    store: &'s ParamStore,
    bound: Vec<Option<Var>>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Graph {
            tape: Tape::new(),
            store,
            bound: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self.tape.leaf_shared(self.store.shared(id));
        self.bound[id.0] = Some(v);
        v
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.tape.leaf(value)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        self.tape.value(var)
    }

    /// Gradient for every parameter of the store, in store order; `None`
    /// for parameters that were not used or do not reach the root.
    pub fn param_grads(&self, grads: &mut Gradients) -> Vec<Option<Tensor>> {
        self.bound.iter().map(|b| b.and_then(|v| grads.take(v))).collect()
    }
}
