use std::collections::HashMap;

use super::{Real, Tensor};
use crate::error::TensorError;

/// Handle to a parameter in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
struct Param<T> {
    name: String,
    value: Tensor<T>,
    grad: Vec<T>,
    has_grad: bool,
}

/// Named trainable tensors with their accumulated gradients.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    by_name: HashMap<String, ParamId>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    /// Register a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name `{name}`"
        );
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            grad: vec![T::zero(); value.len()],
            value,
            has_grad: false,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    /// Accumulated gradient, or `None` if no backward pass reached it since
    /// the last reset.
    pub fn grad(&self, id: ParamId) -> Option<&[T]> {
        let p = &self.params[id.0];
        p.has_grad.then_some(&p.grad[..])
    }

    /// True when the parameter has no gradient or an all-zero one.
    pub fn grad_is_zero(&self, id: ParamId) -> bool {
        self.grad(id).is_none_or(|g| g.iter().all(|v| *v == T::zero()))
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &[T]) {
        let p = &mut self.params[id.0];
        debug_assert_eq!(p.grad.len(), g.len());
        for (a, b) in p.grad.iter_mut().zip(g) {
            *a = *a + *b;
        }
        p.has_grad = true;
    }

    pub(crate) fn take_grad(&mut self, id: ParamId) -> Result<Vec<T>, TensorError> {
        let p = &mut self.params[id.0];
        if !p.has_grad {
            return Err(TensorError::MissingGrad {
                name: p.name.clone(),
            });
        }
        p.has_grad = false;
        let zeros = vec![T::zero(); p.grad.len()];
        Ok(std::mem::replace(&mut p.grad, zeros))
    }

    pub fn zero_grad(&mut self, ids: &[ParamId]) {
        for id in ids {
            let p = &mut self.params[id.0];
            p.grad.iter_mut().for_each(|g| *g = T::zero());
            p.has_grad = false;
        }
    }

    /// Give every listed parameter a gradient; unreached ones get zeros.
    pub fn fill_missing_grads(&mut self, ids: &[ParamId]) {
        for id in ids {
            self.params[id.0].has_grad = true;
        }
    }

    pub fn zero_all_grads(&mut self) {
        let ids: Vec<_> = self.ids().collect();
        self.zero_grad(&ids);
    }

    pub fn num_elements(&self, ids: &[ParamId]) -> usize {
        ids.iter().map(|id| self.value(*id).len()).sum()
    }
}
