use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::Real;
use crate::error::TensorError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.002,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction over a fixed set of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    params: Vec<ParamId>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, params: Vec<ParamId>, store: &ParamStore<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|id| vec![T::zero(); store.value(*id).len()]).collect();
        AdamState {
            config,
            step: 0,
            params,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn moments(&self, i: usize) -> (&[T], &[T]) {
        (&self.m[i], &self.v[i])
    }

    pub fn set_moments(&mut self, i: usize, m: Vec<T>, v: Vec<T>) {
        assert_eq!(m.len(), self.m[i].len());
        assert_eq!(v.len(), self.v[i].len());
        self.m[i] = m;
        self.v[i] = v;
    }

    /// One update of every managed parameter. Gradients are consumed
    /// (reset to zero). Fails without touching anything if any parameter
    /// has no gradient.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<(), TensorError> {
        if let Some(id) = self.params.iter().find(|id| store.grad(**id).is_none()) {
            return Err(TensorError::MissingGrad {
                name: store.name(*id).to_string(),
            });
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let one = T::one();
        let bc1 = T::from_f64(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::from_f64(1.0 - c.beta2.powi(self.step as i32));
        let (lr, eps) = (T::from_f64(c.lr), T::from_f64(c.eps));
        for (i, id) in self.params.iter().enumerate() {
            let g = store.take_grad(*id)?;
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let theta = store.value_mut(*id).data_mut();
            for j in 0..g.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                theta[j] = theta[j] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
