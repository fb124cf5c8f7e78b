use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use crate::error::Result;
use crate::kernel::{Scalar, Tape, Tensor, Var};

/// A tape plus lazily bound parameters from one store.
///
/// Parameters are bound on first use, borrowed rather than copied. In a
/// trainable graph they are differentiable leaves; otherwise constants.
pub struct Graph<'a, T: Scalar> {
    pub tape: Tape<'a, T>,
    store: &'a ParamStore<T>,
    bound: IndexMap<&'a str, Var>,
    trainable: bool,
}

impl<'a, T: Scalar> Graph<'a, T> {
    pub fn eval(store: &'a ParamStore<T>) -> Self {
        Self { tape: Tape::new(), store, bound: IndexMap::new(), trainable: false }
    }

    pub fn trainable(store: &'a ParamStore<T>) -> Self {
        Self { tape: Tape::new(), store, bound: IndexMap::new(), trainable: true }
    }

    pub fn store(&self) -> &'a ParamStore<T> {
        self.store
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let (key, value) = self.store.get_full(name)?;
        let v = if self.trainable { self.tape.leaf_ref(value) } else { self.tape.constant_ref(value) };
        self.bound.insert(key, v);
        Ok(v)
    }

    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.tape.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        self.tape.value(v)
    }

    /// Adjoints of every bound parameter with respect to the scalar `out`.
    /// Parameters that were never bound are absent from the result.
    pub fn gradients(&self, out: Var) -> Result<ParamStore<T>> {
        let mut grads = self.tape.backward(out)?;
        let mut store = ParamStore::new();
        for (&name, &v) in &self.bound {
            store.insert(name, grads.take(v))?;
        }
        Ok(store)
    }
}

/// Stochastic regularization applied during training.
pub struct Regularization<'r> {
    pub rng: &'r mut ChaCha8Rng,
    /// DropPath rate at the deepest residual branch; shallower branches scale
    /// linearly down to zero.
    pub drop_path: f64,
    pub dropout: f64,
}

pub enum Mode<'r> {
    Eval,
    Train(Regularization<'r>),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    /// Keep-scale for one residual branch at the given rate: 0 when dropped,
    /// `1 / (1 - rate)` when kept, exactly 1 in eval mode.
    pub fn drop_path_scale(&mut self, rate: f64) -> f64 {
        match self {
            Mode::Train(reg) if rate > 0.0 => {
                if reg.rng.random::<f64>() < rate {
                    0.0
                } else {
                    1.0 / (1.0 - rate)
                }
            }
            _ => 1.0,
        }
    }
}
