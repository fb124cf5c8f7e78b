use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ensure, Error, Result};
use crate::kernel::{Scalar, Tensor};

/// Named tensors in insertion order. Insertion order is also the
/// serialization order, so two stores built the same way save identically.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T: Scalar> {
    tensors: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { tensors: IndexMap::new() }
    }

    /// Adds a new tensor; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        ensure(!self.tensors.contains_key(&name), || format!("duplicate parameter name {name:?}"))?;
        self.tensors.insert(name, value);
        Ok(())
    }

    /// Replaces an existing tensor with one of the same shape.
    pub fn replace(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let slot = self.get_mut(name)?;
        ensure(slot.shape() == value.shape(), || {
            format!("parameter {name:?} is {:?}, replacement is {:?}", slot.shape(), value.shape())
        })?;
        *slot = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors.get(name).ok_or_else(|| Error::contract(format!("missing parameter {name:?}")))
    }

    pub(crate) fn get_full(&self, name: &str) -> Result<(&str, &Tensor<T>)> {
        self.tensors
            .get_key_value(name)
            .map(|(k, v)| (k.as_str(), v))
            .ok_or_else(|| Error::contract(format!("missing parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors.get_mut(name).ok_or_else(|| Error::contract(format!("missing parameter {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Total number of scalar entries.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Scalar count over tensors whose name starts with `prefix`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.tensors.iter().filter(|(k, _)| k.starts_with(prefix)).map(|(_, v)| v.numel()).sum()
    }

    /// Moves every tensor of `other` into `self`.
    pub fn extend(&mut self, other: ParamStore<T>) -> Result<()> {
        for (k, v) in other.tensors {
            self.insert(k, v)?;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore { tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }
}

/// Seeded parameter initializer. Values are drawn in `f64` and rounded to the
/// target precision, so `f32` and `f64` stores built from one seed agree up
/// to rounding.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }

    pub fn normal<T: Scalar>(&mut self, shape: &[usize], std: f64) -> Tensor<T> {
        let dist = Normal::new(0.0, std).expect("finite non-negative std");
        Tensor::from_fn(shape, |_| T::lit(dist.sample(&mut self.rng)))
    }

    pub fn uniform<T: Scalar>(&mut self, shape: &[usize], bound: f64) -> Tensor<T> {
        Tensor::from_fn(shape, |_| T::lit(self.rng.random_range(-bound..=bound)))
    }
}
