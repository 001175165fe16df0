use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::{Gradients, Tape, Tensor, Var};

/// Named trainable tensors in a fixed insertion order (the checkpoint order).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<T> {
    entries: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::DuplicateParam(name));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.entries.values_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(Tensor::is_finite)
    }

    /// Records every tensor as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        self.bind_with(tape, true)
    }

    /// Records every tensor as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape<T>) -> Bound {
        self.bind_with(tape, false)
    }

    fn bind_with(&self, tape: &mut Tape<T>, trainable: bool) -> Bound {
        let vars = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), tape.leaf(v.clone(), trainable)))
            .collect();
        Bound { vars }
    }

    /// All entries concatenated in store order.
    pub fn flatten(&self) -> Tensor<T> {
        let data: Vec<T> = self.entries.values().flat_map(|t| t.data().iter().copied()).collect();
        Tensor::from_fn(&[data.len()], |i| data[i])
    }

    /// Inverse of [`flatten`](Self::flatten) using this store's names and shapes.
    pub fn unflatten(&self, flat: &[T]) -> Result<Self> {
        if flat.len() != self.scalar_count() {
            return Err(Error::shape("unflatten", &[flat.len()], &[self.scalar_count()]));
        }
        let mut offset = 0;
        let mut entries = IndexMap::new();
        for (name, t) in &self.entries {
            let data = flat[offset..offset + t.len()].to_vec();
            offset += t.len();
            entries.insert(name.clone(), Tensor::new(t.shape().to_vec(), data)?);
        }
        Ok(Self { entries })
    }

    /// Binds every entry as a slice of one flat vector (as laid out by `flatten`).
    pub fn bind_flat(&self, tape: &mut Tape<T>, flat: Var) -> Result<Bound> {
        let mut offset = 0;
        let mut vars = IndexMap::new();
        for (name, t) in &self.entries {
            let piece = tape.slice(flat, 0, offset, t.len())?;
            vars.insert(name.clone(), tape.reshape(piece, t.shape())?);
            offset += t.len();
        }
        Ok(Bound { vars })
    }

    /// Scaled-uniform weight in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn insert_uniform(&mut self, name: &str, shape: &[usize], fan_in: usize, rng: &mut RngStream) -> Result<()> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let t = Tensor::from_fn(shape, |_| T::lit(rng.uniform_range(-bound, bound)));
        self.insert(name, t)
    }

    pub fn insert_zeros(&mut self, name: &str, shape: &[usize]) -> Result<()> {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn insert_ones(&mut self, name: &str, shape: &[usize]) -> Result<()> {
        self.insert(name, Tensor::full(shape, T::one()))
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }
}

/// Tape handles for every entry of a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: IndexMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    /// Gradients in store order; parameters the root does not depend on get zeros.
    pub fn gradients<T: Scalar>(&self, grads: &Gradients<T>, store: &ParamStore<T>) -> Vec<Tensor<T>> {
        store
            .iter()
            .map(|(name, value)| {
                self.vars
                    .get(name)
                    .and_then(|&v| grads.get(v))
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(value.shape()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_are_rejected() {
        let mut s = ParamStore::<f64>::new();
        s.insert_zeros("a", &[2]).unwrap();
        assert_eq!(s.insert_zeros("a", &[2]).unwrap_err(), Error::DuplicateParam("a".into()));
        assert_eq!(s.get("b").unwrap_err(), Error::MissingParam("b".into()));
    }

    #[test]
    fn uniform_init_respects_bound() {
        let mut s = ParamStore::<f64>::new();
        let mut rng = RngStream::new(3, 0);
        s.insert_uniform("w", &[16, 16], 16, &mut rng).unwrap();
        assert!(s.get("w").unwrap().data().iter().all(|v| v.abs() <= 0.25));
    }
}
