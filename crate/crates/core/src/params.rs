//! Named parameters and their initialisation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// How a freshly declared parameter is filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// He-uniform: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
    HeUniform { fan_in: usize },
    Zeros,
    Constant(f64),
}

impl Init {
    pub fn fill<S: Real>(self, n: usize, rng: &mut ChaCha8Rng) -> Vec<S> {
        use num_traits::Float;
        match self {
            Init::HeUniform { fan_in } => {
                let b = Float::sqrt(6.0 / fan_in.max(1) as f64);
                (0..n).map(|_| S::of(rng.random_range(-b..b))).collect()
            }
            Init::Zeros => alloc::vec![S::zero(); n],
            Init::Constant(v) => alloc::vec![S::of(v); n],
        }
    }
}

/// Parameter tensors keyed by name, with an accumulated gradient each.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore<S> {
    map: BTreeMap<String, Tensor<S>>,
}

impl<S: Real> Default for ParameterStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> ParameterStore<S> {
    pub fn new() -> Self {
        Self { map: BTreeMap::new() }
    }

    /// Builds a store from declarations `(name, shape, init)`, drawing all
    /// random values from one stream seeded by `seed`, in name order.
    pub fn initialise(decls: &[(String, Vec<usize>, Init)], seed: u64) -> Result<Self> {
        let mut sorted: Vec<&(String, Vec<usize>, Init)> = decls.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = Self::new();
        for (name, shape, init) in sorted {
            let n = shape.iter().product();
            store.insert(name, Tensor::new(shape, init.fill(n, &mut rng))?)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, name: &str, t: Tensor<S>) -> Result<()> {
        if self.map.contains_key(name) {
            return Err(contract("param", alloc::format!("`{name}` declared twice")));
        }
        self.map.insert(name.to_string(), t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.map.get(name).ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<S>> {
        self.map.get_mut(name).ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total scalar count.
    pub fn num_scalars(&self) -> usize {
        self.map.values().map(Tensor::len).sum()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<S>)> {
        self.map.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Allocates (if needed) and zeroes every gradient buffer.
    pub fn zero_grads(&mut self) {
        for t in self.map.values_mut() {
            t.enable_grad();
            t.zero_grad();
        }
    }

    /// Adds `scale · g` to the stored gradient of `name`.
    pub fn accumulate_grad(&mut self, name: &str, g: &[S], scale: S) -> Result<()> {
        let t = self.get_mut(name)?;
        if g.len() != t.len() {
            return Err(contract("accumulate_grad", alloc::format!("`{name}` gradient size mismatch")));
        }
        t.enable_grad();
        let acc = t.grad_mut().expect("grad enabled");
        for (a, &v) in acc.iter_mut().zip(g) {
            *a += scale * v;
        }
        Ok(())
    }

    /// Largest absolute element difference over all shared parameters.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.map
            .iter()
            .filter_map(|(k, v)| other.map.get(k).map(|o| v.max_abs_diff(o)))
            .fold(0.0, f64::max)
    }

    pub fn cast<T: Real>(&self) -> ParameterStore<T> {
        ParameterStore {
            map: self.map.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }
}
