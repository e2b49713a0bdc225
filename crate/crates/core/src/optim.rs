//! Adam with plateau halving of the learning rate.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::params::ParameterStore;
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const INITIAL_LR: f64 = 1e-4;
/// Validation epochs without improvement before the learning rate halves.
pub const PLATEAU_PATIENCE: u32 = 5;

/// Optimizer moments plus the bookkeeping needed to resume training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<S> {
    pub m: ParameterStore<S>,
    pub v: ParameterStore<S>,
    pub step: u64,
    pub epoch: u32,
    pub lr: f64,
    pub best_val: f64,
    pub stale_epochs: u32,
}

impl<S: Real> TrainState<S> {
    /// Zeroed moments shaped like `params`.
    pub fn new(params: &ParameterStore<S>, lr: f64) -> Self {
        let zeros = |p: &ParameterStore<S>| {
            let mut s = ParameterStore::new();
            for (name, t) in p.iter() {
                s.insert(name, Tensor::zeros(t.shape())).expect("unique names");
            }
            s
        };
        Self {
            m: zeros(params),
            v: zeros(params),
            step: 0,
            epoch: 0,
            lr,
            best_val: f64::INFINITY,
            stale_epochs: 0,
        }
    }

    /// Records a validation loss; returns `true` if the learning rate was
    /// halved as a result.
    pub fn observe_validation(&mut self, val: f64) -> bool {
        if val < self.best_val {
            self.best_val = val;
            self.stale_epochs = 0;
            return false;
        }
        self.stale_epochs += 1;
        if self.stale_epochs >= PLATEAU_PATIENCE {
            self.lr *= 0.5;
            self.stale_epochs = 0;
            return true;
        }
        false
    }
}

/// One Adam update of every parameter from its accumulated gradient.
pub fn adam_step<S: Real>(store: &mut ParameterStore<S>, state: &mut TrainState<S>) -> Result<()> {
    use num_traits::Float;
    let missing: Vec<String> = store
        .iter()
        .filter(|(_, t)| !t.has_grad())
        .map(|(n, _)| n.into())
        .collect();
    if let Some(n) = missing.first() {
        return Err(contract("adam_step", alloc::format!("`{n}` has no gradient")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - Float::powi(BETA1, t);
    let c2 = 1.0 - Float::powi(BETA2, t);
    let (b1, b2) = (S::of(BETA1), S::of(BETA2));
    let (one, lr, eps) = (S::one(), state.lr, ADAM_EPS);
    for (name, p) in store.iter_mut() {
        let m = state.m.get_mut(name)?.data_mut();
        let v = state.v.get_mut(name)?.data_mut();
        let (w, g) = p.data_and_grad_mut();
        let g = g.expect("checked above");
        for i in 0..w.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let mh = m[i].f64() / c1;
            let vh = v[i].f64() / c2;
            w[i] -= S::of(lr * mh / (Float::sqrt(vh) + eps));
        }
    }
    Ok(())
}
