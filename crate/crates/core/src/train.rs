//! Batch gradient averaging and the optimizer step.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Result};
use crate::loss::{mean_terms, LossTerms, LossWeights};
use crate::net::ModelConfig;
use crate::optim::{adam_step, TrainState};
use crate::params::ParameterStore;
use crate::pipeline::{clip_gradients, PreparedSegment};
use crate::scalar::Real;

pub const BATCH_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub weights: LossWeights,
    /// Global gradient-norm clip; off unless set.
    pub grad_clip: Option<f64>,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            grad_clip: None,
        }
    }
}

/// Averages per-clip gradients into the store and takes one Adam step.
/// Accumulation follows slice order, so results do not depend on how the
/// gradients were computed.
pub fn apply_gradients<S: Real>(
    store: &mut ParameterStore<S>,
    state: &mut TrainState<S>,
    per_clip: &[Vec<(String, Vec<S>)>],
    grad_clip: Option<f64>,
) -> Result<()> {
    if per_clip.is_empty() {
        return Err(contract("apply_gradients", "empty batch"));
    }
    store.zero_grads();
    let scale = S::of(1.0 / per_clip.len() as f64);
    for grads in per_clip {
        for (name, g) in grads {
            store.accumulate_grad(name, g, scale)?;
        }
    }
    if let Some(max) = grad_clip {
        let norm = Float::sqrt(
            store
                .iter()
                .flat_map(|(_, t)| t.grad().unwrap_or(&[]).iter().map(|v| v.f64() * v.f64()))
                .sum::<f64>(),
        );
        if norm > max {
            let k = S::of(max / norm);
            for (_, t) in store.iter_mut() {
                if let Some(g) = t.grad_mut() {
                    g.iter_mut().for_each(|v| *v *= k);
                }
            }
        }
    }
    adam_step(store, state)
}

/// One sequential training step over `batch`. Returns the mean loss terms
/// before the update.
pub fn train_step<S: Real>(
    store: &mut ParameterStore<S>,
    state: &mut TrainState<S>,
    cfg: &ModelConfig,
    batch: &[&PreparedSegment<S>],
    opts: &StepOptions,
) -> Result<LossTerms> {
    let mut terms = Vec::with_capacity(batch.len());
    let mut grads = Vec::with_capacity(batch.len());
    for seg in batch {
        let (t, g) = clip_gradients(store, cfg, seg, &opts.weights)?;
        terms.push(t);
        grads.push(g);
    }
    apply_gradients(store, state, &grads, opts.grad_clip)?;
    Ok(mean_terms(&terms))
}

/// Shuffled example order for `epoch`, reproducible from `seed`.
pub fn epoch_order(n: usize, seed: u64, epoch: u32) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mix = seed ^ (u64::from(epoch) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix));
    idx
}

/// Splits an order into batches of at most [`BATCH_SIZE`].
pub fn batches(order: &[usize]) -> impl Iterator<Item = &[usize]> {
    order.chunks(BATCH_SIZE)
}
