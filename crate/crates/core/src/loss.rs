//! SI-SDR and the composite mask/spectrum/waveform training loss.


use crate::dsp::{ComplexSpectrogram, MaskPair};
use crate::error::{contract, Result};
use crate::graph::{si_sdr_value_grad, Graph, NodeId};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the magnitude term; the spectrum term gets `1 − alpha`.
    pub alpha: f64,
    /// Weight of the negative SI-SDR term.
    pub beta: f64,
    pub sisdr_eps: f64,
    pub sisdr_cap_db: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1e-4,
            sisdr_eps: 1e-8,
            sisdr_cap_db: 30.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || self.beta < 0.0 || self.sisdr_cap_db <= 0.0 {
            return Err(contract("loss_weights", "need alpha in [0,1], beta ≥ 0, cap > 0"));
        }
        Ok(())
    }
}

/// Scale-invariant SDR in dB, capped to `±cap_db`.
pub fn si_sdr<S: Real>(est: &[S], reference: &[S], eps: f64, cap_db: f64) -> Result<f64> {
    Ok(si_sdr_value_grad(est, reference, eps, cap_db, false)?.0)
}

/// Individual loss components of one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub mag: f64,
    pub spec: f64,
    /// SI-SDR of the reconstruction in dB (the loss uses its negative).
    pub si_sdr_db: f64,
}

/// Nodes of a recorded composite loss.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub total: NodeId,
    pub mag: NodeId,
    pub spec: NodeId,
    pub si_sdr: NodeId,
}

impl LossNodes {
    pub fn terms<S: Real>(&self, g: &Graph<'_, S>) -> LossTerms {
        LossTerms {
            total: g.value(self.total).item().f64(),
            mag: g.value(self.mag).item().f64(),
            spec: g.value(self.spec).item().f64(),
            si_sdr_db: g.value(self.si_sdr).item().f64(),
        }
    }
}

/// Records the composite loss for a stacked `F×T×2` mask estimate.
///
/// `mix_ref` is the single-channel reference-microphone spectrogram the mask
/// is applied to; `direct_ref` the time-domain target.
pub fn composite_loss_graph<S: Real>(
    g: &mut Graph<'_, S>,
    mask_est: NodeId,
    mask_target: &Tensor<S>,
    mix_ref: &ComplexSpectrogram<S>,
    direct_ref: &[S],
    w: &LossWeights,
) -> Result<LossNodes> {
    w.validate()?;
    let (f, t, m) = mix_ref.dims();
    if m != 1 || g.value(mask_est).shape() != [f, t, 2] || mask_target.shape() != [f, t, 2] {
        return Err(contract("composite_loss", "mask and reference spectrogram shapes differ"));
    }
    let tgt = g.input(mask_target.clone());
    let me = g.magnitude(mask_est)?;
    let mt = g.magnitude(tgt)?;
    let mag = g.mse(me, mt)?;
    let spec = g.mse(mask_est, tgt)?;
    let (xr, xi) = mix_ref.channel_planes(0);
    let prod = g.complex_mul_const(mask_est, xr, xi)?;
    let wav = g.istft(prod, direct_ref.len())?;
    let sdr = g.si_sdr(wav, direct_ref.to_vec(), w.sisdr_eps, w.sisdr_cap_db)?;
    let total = g.lin_comb(&[(mag, w.alpha), (spec, 1.0 - w.alpha), (sdr, -w.beta)])?;
    Ok(LossNodes { total, mag, spec, si_sdr: sdr })
}

/// Evaluates the composite loss without keeping gradients.
pub fn composite_loss<S: Real>(
    mask_est: &MaskPair<S>,
    mask_target: &MaskPair<S>,
    mix_ref: &ComplexSpectrogram<S>,
    direct_ref: &[S],
    w: &LossWeights,
) -> Result<LossTerms> {
    let mut g = Graph::new();
    let est = g.input(mask_est.to_stacked());
    let nodes = composite_loss_graph(&mut g, est, &mask_target.to_stacked(), mix_ref, direct_ref, w)?;
    Ok(nodes.terms(&g))
}

/// Mean of a slice of loss terms.
pub fn mean_terms(xs: &[LossTerms]) -> LossTerms {
    let n = xs.len().max(1) as f64;
    let sum = |f: fn(&LossTerms) -> f64| xs.iter().map(f).sum::<f64>() / n;
    LossTerms {
        total: sum(|x| x.total),
        mag: sum(|x| x.mag),
        spec: sum(|x| x.spec),
        si_sdr_db: sum(|x| x.si_sdr_db),
    }
}
