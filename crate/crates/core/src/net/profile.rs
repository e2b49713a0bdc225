//! Static cost accounting by walking the network with shapes only.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use core::marker::PhantomData;

use crate::error::Result;
use crate::graph::{infer_shape, OpKind, Ops};
use crate::kernels::Axis;
use crate::net::config::{FcaKind, ModelConfig};
use crate::net::fca::fca_attention_decoupled;
use crate::net::model::model_forward;
use crate::params::{Init, ParameterStore};
use crate::scalar::Real;

/// One counted operation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCost {
    pub name: String,
    pub op: &'static str,
    pub out_shape: Vec<usize>,
    pub macs: u64,
    pub flops: u64,
}

/// Parameter declaration collected during a walk.
pub type ParamDecl = (String, Vec<usize>, Init);

/// Cost totals plus the per-layer breakdown.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Profile {
    pub layers: Vec<LayerCost>,
    pub params: Vec<ParamDecl>,
    pub macs: u64,
    pub flops: u64,
}

impl Profile {
    pub fn gmacs(&self) -> f64 {
        self.macs as f64 / 1e9
    }

    pub fn gflops(&self) -> f64 {
        self.flops as f64 / 1e9
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.1.iter().product::<usize>()).sum()
    }

    /// Tab-separated table: name, op, output shape, MACs, FLOPs.
    pub fn to_table(&self) -> String {
        let mut s = String::from("name\top\tshape\tmacs\tflops\n");
        for l in &self.layers {
            let shape: Vec<String> = l.out_shape.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", l.name, l.op, shape.join("x"), l.macs, l.flops);
        }
        let _ = writeln!(s, "total\t-\t-\t{}\t{}", self.macs, self.flops);
        s
    }
}

/// Shape-only [`Ops`] implementation that records costs and declarations.
pub struct Profiler<S> {
    pub profile: Profile,
    scope: String,
    _s: PhantomData<S>,
}

impl<S: Real> Default for Profiler<S> {
    fn default() -> Self {
        Self {
            profile: Profile::default(),
            scope: String::new(),
            _s: PhantomData,
        }
    }
}

impl<S: Real> Profiler<S> {
    pub fn new() -> Self {
        Self::default()
    }

    fn count(&mut self, kind: OpKind, ins: &[&Vec<usize>]) -> Result<Vec<usize>> {
        let shapes: Vec<&[usize]> = ins.iter().map(|v| v.as_slice()).collect();
        let out = infer_shape(&kind, &shapes)?;
        let n_out: u64 = out.iter().product::<usize>() as u64;
        let n_in: u64 = ins[0].iter().product::<usize>() as u64;
        let (macs, extra) = match &kind {
            OpKind::Pointwise { .. } => (n_out * ins[1][0] as u64, 0),
            OpKind::Depthwise2d => (n_out * (ins[1][0] * ins[1][1]) as u64, 0),
            OpKind::Conv1d(_) => (n_out * ins[1][0] as u64, 0),
            OpKind::TConv2 => (n_out * ins[1][2] as u64, 0),
            OpKind::AvgPool2 | OpKind::MaxPool2 => (0, n_in),
            OpKind::Upsample2 | OpKind::Concat => (0, 0),
            _ => (0, n_out),
        };
        self.profile.layers.push(LayerCost {
            name: self.scope.clone(),
            op: kind.name(),
            out_shape: out.clone(),
            macs,
            flops: 2 * macs + extra,
        });
        self.profile.macs += macs;
        self.profile.flops += 2 * macs + extra;
        Ok(out)
    }
}

impl<S: Real> Ops<S> for Profiler<S> {
    type V = Vec<usize>;

    fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Vec<usize>> {
        self.scope = name.rsplit_once('.').map_or(name, |p| p.0).to_string();
        if !self.profile.params.iter().any(|p| p.0 == name) {
            self.profile.params.push((name.to_string(), shape.to_vec(), init));
        }
        Ok(shape.to_vec())
    }

    fn shape(&self, v: &Vec<usize>) -> Vec<usize> {
        v.clone()
    }

    fn pointwise(&mut self, x: &Vec<usize>, w: &Vec<usize>, b: Option<&Vec<usize>>) -> Result<Vec<usize>> {
        match b {
            Some(b) => self.count(OpKind::Pointwise { bias: true }, &[x, w, b]),
            None => self.count(OpKind::Pointwise { bias: false }, &[x, w]),
        }
    }
    fn depthwise2d(&mut self, x: &Vec<usize>, w: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::Depthwise2d, &[x, w])
    }
    fn conv1d_axis(&mut self, x: &Vec<usize>, w: &Vec<usize>, axis: Axis) -> Result<Vec<usize>> {
        self.count(OpKind::Conv1d(axis), &[x, w])
    }
    fn avg_pool2(&mut self, x: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::AvgPool2, &[x])
    }
    fn max_pool2(&mut self, x: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::MaxPool2, &[x])
    }
    fn upsample2(&mut self, x: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::Upsample2, &[x])
    }
    fn tconv2(&mut self, x: &Vec<usize>, w: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::TConv2, &[x, w])
    }
    fn sigmoid(&mut self, x: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::Sigmoid, &[x])
    }
    fn prelu(&mut self, x: &Vec<usize>, a: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::Prelu, &[x, a])
    }
    fn mul(&mut self, a: &Vec<usize>, b: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::Mul, &[a, b])
    }
    fn add(&mut self, a: &Vec<usize>, b: &Vec<usize>) -> Result<Vec<usize>> {
        self.count(OpKind::Add, &[a, b])
    }
    fn concat(&mut self, parts: &[&Vec<usize>]) -> Result<Vec<usize>> {
        self.count(OpKind::Concat, parts)
    }
}

/// MACs and FLOPs of one forward pass on an `F×T×2M` input.
///
/// Conventions: convolutions count one MAC per weight tap per output
/// element; FLOPs are `2·MACs` plus one per element for pooling (per input
/// element), activations and elementwise products/sums. Copies are free.
pub fn count_macs_flops(cfg: &ModelConfig, f: usize, t: usize) -> Result<Profile> {
    let mut p = Profiler::<f32>::new();
    let x = alloc::vec![f, t, cfg.input_channels()];
    model_forward(&mut p, cfg, &x)?;
    Ok(p.profile)
}

/// Parameter declarations of `cfg`, independent of input extents.
pub fn declare_params(cfg: &ModelConfig) -> Result<Vec<ParamDecl>> {
    Ok(count_macs_flops(cfg, 16, 16)?.params)
}

/// Freshly initialised parameters for `cfg`.
pub fn init_params<S: Real>(cfg: &ModelConfig, seed: u64) -> Result<ParameterStore<S>> {
    ParameterStore::initialise(&declare_params(cfg)?, seed)
}

/// Cost of the two 1D convolutions of a decoupled attention on a pooled
/// `F̂×T̂×C` map with kernel length `k`.
pub fn fca_attention_cost(f_hat: usize, t_hat: usize, c: usize, k: usize, kind: FcaKind) -> Result<Profile> {
    let mut p = Profiler::<f32>::new();
    let z = alloc::vec![f_hat, t_hat, c];
    let d1 = p.param("fca.d1", &[k, c], Init::Zeros)?;
    let d2 = p.param("fca.d2", &[k, c], Init::Zeros)?;
    fca_attention_decoupled(&mut p, &z, kind, &d1, &d2)?;
    Ok(p.profile)
}

/// MACs of the dense attention on the same map: every output sums over a
/// whole row (`F̂·T̂²·C` along time), a whole column (`T̂·F̂²·C` along
/// frequency), or both in sequence.
pub fn dense_fca_macs(f_hat: usize, t_hat: usize, c: usize, kind: FcaKind) -> u64 {
    let (f, t, c) = (f_hat as u64, t_hat as u64, c as u64);
    match kind {
        FcaKind::Time => f * t * t * c,
        FcaKind::Frequency => t * f * f * c,
        FcaKind::FrequencyTime => f * t * t * c + t * f * f * c,
    }
}
