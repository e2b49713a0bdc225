//! Reverse-mode differentiation over a fixed set of operations.
//!
//! Network code is written once against [`Ops`]. [`Eval`] runs it eagerly on
//! plain tensors, [`Graph`] records a tape for [`Graph::backward`], and the
//! profiler in `net` walks it with shapes only.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::{Stft, N_BINS};
use crate::error::{contract, Error, Result};
use crate::kernels::{self as k, Axis};
use crate::params::{Init, ParameterStore};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Operations a network forward pass may use.
pub trait Ops<S: Real> {
    type V: Clone;

    /// Looks up (or, for shape-only walkers, declares) a parameter.
    fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Self::V>;
    fn shape(&self, v: &Self::V) -> Vec<usize>;

    fn pointwise(&mut self, x: &Self::V, w: &Self::V, b: Option<&Self::V>) -> Result<Self::V>;
    fn depthwise2d(&mut self, x: &Self::V, w: &Self::V) -> Result<Self::V>;
    fn conv1d_axis(&mut self, x: &Self::V, w: &Self::V, axis: Axis) -> Result<Self::V>;
    fn avg_pool2(&mut self, x: &Self::V) -> Result<Self::V>;
    fn max_pool2(&mut self, x: &Self::V) -> Result<Self::V>;
    fn upsample2(&mut self, x: &Self::V) -> Result<Self::V>;
    fn tconv2(&mut self, x: &Self::V, w: &Self::V) -> Result<Self::V>;
    fn sigmoid(&mut self, x: &Self::V) -> Result<Self::V>;
    fn prelu(&mut self, x: &Self::V, alpha: &Self::V) -> Result<Self::V>;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn concat(&mut self, parts: &[&Self::V]) -> Result<Self::V>;
}

/// Operation tags shared by the evaluator, the tape and the profiler.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    Pointwise { bias: bool },
    Depthwise2d,
    Conv1d(Axis),
    AvgPool2,
    MaxPool2,
    Upsample2,
    TConv2,
    Sigmoid,
    Prelu,
    Mul,
    Add,
    Concat,
    Mse,
    Magnitude,
    ComplexMul,
    Istft { len: usize },
    SiSdr { eps: f64, cap_db: f64 },
    LinComb(Vec<f64>),
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Pointwise { .. } => "conv2d_pointwise",
            OpKind::Depthwise2d => "conv2d_depthwise",
            OpKind::Conv1d(_) => "conv1d_depthwise_axis",
            OpKind::AvgPool2 => "avg_pool2",
            OpKind::MaxPool2 => "max_pool2",
            OpKind::Upsample2 => "nearest_upsample2",
            OpKind::TConv2 => "transposed_conv2",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Prelu => "prelu",
            OpKind::Mul => "elementwise_mul",
            OpKind::Add => "elementwise_add",
            OpKind::Concat => "concat_channels",
            OpKind::Mse => "mse",
            OpKind::Magnitude => "magnitude",
            OpKind::ComplexMul => "complex_mul",
            OpKind::Istft { .. } => "istft",
            OpKind::SiSdr { .. } => "si_sdr",
            OpKind::LinComb(_) => "lin_comb",
        }
    }
}

fn dims3(op: &'static str, s: &[usize]) -> Result<(usize, usize, usize)> {
    match *s {
        [f, t, c] => Ok((f, t, c)),
        _ => Err(contract(op, alloc::format!("expected F×T×C, got {s:?}"))),
    }
}

fn same(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(contract(op, alloc::format!("shapes {a:?} and {b:?} differ")));
    }
    Ok(())
}

/// Validates operand shapes and returns the output shape.
pub fn infer_shape(kind: &OpKind, ins: &[&[usize]]) -> Result<Vec<usize>> {
    let op = kind.name();
    let arity = |n: usize| -> Result<()> {
        if ins.len() != n {
            return Err(contract(op, alloc::format!("expected {n} operands, got {}", ins.len())));
        }
        Ok(())
    };
    match kind {
        OpKind::Pointwise { bias } => {
            arity(if *bias { 3 } else { 2 })?;
            let (f, t, c) = dims3(op, ins[0])?;
            let [ci, co] = *ins[1] else {
                return Err(contract(op, "kernel must be Cin×Cout"));
            };
            if ci != c {
                return Err(contract(op, alloc::format!("kernel expects {ci} input channels, input has {c}")));
            }
            if *bias && ins[2] != [co] {
                return Err(contract(op, "bias must have Cout entries"));
            }
            Ok(vec![f, t, co])
        }
        OpKind::Depthwise2d => {
            arity(2)?;
            let (_, _, c) = dims3(op, ins[0])?;
            let [kh, kw, kc] = *ins[1] else {
                return Err(contract(op, "kernel must be k×k×C"));
            };
            if kh != kw || kh % 2 == 0 {
                return Err(contract(op, alloc::format!("kernel {kh}×{kw} must be square and odd")));
            }
            if kc != c {
                return Err(contract(op, "kernel channel count differs from input"));
            }
            Ok(ins[0].to_vec())
        }
        OpKind::Conv1d(_) => {
            arity(2)?;
            let (_, _, c) = dims3(op, ins[0])?;
            let [kk, kc] = *ins[1] else {
                return Err(contract(op, "kernel must be K×C"));
            };
            if kk % 2 == 0 {
                return Err(contract(op, "kernel length must be odd"));
            }
            if kc != c {
                return Err(contract(op, "kernel channel count differs from input"));
            }
            Ok(ins[0].to_vec())
        }
        OpKind::AvgPool2 | OpKind::MaxPool2 => {
            arity(1)?;
            let (f, t, c) = dims3(op, ins[0])?;
            k::check_even(op, f, t)?;
            Ok(vec![f / 2, t / 2, c])
        }
        OpKind::Upsample2 => {
            arity(1)?;
            let (f, t, c) = dims3(op, ins[0])?;
            Ok(vec![2 * f, 2 * t, c])
        }
        OpKind::TConv2 => {
            arity(2)?;
            let (f, t, c) = dims3(op, ins[0])?;
            let [2, 2, ci, co] = *ins[1] else {
                return Err(contract(op, "kernel must be 2×2×Cin×Cout"));
            };
            if ci != c {
                return Err(contract(op, "kernel input channels differ from input"));
            }
            Ok(vec![2 * f, 2 * t, co])
        }
        OpKind::Sigmoid => {
            arity(1)?;
            Ok(ins[0].to_vec())
        }
        OpKind::Prelu => {
            arity(2)?;
            let (_, _, c) = dims3(op, ins[0])?;
            if ins[1] != [c] {
                return Err(contract(op, "slope must have one entry per channel"));
            }
            Ok(ins[0].to_vec())
        }
        OpKind::Mul | OpKind::Add => {
            arity(2)?;
            same(op, ins[0], ins[1])?;
            Ok(ins[0].to_vec())
        }
        OpKind::Concat => {
            if ins.is_empty() {
                return Err(contract(op, "nothing to concatenate"));
            }
            let (f, t, _) = dims3(op, ins[0])?;
            let mut ctot = 0;
            for s in ins {
                let (ff, tt, c) = dims3(op, s)?;
                if (ff, tt) != (f, t) {
                    return Err(contract(op, "F and T extents must agree"));
                }
                ctot += c;
            }
            Ok(vec![f, t, ctot])
        }
        OpKind::Mse => {
            arity(2)?;
            same(op, ins[0], ins[1])?;
            Ok(Vec::new())
        }
        OpKind::Magnitude => {
            arity(1)?;
            let (f, t, c) = dims3(op, ins[0])?;
            if c != 2 {
                return Err(contract(op, "expects stacked [re, im] channels"));
            }
            Ok(vec![f, t, 1])
        }
        OpKind::ComplexMul => {
            arity(1)?;
            let (_, _, c) = dims3(op, ins[0])?;
            if c != 2 {
                return Err(contract(op, "expects stacked [re, im] channels"));
            }
            Ok(ins[0].to_vec())
        }
        OpKind::Istft { len } => {
            arity(1)?;
            let (f, t, c) = dims3(op, ins[0])?;
            if f != N_BINS || c != 2 || t == 0 {
                return Err(contract(op, "expects a stacked 256-bin spectrum"));
            }
            Ok(vec![*len])
        }
        OpKind::SiSdr { .. } => {
            arity(1)?;
            if ins[0].len() != 1 {
                return Err(contract(op, "expects a waveform"));
            }
            Ok(Vec::new())
        }
        OpKind::LinComb(c) => {
            arity(c.len())?;
            if ins.iter().any(|s| !s.is_empty()) {
                return Err(contract(op, "combines scalars only"));
            }
            Ok(Vec::new())
        }
    }
}

/// Constant operands for the loss operations.
#[derive(Debug, Clone, Default)]
struct Consts<S> {
    a: Vec<S>,
    b: Vec<S>,
}

/// Evaluates one operation. `aux` receives max-pool argmax indices.
fn forward<S: Real>(
    kind: &OpKind,
    ins: &[&Tensor<S>],
    consts: &Consts<S>,
    aux: &mut Vec<u32>,
) -> Result<Tensor<S>> {
    let shapes: Vec<&[usize]> = ins.iter().map(|t| t.shape()).collect();
    let out_shape = infer_shape(kind, &shapes)?;
    let x = ins[0].data();
    let data = match kind {
        OpKind::Pointwise { bias } => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            let co = out_shape[2];
            k::pointwise_fwd(x, f * t, c, ins[1].data(), co, bias.then(|| ins[2].data()))
        }
        OpKind::Depthwise2d => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            k::depthwise2d_fwd(x, f, t, c, ins[1].data(), ins[1].shape()[0])
        }
        OpKind::Conv1d(axis) => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            k::conv1d_axis_fwd(x, f, t, c, ins[1].data(), ins[1].shape()[0], *axis)
        }
        OpKind::AvgPool2 => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            k::avg_pool2_fwd(x, f, t, c)
        }
        OpKind::MaxPool2 => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            let (o, a) = k::max_pool2_fwd(x, f, t, c);
            *aux = a;
            o
        }
        OpKind::Upsample2 => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            k::upsample2_fwd(x, f, t, c)
        }
        OpKind::TConv2 => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            k::tconv2_fwd(x, f, t, c, ins[1].data(), out_shape[2])
        }
        OpKind::Sigmoid => x.iter().map(|&v| k::sigmoid(v)).collect(),
        OpKind::Prelu => k::prelu_fwd(x, out_shape[2], ins[1].data()),
        OpKind::Mul => x.iter().zip(ins[1].data()).map(|(&a, &b)| a * b).collect(),
        OpKind::Add => x.iter().zip(ins[1].data()).map(|(&a, &b)| a + b).collect(),
        OpKind::Concat => {
            let parts: Vec<(&[S], usize)> = ins.iter().map(|t| (t.data(), t.shape()[2])).collect();
            k::concat_fwd(&parts, out_shape[0] * out_shape[1])
        }
        OpKind::Mse => {
            let n = S::of(x.len().max(1) as f64);
            let s: S = x.iter().zip(ins[1].data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
            vec![s / n]
        }
        OpKind::Magnitude => x.chunks_exact(2).map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).collect(),
        OpKind::ComplexMul => {
            let mut out = Vec::with_capacity(x.len());
            for ((p, &xr), &xi) in x.chunks_exact(2).zip(&consts.a).zip(&consts.b) {
                out.push(p[0] * xr - p[1] * xi);
                out.push(p[0] * xi + p[1] * xr);
            }
            out
        }
        OpKind::Istft { len } => {
            let frames = ins[0].shape()[1];
            let (re, im) = planes_from_stacked(x, N_BINS * frames);
            Stft::<S>::new().synthesize(&re, &im, frames, *len)
        }
        OpKind::SiSdr { eps, cap_db } => {
            let (v, _) = si_sdr_value_grad(x, &consts.a, *eps, *cap_db, false)?;
            vec![S::of(v)]
        }
        OpKind::LinComb(c) => {
            let v: f64 = ins.iter().zip(c).map(|(t, &w)| t.item().f64() * w).sum();
            vec![S::of(v)]
        }
    };
    let t = Tensor::new(&out_shape, data)?;
    if !t.is_finite() {
        return Err(Error::NonFinite(kind.name()));
    }
    Ok(t)
}

/// Stacked `[re, im]` pixels (bin-major F×T) → separate planes.
fn planes_from_stacked<S: Real>(x: &[S], n: usize) -> (Vec<S>, Vec<S>) {
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for p in x.chunks_exact(2) {
        re.push(p[0]);
        im.push(p[1]);
    }
    (re, im)
}

/// SI-SDR in dB (capped to `±cap_db`) and, optionally, its gradient with
/// respect to the estimate. The gradient is zero where the cap is active.
pub(crate) fn si_sdr_value_grad<S: Real>(
    est: &[S],
    reference: &[S],
    eps: f64,
    cap_db: f64,
    want_grad: bool,
) -> Result<(f64, Vec<f64>)> {
    use num_traits::Float;
    if est.len() != reference.len() {
        return Err(contract("si_sdr", "estimate and reference differ in length"));
    }
    let r2: f64 = reference.iter().map(|v| v.f64() * v.f64()).sum();
    if r2 <= 0.0 {
        return Err(Error::Degenerate("si_sdr reference is all zeros"));
    }
    let er: f64 = est.iter().zip(reference).map(|(e, r)| e.f64() * r.f64()).sum();
    let a = er / (r2 + eps);
    let p2 = a * a * r2;
    let mut n2 = 0.0;
    let mut nr = 0.0;
    for (e, r) in est.iter().zip(reference) {
        let d = a * r.f64() - e.f64();
        n2 += d * d;
        nr += d * r.f64();
    }
    let raw = 10.0 * Float::log10(p2 / (n2 + eps));
    let raw = if Float::is_nan(raw) { -cap_db } else { raw };
    let v = raw.clamp(-cap_db, cap_db);
    let mut grad = Vec::new();
    if want_grad {
        grad = vec![0.0; est.len()];
        if raw > -cap_db && raw < cap_db {
            let k = 10.0 / core::f64::consts::LN_10;
            for (g, (e, r)) in grad.iter_mut().zip(est.iter().zip(reference)) {
                let (e, r) = (e.f64(), r.f64());
                let d = a * r - e;
                let dp = 2.0 * r / (a * (r2 + eps));
                let dn = (2.0 * nr * r / (r2 + eps) - 2.0 * d) / (n2 + eps);
                *g = k * (dp - dn);
            }
        }
    }
    Ok((v, grad))
}

// ---------------------------------------------------------------- eager

/// Eager evaluation against a parameter store; no tape is kept.
pub struct Eval<'a, S: Real> {
    store: &'a ParameterStore<S>,
}

impl<'a, S: Real> Eval<'a, S> {
    pub fn new(store: &'a ParameterStore<S>) -> Self {
        Self { store }
    }

    fn run(&self, kind: OpKind, ins: &[&Tensor<S>]) -> Result<Tensor<S>> {
        forward(&kind, ins, &Consts::default(), &mut Vec::new())
    }
}

impl<S: Real> Ops<S> for Eval<'_, S> {
    type V = Tensor<S>;

    fn param(&mut self, name: &str, shape: &[usize], _init: Init) -> Result<Tensor<S>> {
        let p = self.store.get(name)?;
        if p.shape() != shape {
            return Err(contract(
                "param",
                alloc::format!("`{name}` has shape {:?}, model expects {shape:?}", p.shape()),
            ));
        }
        Tensor::new(p.shape(), p.data().to_vec())
    }

    fn shape(&self, v: &Tensor<S>) -> Vec<usize> {
        v.shape().to_vec()
    }

    fn pointwise(&mut self, x: &Tensor<S>, w: &Tensor<S>, b: Option<&Tensor<S>>) -> Result<Tensor<S>> {
        match b {
            Some(b) => self.run(OpKind::Pointwise { bias: true }, &[x, w, b]),
            None => self.run(OpKind::Pointwise { bias: false }, &[x, w]),
        }
    }
    fn depthwise2d(&mut self, x: &Tensor<S>, w: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::Depthwise2d, &[x, w])
    }
    fn conv1d_axis(&mut self, x: &Tensor<S>, w: &Tensor<S>, axis: Axis) -> Result<Tensor<S>> {
        self.run(OpKind::Conv1d(axis), &[x, w])
    }
    fn avg_pool2(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::AvgPool2, &[x])
    }
    fn max_pool2(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::MaxPool2, &[x])
    }
    fn upsample2(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::Upsample2, &[x])
    }
    fn tconv2(&mut self, x: &Tensor<S>, w: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::TConv2, &[x, w])
    }
    fn sigmoid(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::Sigmoid, &[x])
    }
    fn prelu(&mut self, x: &Tensor<S>, alpha: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::Prelu, &[x, alpha])
    }
    fn mul(&mut self, a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::Mul, &[a, b])
    }
    fn add(&mut self, a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
        self.run(OpKind::Add, &[a, b])
    }
    fn concat(&mut self, parts: &[&Tensor<S>]) -> Result<Tensor<S>> {
        self.run(OpKind::Concat, parts)
    }
}

// ---------------------------------------------------------------- tape

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

struct Node<S> {
    kind: Option<OpKind>,
    inputs: Vec<usize>,
    value: Tensor<S>,
    consts: Consts<S>,
    aux: Vec<u32>,
}

/// Computation tape. Leaves are inputs or parameters borrowed from a store.
pub struct Graph<'a, S: Real> {
    store: Option<&'a ParameterStore<S>>,
    nodes: Vec<Node<S>>,
    params: Vec<(String, usize)>,
}

/// Result of [`Graph::backward`].
pub struct Gradients<S> {
    nodes: Vec<Option<Vec<S>>>,
    shapes: Vec<Vec<usize>>,
    params: Vec<(String, usize)>,
}

impl<S: Real> Gradients<S> {
    /// Gradient of the loss with respect to any recorded node (zeros when the
    /// node does not reach the loss).
    pub fn wrt(&self, id: NodeId) -> Vec<S> {
        self.nodes[id.0]
            .clone()
            .unwrap_or_else(|| vec![S::zero(); self.shapes[id.0].iter().product()])
    }

    /// Parameter gradients in recording order.
    pub fn params(&self) -> impl Iterator<Item = (&str, Vec<S>)> + '_ {
        self.params
            .iter()
            .map(|(n, id)| (n.as_str(), self.wrt(NodeId(*id))))
    }
}

impl<'a, S: Real> Default for Graph<'a, S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, S: Real> Graph<'a, S> {
    pub fn new() -> Self {
        Self {
            store: None,
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn with_store(store: &'a ParameterStore<S>) -> Self {
        Self {
            store: Some(store),
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, t: Tensor<S>) -> NodeId {
        self.nodes.push(Node {
            kind: None,
            inputs: Vec::new(),
            value: t,
            consts: Consts::default(),
            aux: Vec::new(),
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    fn record(&mut self, kind: OpKind, inputs: &[NodeId], consts: Consts<S>) -> Result<NodeId> {
        let mut aux = Vec::new();
        let value = {
            let ins: Vec<&Tensor<S>> = inputs.iter().map(|i| &self.nodes[i.0].value).collect();
            forward(&kind, &ins, &consts, &mut aux)?
        };
        self.nodes.push(Node {
            kind: Some(kind),
            inputs: inputs.iter().map(|i| i.0).collect(),
            value,
            consts,
            aux,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn op(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        self.record(kind, inputs, Consts::default())
    }

    /// Mean squared error between two equally shaped nodes.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.op(OpKind::Mse, &[a, b])
    }

    /// `F×T×2` stacked complex → `F×T×1` magnitudes.
    pub fn magnitude(&mut self, x: NodeId) -> Result<NodeId> {
        self.op(OpKind::Magnitude, &[x])
    }

    /// Bin-wise complex product of a stacked `F×T×2` node with a constant
    /// single-channel spectrogram given as `F×T` real/imag planes.
    pub fn complex_mul_const(&mut self, x: NodeId, re: Vec<S>, im: Vec<S>) -> Result<NodeId> {
        let n = self.nodes[x.0].value.len() / 2;
        if re.len() != n || im.len() != n {
            return Err(contract("complex_mul", "constant spectrogram size mismatch"));
        }
        self.record(OpKind::ComplexMul, &[x], Consts { a: re, b: im })
    }

    /// Inverse STFT of a stacked `256×T×2` spectrum into `len` samples.
    pub fn istft(&mut self, x: NodeId, len: usize) -> Result<NodeId> {
        self.op(OpKind::Istft { len }, &[x])
    }

    /// Capped SI-SDR (dB) of a waveform node against a constant reference.
    pub fn si_sdr(&mut self, est: NodeId, reference: Vec<S>, eps: f64, cap_db: f64) -> Result<NodeId> {
        self.record(OpKind::SiSdr { eps, cap_db }, &[est], Consts { a: reference, b: Vec::new() })
    }

    /// `Σ cᵢ·xᵢ` over scalar nodes.
    pub fn lin_comb(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId> {
        let ids: Vec<NodeId> = terms.iter().map(|t| t.0).collect();
        self.op(OpKind::LinComb(terms.iter().map(|t| t.1).collect()), &ids)
    }

    /// Propagates `∂loss/∂node` to every recorded node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<S>> {
        if self.nodes[loss.0].value.len() != 1 || !self.nodes[loss.0].value.shape().is_empty() {
            return Err(contract("backward", "loss must be a scalar"));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![S::one()]);
        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if let Some(kind) = &node.kind {
                let ins: Vec<&Tensor<S>> = node.inputs.iter().map(|&i| &self.nodes[i].value).collect();
                let dins = backward_op(kind, &ins, &node.value, &g, &node.consts, &node.aux)?;
                for (&i, d) in node.inputs.iter().zip(dins) {
                    let Some(d) = d else { continue };
                    match grads[i].as_mut() {
                        Some(acc) => acc.iter_mut().zip(&d).for_each(|(a, &b)| *a += b),
                        None => grads[i] = Some(d),
                    }
                }
            }
            grads[id] = Some(g);
        }
        for g in grads.iter().flatten() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("backward"));
            }
        }
        Ok(Gradients {
            nodes: grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
            params: self.params.clone(),
        })
    }
}

fn backward_op<S: Real>(
    kind: &OpKind,
    ins: &[&Tensor<S>],
    out: &Tensor<S>,
    g: &[S],
    consts: &Consts<S>,
    aux: &[u32],
) -> Result<Vec<Option<Vec<S>>>> {
    let x = ins[0].data();
    Ok(match kind {
        OpKind::Pointwise { bias } => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            let co = out.shape()[2];
            let (dx, dw, db) = k::pointwise_bwd(g, x, f * t, c, ins[1].data(), co);
            let mut v = vec![Some(dx), Some(dw)];
            if *bias {
                v.push(Some(db));
            }
            v
        }
        OpKind::Depthwise2d => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            let (dx, dw) = k::depthwise2d_bwd(g, x, f, t, c, ins[1].data(), ins[1].shape()[0]);
            vec![Some(dx), Some(dw)]
        }
        OpKind::Conv1d(axis) => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            let (dx, dw) = k::conv1d_axis_bwd(g, x, f, t, c, ins[1].data(), ins[1].shape()[0], *axis);
            vec![Some(dx), Some(dw)]
        }
        OpKind::AvgPool2 => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            vec![Some(k::avg_pool2_bwd(g, f, t, c))]
        }
        OpKind::MaxPool2 => vec![Some(k::max_pool2_bwd(g, aux, x.len()))],
        OpKind::Upsample2 => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            vec![Some(k::upsample2_bwd(g, f, t, c))]
        }
        OpKind::TConv2 => {
            let (f, t, c) = dims3("", ins[0].shape())?;
            let (dx, dw) = k::tconv2_bwd(g, x, f, t, c, ins[1].data(), out.shape()[2]);
            vec![Some(dx), Some(dw)]
        }
        OpKind::Sigmoid => {
            let d = out.data().iter().zip(g).map(|(&y, &g)| g * y * (S::one() - y)).collect();
            vec![Some(d)]
        }
        OpKind::Prelu => {
            let c = ins[1].len();
            let (dx, da) = k::prelu_bwd(g, x, c, ins[1].data());
            vec![Some(dx), Some(da)]
        }
        OpKind::Mul => {
            let b = ins[1].data();
            let da = g.iter().zip(b).map(|(&g, &b)| g * b).collect();
            let db = g.iter().zip(x).map(|(&g, &a)| g * a).collect();
            vec![Some(da), Some(db)]
        }
        OpKind::Add => vec![Some(g.to_vec()), Some(g.to_vec())],
        OpKind::Concat => {
            let widths: Vec<usize> = ins.iter().map(|t| t.shape()[2]).collect();
            let s = out.shape();
            k::concat_bwd(g, &widths, s[0] * s[1]).into_iter().map(Some).collect()
        }
        OpKind::Mse => {
            let b = ins[1].data();
            let k2 = S::of(2.0) * g[0] / S::of(x.len().max(1) as f64);
            let da: Vec<S> = x.iter().zip(b).map(|(&a, &b)| k2 * (a - b)).collect();
            let db = da.iter().map(|&v| -v).collect();
            vec![Some(da), Some(db)]
        }
        OpKind::Magnitude => {
            let mut d = vec![S::zero(); x.len()];
            for ((p, &m), (dp, &g)) in x
                .chunks_exact(2)
                .zip(out.data())
                .zip(d.chunks_exact_mut(2).zip(g))
            {
                if m > S::zero() {
                    dp[0] = g * p[0] / m;
                    dp[1] = g * p[1] / m;
                }
            }
            vec![Some(d)]
        }
        OpKind::ComplexMul => {
            let mut d = vec![S::zero(); x.len()];
            for ((dp, gp), (&xr, &xi)) in d
                .chunks_exact_mut(2)
                .zip(g.chunks_exact(2))
                .zip(consts.a.iter().zip(&consts.b))
            {
                dp[0] = gp[0] * xr + gp[1] * xi;
                dp[1] = -gp[0] * xi + gp[1] * xr;
            }
            vec![Some(d)]
        }
        OpKind::Istft { .. } => {
            let frames = ins[0].shape()[1];
            let (dre, dim) = Stft::<S>::new().synthesize_adjoint(g, frames);
            let mut d = Vec::with_capacity(x.len());
            for (r, i) in dre.into_iter().zip(dim) {
                d.push(r);
                d.push(i);
            }
            vec![Some(d)]
        }
        OpKind::SiSdr { eps, cap_db } => {
            let (_, gr) = si_sdr_value_grad(x, &consts.a, *eps, *cap_db, true)?;
            vec![Some(gr.into_iter().map(|v| S::of(v) * g[0]).collect())]
        }
        OpKind::LinComb(c) => c.iter().map(|&w| Some(vec![S::of(w) * g[0]])).collect(),
    })
}

impl<'a, S: Real> Ops<S> for Graph<'a, S> {
    type V = NodeId;

    fn param(&mut self, name: &str, shape: &[usize], _init: Init) -> Result<NodeId> {
        if let Some((_, id)) = self.params.iter().find(|(n, _)| n == name) {
            return Ok(NodeId(*id));
        }
        let store = self.store.ok_or_else(|| Error::MissingParam(name.to_string()))?;
        let p = store.get(name)?;
        if p.shape() != shape {
            return Err(contract(
                "param",
                alloc::format!("`{name}` has shape {:?}, model expects {shape:?}", p.shape()),
            ));
        }
        let id = self.input(Tensor::new(p.shape(), p.data().to_vec())?);
        self.params.push((name.to_string(), id.0));
        Ok(id)
    }

    fn shape(&self, v: &NodeId) -> Vec<usize> {
        self.nodes[v.0].value.shape().to_vec()
    }

    fn pointwise(&mut self, x: &NodeId, w: &NodeId, b: Option<&NodeId>) -> Result<NodeId> {
        match b {
            Some(b) => self.op(OpKind::Pointwise { bias: true }, &[*x, *w, *b]),
            None => self.op(OpKind::Pointwise { bias: false }, &[*x, *w]),
        }
    }
    fn depthwise2d(&mut self, x: &NodeId, w: &NodeId) -> Result<NodeId> {
        self.op(OpKind::Depthwise2d, &[*x, *w])
    }
    fn conv1d_axis(&mut self, x: &NodeId, w: &NodeId, axis: Axis) -> Result<NodeId> {
        self.op(OpKind::Conv1d(axis), &[*x, *w])
    }
    fn avg_pool2(&mut self, x: &NodeId) -> Result<NodeId> {
        self.op(OpKind::AvgPool2, &[*x])
    }
    fn max_pool2(&mut self, x: &NodeId) -> Result<NodeId> {
        self.op(OpKind::MaxPool2, &[*x])
    }
    fn upsample2(&mut self, x: &NodeId) -> Result<NodeId> {
        self.op(OpKind::Upsample2, &[*x])
    }
    fn tconv2(&mut self, x: &NodeId, w: &NodeId) -> Result<NodeId> {
        self.op(OpKind::TConv2, &[*x, *w])
    }
    fn sigmoid(&mut self, x: &NodeId) -> Result<NodeId> {
        self.op(OpKind::Sigmoid, &[*x])
    }
    fn prelu(&mut self, x: &NodeId, alpha: &NodeId) -> Result<NodeId> {
        self.op(OpKind::Prelu, &[*x, *alpha])
    }
    fn mul(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.op(OpKind::Mul, &[*a, *b])
    }
    fn add(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.op(OpKind::Add, &[*a, *b])
    }
    fn concat(&mut self, parts: &[&NodeId]) -> Result<NodeId> {
        let ids: Vec<NodeId> = parts.iter().map(|p| **p).collect();
        self.op(OpKind::Concat, &ids)
    }
}
