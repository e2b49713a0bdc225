//! Central finite-difference check of recorded gradients.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Check at most this many coordinates per tensor (randomly chosen).
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            max_coords: None,
            seed: 0,
        }
    }
}

/// Norm-wise relative error per checked tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub tensors: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.1).fold(0.0, f64::max)
    }
}

fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| Float::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let d: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&d) / norm(a).max(norm(n)).max(1e-10)
}

fn pick(n: usize, max: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match max {
        Some(m) if m < n => (0..m).map(|_| rng.random_range(0..n)).collect(),
        _ => (0..n).collect(),
    }
}

/// Compares analytic gradients of `build` against central differences,
/// with respect to every input tensor and every parameter of `store` that
/// the recorded computation uses.
pub fn grad_check<F>(
    store: &ParameterStore<f64>,
    inputs: &[Tensor<f64>],
    opts: &GradCheckOptions,
    build: F,
) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Graph<'a, f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |store: &ParameterStore<f64>, inputs: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::with_store(store);
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let loss = build(&mut g, &ids)?;
        Ok(g.value(loss).item())
    };
    let (input_grads, param_grads) = {
        let mut g = Graph::with_store(store);
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let loss = build(&mut g, &ids)?;
        let grads = g.backward(loss)?;
        let ig: Vec<Vec<f64>> = ids.iter().map(|&i| grads.wrt(i)).collect();
        let pg: Vec<(String, Vec<f64>)> = grads.params().map(|(n, v)| (n.into(), v)).collect();
        (ig, pg)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let h = opts.h;
    let mut report = GradCheckReport::default();

    let mut xs = inputs.to_vec();
    for (k, analytic) in input_grads.iter().enumerate() {
        let coords = pick(xs[k].len(), opts.max_coords, &mut rng);
        let mut a = Vec::new();
        let mut n = Vec::new();
        for &i in &coords {
            let orig = xs[k].data()[i];
            xs[k].data_mut()[i] = orig + h;
            let up = eval(store, &xs)?;
            xs[k].data_mut()[i] = orig - h;
            let dn = eval(store, &xs)?;
            xs[k].data_mut()[i] = orig;
            a.push(analytic[i]);
            n.push((up - dn) / (2.0 * h));
        }
        report.tensors.push((alloc::format!("input{k}"), rel_err(&a, &n)));
    }

    let mut st = store.clone();
    for (name, analytic) in &param_grads {
        let len = analytic.len();
        let coords = pick(len, opts.max_coords, &mut rng);
        let mut a = Vec::new();
        let mut n = Vec::new();
        for &i in &coords {
            let orig = st.get(name)?.data()[i];
            st.get_mut(name)?.data_mut()[i] = orig + h;
            let up = eval(&st, inputs)?;
            st.get_mut(name)?.data_mut()[i] = orig - h;
            let dn = eval(&st, inputs)?;
            st.get_mut(name)?.data_mut()[i] = orig;
            a.push(analytic[i]);
            n.push((up - dn) / (2.0 * h));
        }
        report.tensors.push((name.clone(), rel_err(&a, &n)));
    }
    Ok(report)
}

/// Differentiable operations and composite blocks with a ready-made check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    PointwiseBias,
    Pointwise,
    Depthwise2d,
    Conv1dTime,
    Conv1dFrequency,
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
    Istft,
    SiSdr,
    LinComb,
    FcaBranch,
    FcaBlock,
    Sandglass,
    Bottleneck,
    CompositeLoss,
    TinyModel,
}

impl Case {
    pub const OPS: [Case; 20] = [
        Case::PointwiseBias,
        Case::Pointwise,
        Case::Depthwise2d,
        Case::Conv1dTime,
        Case::Conv1dFrequency,
        Case::AvgPool2,
        Case::MaxPool2,
        Case::Upsample2,
        Case::TConv2,
        Case::Sigmoid,
        Case::Prelu,
        Case::Mul,
        Case::Add,
        Case::Concat,
        Case::Mse,
        Case::Magnitude,
        Case::ComplexMul,
        Case::Istft,
        Case::SiSdr,
        Case::LinComb,
    ];
    pub const BLOCKS: [Case; 5] = [
        Case::FcaBranch,
        Case::FcaBlock,
        Case::Sandglass,
        Case::Bottleneck,
        Case::CompositeLoss,
    ];
}

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Runs one randomly sized instance of `case` and returns its worst
/// norm-wise relative error.
pub fn run_case(case: Case, seed: u64) -> Result<f64> {
    use crate::dsp::{ComplexSpectrogram, N_BINS};
    use crate::graph::Ops;
    use crate::kernels::Axis;
    use crate::loss::{composite_loss_graph, LossWeights};
    use crate::net::{self, FcaKind, ModelConfig};
    use alloc::vec;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let f = 2 * rng.random_range(1..=3usize);
    let t = 2 * rng.random_range(1..=3usize);
    let c = rng.random_range(1..=3usize);
    let c2 = rng.random_range(1..=3usize);
    let x = rand_tensor(&[f, t, c], &mut rng);
    let opts = GradCheckOptions { seed, ..Default::default() };
    let empty = ParameterStore::new();

    // Tensor-valued ops are reduced with an MSE against a fixed target.
    macro_rules! unary {
        ($inputs:expr, $out:expr, |$g:ident, $ids:ident| $body:expr) => {{
            let target = rand_tensor(&$out, &mut rng);
            let r = grad_check(&empty, &$inputs, &opts, |$g, $ids| {
                let y = $body?;
                let tg = $g.input(target.clone());
                $g.mse(y, tg)
            })?;
            return Ok(r.max_rel_err());
        }};
    }

    match case {
        Case::PointwiseBias => {
            let w = rand_tensor(&[c, c2], &mut rng);
            let b = rand_tensor(&[c2], &mut rng);
            unary!([x, w, b], [f, t, c2], |g, i| g.pointwise(&i[0], &i[1], Some(&i[2])))
        }
        Case::Pointwise => {
            let w = rand_tensor(&[c, c2], &mut rng);
            unary!([x, w], [f, t, c2], |g, i| g.pointwise(&i[0], &i[1], None))
        }
        Case::Depthwise2d => {
            let w = rand_tensor(&[3, 3, c], &mut rng);
            unary!([x, w], [f, t, c], |g, i| g.depthwise2d(&i[0], &i[1]))
        }
        Case::Conv1dTime | Case::Conv1dFrequency => {
            let axis = if case == Case::Conv1dTime { Axis::Time } else { Axis::Frequency };
            let w = rand_tensor(&[5, c], &mut rng);
            unary!([x, w], [f, t, c], |g, i| g.conv1d_axis(&i[0], &i[1], axis))
        }
        Case::AvgPool2 => unary!([x], [f / 2, t / 2, c], |g, i| g.avg_pool2(&i[0])),
        Case::MaxPool2 => unary!([x], [f / 2, t / 2, c], |g, i| g.max_pool2(&i[0])),
        Case::Upsample2 => unary!([x], [2 * f, 2 * t, c], |g, i| g.upsample2(&i[0])),
        Case::TConv2 => {
            let w = rand_tensor(&[2, 2, c, c2], &mut rng);
            unary!([x, w], [2 * f, 2 * t, c2], |g, i| g.tconv2(&i[0], &i[1]))
        }
        Case::Sigmoid => unary!([x], [f, t, c], |g, i| g.sigmoid(&i[0])),
        Case::Prelu => {
            let a = rand_tensor(&[c], &mut rng);
            unary!([x, a], [f, t, c], |g, i| g.prelu(&i[0], &i[1]))
        }
        Case::Mul => {
            let y = rand_tensor(&[f, t, c], &mut rng);
            unary!([x, y], [f, t, c], |g, i| g.mul(&i[0], &i[1]))
        }
        Case::Add => {
            let y = rand_tensor(&[f, t, c], &mut rng);
            unary!([x, y], [f, t, c], |g, i| g.add(&i[0], &i[1]))
        }
        Case::Concat => {
            let y = rand_tensor(&[f, t, c2], &mut rng);
            unary!([x, y], [f, t, c + c2], |g, i| g.concat(&[&i[0], &i[1]]))
        }
        Case::Mse => {
            let y = rand_tensor(&[f, t, c], &mut rng);
            let r = grad_check(&empty, &[x, y], &opts, |g, i| g.mse(i[0], i[1]))?;
            Ok(r.max_rel_err())
        }
        Case::Magnitude => {
            let z = rand_tensor(&[f, t, 2], &mut rng);
            unary!([z], [f, t, 1], |g, i| g.magnitude(i[0]))
        }
        Case::ComplexMul => {
            let z = rand_tensor(&[f, t, 2], &mut rng);
            let xr: Vec<f64> = (0..f * t).map(|_| rng.random_range(-1.0..1.0)).collect();
            let xi: Vec<f64> = (0..f * t).map(|_| rng.random_range(-1.0..1.0)).collect();
            unary!([z], [f, t, 2], |g, i| g.complex_mul_const(i[0], xr.clone(), xi.clone()))
        }
        Case::Istft => {
            let frames = rng.random_range(2..=4usize);
            let z = rand_tensor(&[N_BINS, frames, 2], &mut rng);
            let len = 255 * (frames - 1);
            let opts = GradCheckOptions {
                max_coords: Some(40),
                ..opts
            };
            let target = rand_tensor(&[len], &mut rng);
            let r = grad_check(&empty, &[z], &opts, |g, i| {
                let w = g.istft(i[0], len)?;
                let tg = g.input(target.clone());
                g.mse(w, tg)
            })?;
            Ok(r.max_rel_err())
        }
        Case::SiSdr => {
            let n = 32 + rng.random_range(0..32usize);
            let reference: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let est = Tensor::from_fn(&[n], |k| reference[k] + rng.random_range(-0.8..0.8));
            let r = grad_check(&empty, &[est], &opts, |g, i| g.si_sdr(i[0], reference.clone(), 1e-8, 30.0))?;
            Ok(r.max_rel_err())
        }
        Case::LinComb => {
            let xs: Vec<Tensor<f64>> = (0..3).map(|_| Tensor::scalar(rng.random_range(-1.0..1.0))).collect();
            let cs: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let r = grad_check(&empty, &xs, &opts, |g, i| {
                let s = g.lin_comb(&[(i[0], cs[0]), (i[1], cs[1]), (i[2], cs[2])])?;
                g.mse(s, i[0])
            })?;
            Ok(r.max_rel_err())
        }
        Case::FcaBranch => {
            let kind = [FcaKind::Time, FcaKind::Frequency, FcaKind::FrequencyTime][rng.random_range(0..3usize)];
            let d1 = rand_tensor(&[5, c], &mut rng);
            let d2 = rand_tensor(&[5, c], &mut rng);
            unary!([x, d1, d2], [f, t, c], |g, i| net::fca_branch(g, &i[0], kind, &i[1], &i[2]))
        }
        Case::FcaBlock | Case::Sandglass | Case::Bottleneck | Case::TinyModel => {
            let cfg = ModelConfig::tiny([4, 8, 12, 16], 1);
            let (shape, out): (Vec<usize>, Vec<usize>) = match case {
                Case::FcaBlock => (vec![f, t, c], vec![f, t, 4]),
                Case::TinyModel => (vec![16, 16, 2], vec![16, 16, 2]),
                _ => (vec![f, t, 4], vec![f, t, 4]),
            };
            let mut p = net::profile::Profiler::<f64>::new();
            let xs = shape.clone();
            let kind = FcaKind::FrequencyTime;
            match case {
                Case::FcaBlock => net::fca_block(&mut p, &cfg, "b", &xs, c, 4, kind).map(|_| ())?,
                Case::Sandglass => net::sandglass_unit(&mut p, &cfg, "s", &xs, 4).map(|_| ())?,
                Case::Bottleneck => net::bottleneck_block(&mut p, &cfg, "s", &xs, 4).map(|_| ())?,
                _ => net::model_forward(&mut p, &cfg, &xs).map(|_| ())?,
            }
            let mut store = ParameterStore::initialise(&p.profile.params, seed)?;
            // Move PReLU slopes away from the defaults so their gradients are generic.
            for (name, t) in store.iter_mut() {
                if name.ends_with(".alpha") {
                    t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(0.05..0.5));
                }
            }
            let input = rand_tensor(&shape, &mut rng);
            let target = rand_tensor(&out, &mut rng);
            let opts = GradCheckOptions {
                max_coords: if case == Case::TinyModel { Some(6) } else { None },
                ..opts
            };
            let r = grad_check(&store, &[input], &opts, |g, i| {
                let y = match case {
                    Case::FcaBlock => net::fca_block(g, &cfg, "b", &i[0], c, 4, kind)?,
                    Case::Sandglass => net::sandglass_unit(g, &cfg, "s", &i[0], 4)?,
                    Case::Bottleneck => net::bottleneck_block(g, &cfg, "s", &i[0], 4)?,
                    _ => net::model_forward(g, &cfg, &i[0])?,
                };
                let tg = g.input(target.clone());
                g.mse(y, tg)
            })?;
            Ok(r.max_rel_err())
        }
        Case::CompositeLoss => {
            let frames = 3;
            let len = 255 * (frames - 1);
            let est = rand_tensor(&[N_BINS, frames, 2], &mut rng);
            let tgt = rand_tensor(&[N_BINS, frames, 2], &mut rng);
            let re = rand_tensor(&[N_BINS, frames, 1], &mut rng);
            let im = rand_tensor(&[N_BINS, frames, 1], &mut rng);
            let mix = ComplexSpectrogram::new(re, im)?;
            let direct: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            // A loud SI-SDR weight so that path is actually exercised.
            let w = LossWeights {
                beta: 0.05,
                ..LossWeights::default()
            };
            let opts = GradCheckOptions {
                max_coords: Some(60),
                ..opts
            };
            let r = grad_check(&empty, &[est], &opts, |g, i| {
                Ok(composite_loss_graph(g, i[0], &tgt, &mix, &direct, &w)?.total)
            })?;
            Ok(r.max_rel_err())
        }
    }
}
