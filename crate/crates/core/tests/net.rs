use lmfca_core::graph::Ops;
use lmfca_core::kernels::Axis;
use lmfca_core::net::fca::{axes, delta_kernel};
use lmfca_core::net::model::{act, dconv, pconv};
use lmfca_core::net::{
    bottleneck_block, count_macs_flops, declare_params, fca_attention_decoupled, fca_attention_dense, fca_block,
    fca_branch, init_params, model_forward, sandglass_unit, DenseFcaWeights, FcaKind, ModelConfig, Profiler,
    Variant,
};
use lmfca_core::{Eval, Graph, ParameterStore, Tensor};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn kernel_pair(k: usize, c: usize, seed: u64) -> (Tensor<f64>, Tensor<f64>) {
    (rand_tensor(&[k, c], seed), rand_tensor(&[k, c], seed + 1))
}

fn decoupled(z: &Tensor<f64>, kind: FcaKind, d1: &Tensor<f64>, d2: &Tensor<f64>) -> Tensor<f64> {
    let store = ParameterStore::new();
    fca_attention_decoupled(&mut Eval::new(&store), z, kind, d1, d2).unwrap()
}

/// Dense weights that reproduce a same-padded 1D kernel along one axis.
fn band(len: usize, lines: usize, d: &Tensor<f64>) -> Tensor<f64> {
    let (k, c) = (d.shape()[0], d.shape()[1]);
    let r = k as isize / 2;
    Tensor::from_fn(&[lines, len, len, c], |i| {
        let (o, p, cc) = (i / (len * c) % len, i / c % len, i % c);
        let q = p as isize - o as isize + r;
        if (0..k as isize).contains(&q) {
            d.data()[q as usize * c + cc]
        } else {
            0.0
        }
    })
}

/// Composes two same-length band matrices along the same axis.
fn band_product(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let [lines, len, _, c] = a.shape().try_into().unwrap();
    Tensor::from_fn(&[lines, len, len, c], |i| {
        let (l, o, p, cc) = (i / (len * len * c), i / (len * c) % len, i / c % len, i % c);
        (0..len)
            .map(|m| b.data()[((l * len + o) * len + m) * c + cc] * a.data()[((l * len + m) * len + p) * c + cc])
            .sum()
    })
}

fn banded_dense(f: usize, t: usize, kind: FcaKind, d1: &Tensor<f64>, d2: &Tensor<f64>) -> DenseFcaWeights<f64> {
    match kind {
        FcaKind::Time => DenseFcaWeights {
            time: Some(band_product(&band(t, f, d1), &band(t, f, d2))),
            freq: None,
        },
        FcaKind::Frequency => DenseFcaWeights {
            time: None,
            freq: Some(band_product(&band(f, t, d1), &band(f, t, d2))),
        },
        FcaKind::FrequencyTime => DenseFcaWeights {
            time: Some(band(t, f, d1)),
            freq: Some(band(f, t, d2)),
        },
    }
}

#[test]
fn dense_time_matches_loop_oracle() {
    let (f, t, c) = (3, 4, 2);
    let z = rand_tensor(&[f, t, c], 1);
    let w = rand_tensor(&[f, t, t, c], 2);
    let y = fca_attention_dense(&z, FcaKind::Time, &DenseFcaWeights { time: Some(w.clone()), freq: None }).unwrap();
    for ff in 0..f {
        for to in 0..t {
            for cc in 0..c {
                let mut acc = 0.0;
                for ti in 0..t {
                    acc += w.data()[((ff * t + to) * t + ti) * c + cc] * z.data()[(ff * t + ti) * c + cc];
                }
                assert!((y.at3(ff, to, cc) - acc).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dense_frequency_matches_loop_oracle() {
    let (f, t, c) = (3, 4, 2);
    let z = rand_tensor(&[f, t, c], 3);
    let w = rand_tensor(&[t, f, f, c], 4);
    let y = fca_attention_dense(&z, FcaKind::Frequency, &DenseFcaWeights { time: None, freq: Some(w.clone()) })
        .unwrap();
    for tt in 0..t {
        for fo in 0..f {
            for cc in 0..c {
                let acc: f64 = (0..f)
                    .map(|fi| w.data()[((tt * f + fo) * f + fi) * c + cc] * z.data()[(fi * t + tt) * c + cc])
                    .sum();
                assert!((y.at3(fo, tt, cc) - acc).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn one_hot_dense_weights_are_identity() {
    let (f, t, c) = (5, 6, 3);
    let z = rand_tensor(&[f, t, c], 5);
    let eye = |lines: usize, n: usize| {
        Tensor::from_fn(&[lines, n, n, c], |i| if i / (n * c) % n == i / c % n { 1.0 } else { 0.0 })
    };
    let w = DenseFcaWeights { time: Some(eye(f, t)), freq: Some(eye(t, f)) };
    for kind in [FcaKind::Time, FcaKind::Frequency, FcaKind::FrequencyTime] {
        assert_eq!(fca_attention_dense(&z, kind, &w).unwrap(), z);
    }
}

#[test]
fn dense_time_attention_stays_in_its_row() {
    let (f, t, c) = (6, 7, 2);
    let z = rand_tensor(&[f, t, c], 6);
    let w = DenseFcaWeights { time: Some(rand_tensor(&[f, t, t, c], 7)), freq: Some(rand_tensor(&[t, f, f, c], 8)) };
    let mut z2 = z.clone();
    z2.data_mut()[(2 * t + 3) * c] += 1.0;
    let a = fca_attention_dense(&z, FcaKind::Time, &w).unwrap();
    let b = fca_attention_dense(&z2, FcaKind::Time, &w).unwrap();
    for i in 0..a.len() {
        let row = i / (t * c);
        let chan = i % c;
        if row != 2 || chan != 0 {
            assert_eq!(a.data()[i], b.data()[i]);
        }
    }
    let a = fca_attention_dense(&z, FcaKind::Frequency, &w).unwrap();
    let b = fca_attention_dense(&z2, FcaKind::Frequency, &w).unwrap();
    for i in 0..a.len() {
        if i / c % t != 3 || i % c != 0 {
            assert_eq!(a.data()[i], b.data()[i]);
        }
    }
}

#[test]
fn delta_kernels_give_identity() {
    let z = rand_tensor(&[8, 10, 4], 9);
    let d = delta_kernel::<f64>(5, 4);
    for kind in [FcaKind::Time, FcaKind::Frequency, FcaKind::FrequencyTime] {
        assert_eq!(decoupled(&z, kind, &d, &d), z);
    }
}

#[test]
fn chained_kernels_reach_two_k_minus_one() {
    let (f, t, c, k) = (1, 31, 1, 5);
    let mut z = Tensor::<f64>::zeros(&[f, t, c]);
    z.data_mut()[15] = 1.0;
    let ones = Tensor::full(&[k, c], 1.0);
    let y = decoupled(&z, FcaKind::Time, &ones, &ones);
    let support: Vec<usize> = (0..t).filter(|&i| y.data()[i] != 0.0).collect();
    assert_eq!(support.len(), 2 * k - 1);
    assert_eq!(support, (11..=19).collect::<Vec<_>>());
}

#[test]
fn axis_order_of_the_mixed_kind() {
    assert_eq!(axes(FcaKind::FrequencyTime), [Axis::Time, Axis::Frequency]);
    assert_eq!(axes(FcaKind::Time), [Axis::Time, Axis::Time]);
    assert_eq!(axes(FcaKind::Frequency), [Axis::Frequency, Axis::Frequency]);
}

#[test]
fn branch_with_zero_kernels_is_one_half() {
    let x = rand_tensor(&[8, 6, 3], 10);
    let zero = Tensor::<f64>::zeros(&[5, 3]);
    let store = ParameterStore::new();
    let y = fca_branch(&mut Eval::new(&store), &x, FcaKind::FrequencyTime, &zero, &zero).unwrap();
    assert_eq!(y.shape(), x.shape());
    assert!(y.data().iter().all(|&v| v == 0.5));
}

fn block_store(cfg: &ModelConfig, cin: usize, cout: usize, kind: FcaKind, seed: u64) -> ParameterStore<f64> {
    let mut p = Profiler::<f64>::new();
    fca_block(&mut p, cfg, "b", &vec![8, 8, cin], cin, cout, kind).unwrap();
    ParameterStore::initialise(&p.profile.params, seed).unwrap()
}

#[test]
fn disabled_attention_leaves_only_the_trunk() {
    let cfg = ModelConfig { enable_fca: false, ..ModelConfig::tiny([8, 16, 24, 32], 2) };
    let store = block_store(&cfg, 4, 8, FcaKind::Time, 11);
    assert!(store.names().all(|n| !n.contains(".fca.")));
    let x = rand_tensor(&[8, 8, 4], 12);
    let mut e = Eval::new(&store);
    let y = fca_block(&mut e, &cfg, "b", &x, 4, 8, FcaKind::Time).unwrap();
    let h = pconv(&mut e, "b.pw1", &x, 4, 4).unwrap();
    let h = act(&mut e, "b.act1", &h, 4).unwrap();
    let g = dconv(&mut e, "b.dw", &h, 4, 3).unwrap();
    let g = act(&mut e, "b.act2", &g, 4).unwrap();
    let trunk = e.concat(&[&h, &g]).unwrap();
    assert_eq!(y, trunk);
}

#[test]
fn enabled_attention_gates_the_trunk_in_the_unit_interval() {
    let cfg = ModelConfig::tiny([8, 16, 24, 32], 2);
    let off = ModelConfig { enable_fca: false, ..cfg.clone() };
    let store = block_store(&cfg, 4, 8, FcaKind::FrequencyTime, 13);
    let x = rand_tensor(&[8, 8, 4], 14);
    let y = fca_block(&mut Eval::new(&store), &cfg, "b", &x, 4, 8, FcaKind::FrequencyTime).unwrap();
    let trunk = fca_block(&mut Eval::new(&store), &off, "b", &x, 4, 8, FcaKind::FrequencyTime).unwrap();
    for (&a, &b) in y.data().iter().zip(trunk.data()) {
        assert!(a.abs() < b.abs() || (a == 0.0 && b == 0.0));
        assert!(a * b >= 0.0);
    }
}

#[test]
fn no_fca_model_has_no_attention_gradients() {
    let cfg = ModelConfig { enable_fca: false, ..ModelConfig::tiny([8, 16, 24, 32], 1) };
    let store = init_params::<f64>(&cfg, 15).unwrap();
    let mut g = Graph::with_store(&store);
    let x = g.input(rand_tensor(&[16, 16, 2], 16));
    let y = model_forward(&mut g, &cfg, &x).unwrap();
    let zero = g.input(Tensor::zeros(&[16, 16, 2]));
    let loss = g.mse(y, zero).unwrap();
    let grads = g.backward(loss).unwrap();
    let names: Vec<String> = grads.params().map(|(n, _)| n.to_string()).collect();
    assert!(!names.is_empty());
    assert!(names.iter().all(|n| !n.contains(".fca.")));

    let full = ModelConfig::tiny([8, 16, 24, 32], 1);
    assert!(declare_params(&full).unwrap().iter().any(|p| p.0.contains(".fca.")));
}

#[test]
fn sandglass_with_zero_last_depthwise_is_identity() {
    let cfg = ModelConfig::tiny([8, 16, 24, 32], 1);
    let mut p = Profiler::<f64>::new();
    sandglass_unit(&mut p, &cfg, "u", &vec![8, 8, 6], 6).unwrap();
    let mut store = ParameterStore::initialise(&p.profile.params, 17).unwrap();
    store.get_mut("u.dw2.w").unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
    let x = rand_tensor(&[8, 8, 6], 18);
    assert_eq!(sandglass_unit(&mut Eval::new(&store), &cfg, "u", &x, 6).unwrap(), x);
}

#[test]
fn bottleneck_is_two_units_in_sequence() {
    let cfg = ModelConfig::tiny([8, 16, 24, 32], 1);
    let mut p = Profiler::<f64>::new();
    bottleneck_block(&mut p, &cfg, "m", &vec![8, 8, 6], 6).unwrap();
    let store = ParameterStore::initialise(&p.profile.params, 19).unwrap();
    let x = rand_tensor(&[8, 8, 6], 20);
    let mut e = Eval::new(&store);
    let y = bottleneck_block(&mut e, &cfg, "m", &x, 6).unwrap();
    let u = sandglass_unit(&mut e, &cfg, "m.u1", &x, 6).unwrap();
    let u = sandglass_unit(&mut e, &cfg, "m.u2", &u, 6).unwrap();
    assert_eq!(y, u);
}

#[test]
fn model_shapes() {
    let mut p = Profiler::<f32>::new();
    let out = model_forward(&mut p, &ModelConfig::default(), &vec![256, 192, 12]).unwrap();
    assert_eq!(out, vec![256, 192, 2]);

    let mono = ModelConfig::tiny([8, 16, 24, 32], 1);
    let store = init_params::<f32>(&mono, 21).unwrap();
    let x = rand_tensor(&[32, 24, 2], 22).cast::<f32>();
    let y = model_forward(&mut Eval::new(&store), &mono, &x).unwrap();
    assert_eq!(y.shape(), [32, 24, 2]);
    assert!(y.is_finite());
}

#[test]
fn model_rejects_bad_inputs() {
    let cfg = ModelConfig::tiny([8, 16, 24, 32], 1);
    let store = init_params::<f32>(&cfg, 23).unwrap();
    for shape in [[32, 20, 2], [30, 24, 2], [32, 24, 4]] {
        let x = Tensor::<f32>::zeros(&shape);
        assert!(model_forward(&mut Eval::new(&store), &cfg, &x).is_err(), "{shape:?}");
    }
}

#[test]
fn pointwise_cost_and_variant_ordering() {
    let mut p = Profiler::<f32>::new();
    pconv(&mut p, "pw", &vec![256, 192, 12], 12, 24).unwrap();
    assert_eq!(p.profile.macs, 14_155_776);
    assert_eq!(p.profile.flops, 2 * 14_155_776);

    let full = count_macs_flops(&ModelConfig::default(), 256, 192).unwrap();
    let none = count_macs_flops(&ModelConfig::variant(Variant::NoFca), 256, 192).unwrap();
    assert!(full.macs >= none.macs && full.flops >= none.flops);
    assert!(full.param_count() > none.param_count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn decoupled_equals_banded_dense(
        f in 1usize..7, t in 1usize..7, c in 1usize..4, half in 0usize..3, seed in any::<u64>(), kind_ix in 0usize..3,
    ) {
        let kind = [FcaKind::Time, FcaKind::Frequency, FcaKind::FrequencyTime][kind_ix];
        let k = 2 * half + 1;
        let z = rand_tensor(&[f, t, c], seed);
        let (d1, d2) = kernel_pair(k, c, seed ^ 0x55);
        let a = decoupled(&z, kind, &d1, &d2);
        let b = fca_attention_dense(&z, kind, &banded_dense(f, t, kind, &d1, &d2)).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn branch_values_lie_in_the_open_unit_interval(seed in any::<u64>(), kind_ix in 0usize..3) {
        let kind = [FcaKind::Time, FcaKind::Frequency, FcaKind::FrequencyTime][kind_ix];
        let x = rand_tensor(&[8, 6, 3], seed);
        let (d1, d2) = kernel_pair(5, 3, seed ^ 7);
        let store = ParameterStore::new();
        let y = fca_branch(&mut Eval::new(&store), &x, kind, &d1, &d2).unwrap();
        prop_assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
