use lmfca_core::dsp::{reference_channel, Waveform, SAMPLE_RATE};
use lmfca_core::room::{
    absorption_from_t60, delay_samples, direct_path_rir, distance, image_method_rir, images, noise_gain, noise_like,
    power, render_mixture, schroeder_curve, schroeder_t60, snr_db, speech_like, Room, RoomScene, ARRAY_RADIUS,
    DISTANCE_RANGE, HEIGHT_RANGE, LENGTH_RANGE, N_MICS, T60_RANGE, WALL_MARGIN, WIDTH_RANGE,
};
use lmfca_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scene_at(dims: [f64; 3], t60: f64, source: [f64; 3], center: [f64; 3]) -> RoomScene {
    RoomScene {
        room: Room { dims, t60 },
        source,
        array_center: center,
        mics: lmfca_core::room::array_positions(center),
    }
}

#[test]
fn sabine_absorption() {
    let room = Room { dims: [5.0, 6.0, 3.0], t60: 0.5 };
    let a = absorption_from_t60(&room).unwrap();
    assert!((a - 0.23).abs() < 1e-12);
    let b = absorption_from_t60(&Room { t60: 1.0, ..room }).unwrap();
    assert!((b - a / 2.0).abs() < 1e-12);
    assert!(absorption_from_t60(&Room { t60: 0.01, ..room }).is_err());
    assert!(absorption_from_t60(&Room { t60: 0.0, ..room }).is_err());
}

#[test]
fn direct_path_delay_and_amplitude() {
    // The first array microphone sits at +x of the centre.
    let center = [3.0, 3.0, 1.5];
    let mic = [center[0] + ARRAY_RADIUS, center[1], center[2]];
    let source = [mic[0] + 1.7, mic[1], mic[2]];
    let s = scene_at([8.0, 6.0, 3.0], 0.5, source, center);
    assert_eq!(delay_samples(1.7), 80);
    let h = direct_path_rir(&s, 0);
    assert_eq!(h.taps.len(), 81);
    assert!(h.taps[..80].iter().all(|&v| v == 0.0));
    assert!((h.taps[80] - 1.0 / (4.0 * std::f64::consts::PI * 1.7)).abs() < 1e-15);

    let full = image_method_rir(&s, 0).unwrap();
    assert!(full.taps[..80].iter().all(|&v| v == 0.0));
    assert!((full.taps[80] - h.taps[80]).abs() < 1e-15);
}

#[test]
fn direct_amplitude_follows_inverse_distance() {
    let center = [4.0, 4.0, 1.5];
    let mic = [center[0] + ARRAY_RADIUS, center[1], center[2]];
    let near = scene_at([9.0, 8.0, 3.0], 0.5, [mic[0] + 0.85, mic[1], mic[2]], center);
    let far = scene_at([9.0, 8.0, 3.0], 0.5, [mic[0] + 1.7, mic[1], mic[2]], center);
    let a = direct_path_rir(&near, 0);
    let b = direct_path_rir(&far, 0);
    let peak = |t: &[f64]| t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((peak(&a.taps) / peak(&b.taps) - 2.0).abs() < 1e-12);
}

#[test]
fn first_order_images_are_the_six_wall_mirrors() {
    let dims = [5.0, 4.0, 3.0];
    let src = [1.0, 1.5, 0.7];
    let mic = [2.5, 2.0, 1.5];
    let all = images(dims, src, mic, 30.0);
    let mut first: Vec<[f64; 3]> = all.iter().filter(|i| i.reflections == 1).map(|i| i.position).collect();
    let mut expect = Vec::new();
    for axis in 0..3 {
        let mut lo = src;
        lo[axis] = -src[axis];
        let mut hi = src;
        hi[axis] = 2.0 * dims[axis] - src[axis];
        expect.push(lo);
        expect.push(hi);
    }
    let key = |p: &[f64; 3]| (p[0] * 1e6) as i64 * 1_000_000_000_000 + (p[1] * 1e6) as i64 * 1_000_000 + (p[2] * 1e6) as i64;
    first.sort_by_key(key);
    expect.sort_by_key(key);
    assert_eq!(first.len(), 6);
    for (a, b) in first.iter().zip(&expect) {
        assert!(distance(*a, *b) < 1e-12);
    }
    let zero: Vec<_> = all.iter().filter(|i| i.reflections == 0).collect();
    assert_eq!(zero.len(), 1);
    assert_eq!(zero[0].position, src);
    assert!(all.iter().all(|i| distance(i.position, mic) <= 30.0));
}

#[test]
fn sampled_t60_has_the_uniform_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let r = Room::sample(&mut rng);
        assert!((T60_RANGE.0..=T60_RANGE.1).contains(&r.t60));
        assert!((LENGTH_RANGE.0..=LENGTH_RANGE.1).contains(&r.dims[0]));
        assert!((WIDTH_RANGE.0..=WIDTH_RANGE.1).contains(&r.dims[1]));
        assert!((HEIGHT_RANGE.0..=HEIGHT_RANGE.1).contains(&r.dims[2]));
        sum += r.t60;
    }
    assert!((sum / n as f64 - 0.55).abs() < 0.01);
}

#[test]
fn scenes_are_deterministic_per_seed() {
    assert_eq!(RoomScene::sample(42).unwrap(), RoomScene::sample(42).unwrap());
    assert_ne!(RoomScene::sample(42).unwrap(), RoomScene::sample(43).unwrap());
}

#[test]
fn noise_gain_and_measured_snr() {
    let s: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let v: Vec<f64> = (0..1000).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
    assert!((noise_gain(&s, &v, 0.0) - 1.0).abs() < 1e-12);
    assert!((noise_gain(&s, &v, 20.0) - 0.1).abs() < 1e-12);
    assert_eq!(noise_gain(&s, &vec![0.0; 1000], 5.0), 0.0);
    let half: Vec<f64> = v.iter().map(|x| 0.5 * x).collect();
    assert!((snr_db(&s, &half) - 10.0 * 4f64.log10()).abs() < 1e-12);
}

#[test]
fn rendered_mixture_hits_the_requested_snr() {
    let scene = RoomScene::sample(3).unwrap();
    let clean = speech_like(1.5, 4);
    for snr in [0.0, 7.5, 12.0] {
        let ex = render_mixture(&scene, &clean, &Waveform::mono(noise_like(2.0, 5)), snr, 6).unwrap();
        assert_eq!(ex.mixture.num_channels(), N_MICS);
        assert_eq!(ex.mixture.len(), clean.len());
        let r = reference_channel(N_MICS);
        assert_eq!(r, 4);
        let residual: Vec<f64> = ex.mixture.channel(r).iter().zip(&ex.clean_ref).map(|(m, s)| m - s).collect();
        assert!((snr_db(&ex.clean_ref, &residual) - snr).abs() < 1e-9);
    }
}

#[test]
fn zero_noise_leaves_the_image() {
    let scene = RoomScene::sample(7).unwrap();
    let clean = speech_like(1.0, 8);
    let ex = render_mixture(&scene, &clean, &Waveform::mono(vec![0.0; 4000]), 5.0, 9).unwrap();
    assert_eq!(ex.mixture.channel(4), &ex.clean_ref[..]);
    assert!(power(&ex.direct_ref) > 0.0);
}

#[test]
fn invalid_mixture_inputs() {
    let scene = RoomScene::sample(10).unwrap();
    let noise = Waveform::mono(noise_like(1.0, 11));
    let silent = vec![0.0; SAMPLE_RATE as usize];
    assert!(matches!(render_mixture(&scene, &silent, &noise, 0.0, 1), Err(Error::Degenerate(_))));
    let short = speech_like(0.5, 12);
    assert!(render_mixture(&scene, &short, &noise, 0.0, 1).is_err());
    let three = Waveform::new(vec![noise_like(1.0, 1); 3], SAMPLE_RATE);
    assert!(render_mixture(&scene, &speech_like(1.0, 13), &three, 0.0, 1).is_err());
}

#[test]
fn schroeder_on_an_exponential_decay() {
    // Amplitude falling 60 dB over `t` seconds.
    let fs = SAMPLE_RATE as f64;
    for t in [0.3, 0.55, 0.8] {
        let taps: Vec<f64> = (0..(2.0 * t * fs) as usize)
            .map(|n| 10f64.powf(-3.0 * n as f64 / (t * fs)))
            .collect();
        let curve = schroeder_curve(&taps);
        assert_eq!(curve[0], 0.0);
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        let est = schroeder_t60(&taps, SAMPLE_RATE).unwrap();
        assert!((est / t - 1.0).abs() < 0.01, "{est} vs {t}");
    }
}

#[test]
fn simulated_rir_decay_curve_is_monotone() {
    let scene = RoomScene::sample(14).unwrap();
    let h = image_method_rir(&scene, 0).unwrap();
    let curve = schroeder_curve(&h.taps);
    assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    assert!(h.max_order >= 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sampled_geometry_is_valid(seed in any::<u64>()) {
        let s = RoomScene::sample(seed).unwrap();
        s.validate().unwrap();
        let d = s.source_distance();
        prop_assert!(d >= DISTANCE_RANGE.0 - 1e-12 && d <= DISTANCE_RANGE.1 + 1e-12);
        for p in s.mics.iter().chain([&s.source]) {
            prop_assert!(s.room.contains(*p, WALL_MARGIN));
        }
        for p in &s.mics {
            prop_assert!((distance(*p, s.array_center) - ARRAY_RADIUS).abs() < 1e-12);
        }
    }
}
