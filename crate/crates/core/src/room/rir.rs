//! Image-source impulse responses and Schroeder decay analysis.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::scene::{absorption_from_t60, distance, Point, RoomScene, SPEED_OF_SOUND};
use crate::dsp::SAMPLE_RATE;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
    /// Highest reflection count among the images that were summed.
    pub max_order: usize,
}

/// One mirror image of the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Image {
    pub position: Point,
    pub reflections: usize,
}

/// All images whose distance to `mic` is at most `max_dist`.
pub fn images(dims: Point, source: Point, mic: Point, max_dist: f64) -> Vec<Image> {
    // Per axis: (coordinate, reflection count) for every image within reach.
    let axis = |i: usize| {
        let l = dims[i];
        let n = (max_dist / (2.0 * l)) as i64 + 1;
        let mut out = Vec::new();
        for k in -n..=n {
            for u in 0..2i64 {
                let x = 2.0 * k as f64 * l + if u == 0 { source[i] } else { -source[i] };
                if Float::abs(x - mic[i]) <= max_dist {
                    out.push((x, (2 * k - u).unsigned_abs() as usize));
                }
            }
        }
        out
    };
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));
    let r2 = max_dist * max_dist;
    let mut out = Vec::new();
    for &(x, rx) in &xs {
        let dx = (x - mic[0]) * (x - mic[0]);
        for &(y, ry) in &ys {
            let dxy = dx + (y - mic[1]) * (y - mic[1]);
            if dxy > r2 {
                continue;
            }
            for &(z, rz) in &zs {
                if dxy + (z - mic[2]) * (z - mic[2]) <= r2 {
                    out.push(Image {
                        position: [x, y, z],
                        reflections: rx + ry + rz,
                    });
                }
            }
        }
    }
    out
}

/// Nearest-sample delay for a path of `d` metres.
pub fn delay_samples(d: f64) -> usize {
    Float::round(d * SAMPLE_RATE as f64 / SPEED_OF_SOUND) as usize
}

fn render(images: &[Image], mic: Point, beta: f64, len: usize) -> Rir {
    let mut taps = vec![0.0; len];
    let mut max_order = 0;
    for im in images {
        let d = distance(im.position, mic).max(1e-3);
        let n = delay_samples(d);
        if n < len {
            taps[n] += Float::powi(beta, im.reflections as i32) / (4.0 * core::f64::consts::PI * d);
            max_order = max_order.max(im.reflections);
        }
    }
    Rir {
        taps,
        sample_rate: SAMPLE_RATE,
        max_order,
    }
}

/// Second-order high-pass at 100 Hz in the Allen–Berkley form. Image
/// amplitudes are all positive, so densely packed late arrivals build up a
/// DC offset; removing it leaves their incoherent energy.
pub fn high_pass_100hz(taps: &mut [f64]) {
    let w = core::f64::consts::TAU * 100.0 / SAMPLE_RATE as f64;
    let r1 = Float::exp(-w);
    let b1 = 2.0 * r1 * Float::cos(w);
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let mut y = [0.0f64; 3];
    for v in taps.iter_mut() {
        y[2] = y[1];
        y[1] = y[0];
        y[0] = b1 * y[1] + b2 * y[2] + *v;
        *v = y[0] + a1 * y[1] + r1 * y[2];
    }
}

/// Room impulse response from the scene's source to microphone `mic`.
///
/// Each reflection scales pressure by `sqrt(1 − α)`, the amplitude
/// counterpart of the energy absorption `α`. Images are summed while their
/// path is no longer than `c·t60`; the result is high-passed at 100 Hz.
pub fn image_method_rir(scene: &RoomScene, mic: usize) -> Result<Rir> {
    let alpha = absorption_from_t60(&scene.room)?;
    let beta = Float::sqrt(1.0 - alpha);
    let max_dist = SPEED_OF_SOUND * scene.room.t60;
    let len = delay_samples(max_dist) + 1;
    let m = scene.mics[mic];
    let mut rir = render(&images(scene.room.dims, scene.source, m, max_dist), m, beta, len);
    high_pass_100hz(&mut rir.taps);
    Ok(rir)
}

/// Direct path only (the order-0 image), filtered like the full response.
pub fn direct_path_rir(scene: &RoomScene, mic: usize) -> Rir {
    let m = scene.mics[mic];
    let d = distance(scene.source, m);
    let img = [Image {
        position: scene.source,
        reflections: 0,
    }];
    let mut rir = render(&img, m, 1.0, delay_samples(d) + 1);
    high_pass_100hz(&mut rir.taps);
    rir
}

/// Schroeder energy decay curve in dB (0 dB at the start).
pub fn schroeder_curve(taps: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = taps
        .iter()
        .rev()
        .map(|v| {
            acc += v * v;
            acc
        })
        .collect();
    edc.reverse();
    let e0 = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|&e| if e > 0.0 && e0 > 0.0 { 10.0 * Float::log10(e / e0) } else { f64::NEG_INFINITY })
        .collect()
}

/// T60 from a least-squares line through the decay curve between −5 and
/// −25 dB, extrapolated to −60 dB.
pub fn schroeder_t60(taps: &[f64], sample_rate: u32) -> Option<f64> {
    let curve = schroeder_curve(taps);
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .filter(|(_, &db)| (-25.0..=-5.0).contains(&db))
        .map(|(i, &db)| (i as f64 / sample_rate as f64, db))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -60.0 / slope)
}
