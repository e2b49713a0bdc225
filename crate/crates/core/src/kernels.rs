//! Forward and backward kernels for the differentiable operation set.
//!
//! All feature maps are `F×T×C` with channels contiguous. Kernels take raw
//! slices plus extents; shape validation lives in the callers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Time,
    Frequency,
}

#[inline(always)]
fn axpy<S: Real>(y: &mut [S], a: &[S], b: &[S]) {
    for ((y, &a), &b) in y.iter_mut().zip(a).zip(b) {
        *y += a * b;
    }
}

// ---------------------------------------------------------------- pointwise

pub fn pointwise_fwd<S: Real>(
    x: &[S],
    pixels: usize,
    cin: usize,
    w: &[S],
    cout: usize,
    b: Option<&[S]>,
) -> Vec<S> {
    let mut out = vec![S::zero(); pixels * cout];
    S::gemm(pixels, cin, cout, x, false, w, false, &mut out, false);
    if let Some(b) = b {
        for row in out.chunks_exact_mut(cout) {
            for (o, &bb) in row.iter_mut().zip(b) {
                *o += bb;
            }
        }
    }
    out
}

/// Returns `(dx, dw, db)`.
pub fn pointwise_bwd<S: Real>(
    dy: &[S],
    x: &[S],
    pixels: usize,
    cin: usize,
    w: &[S],
    cout: usize,
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let mut dx = vec![S::zero(); pixels * cin];
    S::gemm(pixels, cout, cin, dy, false, w, true, &mut dx, false);
    let mut dw = vec![S::zero(); cin * cout];
    S::gemm(cin, pixels, cout, x, true, dy, false, &mut dw, false);
    let mut db = vec![S::zero(); cout];
    for row in dy.chunks_exact(cout) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    (dx, dw, db)
}

// ---------------------------------------------------------------- depthwise 2d

/// Same-padded depthwise `k×k` cross-correlation; `w` is `k×k×C`.
pub fn depthwise2d_fwd<S: Real>(x: &[S], f: usize, t: usize, c: usize, w: &[S], k: usize) -> Vec<S> {
    let r = k / 2;
    let mut out = vec![S::zero(); f * t * c];
    for fo in 0..f {
        for i in 0..k {
            let Some(fi) = (fo + i).checked_sub(r).filter(|&v| v < f) else {
                continue;
            };
            for to in 0..t {
                let o = (fo * t + to) * c;
                let orow = &mut out[o..o + c];
                for j in 0..k {
                    let Some(tj) = (to + j).checked_sub(r).filter(|&v| v < t) else {
                        continue;
                    };
                    let xi = (fi * t + tj) * c;
                    let wi = (i * k + j) * c;
                    axpy(orow, &x[xi..xi + c], &w[wi..wi + c]);
                }
            }
        }
    }
    out
}

/// Returns `(dx, dw)`.
pub fn depthwise2d_bwd<S: Real>(
    dy: &[S],
    x: &[S],
    f: usize,
    t: usize,
    c: usize,
    w: &[S],
    k: usize,
) -> (Vec<S>, Vec<S>) {
    let r = k / 2;
    let mut dx = vec![S::zero(); f * t * c];
    let mut dw = vec![S::zero(); k * k * c];
    for fo in 0..f {
        for i in 0..k {
            let Some(fi) = (fo + i).checked_sub(r).filter(|&v| v < f) else {
                continue;
            };
            for to in 0..t {
                let o = (fo * t + to) * c;
                let g = &dy[o..o + c];
                for j in 0..k {
                    let Some(tj) = (to + j).checked_sub(r).filter(|&v| v < t) else {
                        continue;
                    };
                    let xi = (fi * t + tj) * c;
                    let wi = (i * k + j) * c;
                    axpy(&mut dx[xi..xi + c], g, &w[wi..wi + c]);
                    axpy(&mut dw[wi..wi + c], g, &x[xi..xi + c]);
                }
            }
        }
    }
    (dx, dw)
}

// ---------------------------------------------------------------- depthwise 1d

/// `(line_count, line_len, line_stride, base_step)` for walking one axis.
fn axis_lines(axis: Axis, f: usize, t: usize, c: usize) -> (usize, usize, usize, usize) {
    match axis {
        Axis::Time => (f, t, c, t * c),
        Axis::Frequency => (t, f, t * c, c),
    }
}

/// Same-padded depthwise 1D convolution along `axis`; `w` is `K×C`.
pub fn conv1d_axis_fwd<S: Real>(
    x: &[S],
    f: usize,
    t: usize,
    c: usize,
    w: &[S],
    k: usize,
    axis: Axis,
) -> Vec<S> {
    let r = k / 2;
    let (lines, len, stride, step) = axis_lines(axis, f, t, c);
    let mut out = vec![S::zero(); f * t * c];
    for line in 0..lines {
        let base = line * step;
        for p in 0..len {
            let o = base + p * stride;
            for q in 0..k {
                let Some(pi) = (p + q).checked_sub(r).filter(|&v| v < len) else {
                    continue;
                };
                let xi = base + pi * stride;
                axpy(&mut out[o..o + c], &x[xi..xi + c], &w[q * c..q * c + c]);
            }
        }
    }
    out
}

pub fn conv1d_axis_bwd<S: Real>(
    dy: &[S],
    x: &[S],
    f: usize,
    t: usize,
    c: usize,
    w: &[S],
    k: usize,
    axis: Axis,
) -> (Vec<S>, Vec<S>) {
    let r = k / 2;
    let (lines, len, stride, step) = axis_lines(axis, f, t, c);
    let mut dx = vec![S::zero(); f * t * c];
    let mut dw = vec![S::zero(); k * c];
    for line in 0..lines {
        let base = line * step;
        for p in 0..len {
            let o = base + p * stride;
            let g = &dy[o..o + c];
            for q in 0..k {
                let Some(pi) = (p + q).checked_sub(r).filter(|&v| v < len) else {
                    continue;
                };
                let xi = base + pi * stride;
                axpy(&mut dx[xi..xi + c], g, &w[q * c..q * c + c]);
                axpy(&mut dw[q * c..q * c + c], g, &x[xi..xi + c]);
            }
        }
    }
    (dx, dw)
}

// ---------------------------------------------------------------- pooling

pub fn check_even(op: &'static str, f: usize, t: usize) -> Result<()> {
    if f % 2 != 0 || t % 2 != 0 {
        return Err(contract(
            op,
            alloc::format!("extents {f}×{t} must be even; pad the signal first"),
        ));
    }
    Ok(())
}

#[inline(always)]
fn window(t: usize, c: usize, fo: usize, to: usize) -> [usize; 4] {
    let a = ((2 * fo) * t + 2 * to) * c;
    let b = ((2 * fo + 1) * t + 2 * to) * c;
    [a, a + c, b, b + c]
}

pub fn avg_pool2_fwd<S: Real>(x: &[S], f: usize, t: usize, c: usize) -> Vec<S> {
    let (fh, th) = (f / 2, t / 2);
    let q = S::of(0.25);
    let mut out = vec![S::zero(); fh * th * c];
    for fo in 0..fh {
        for to in 0..th {
            let o = (fo * th + to) * c;
            let win = window(t, c, fo, to);
            for ch in 0..c {
                out[o + ch] =
                    (x[win[0] + ch] + x[win[1] + ch] + x[win[2] + ch] + x[win[3] + ch]) * q;
            }
        }
    }
    out
}

pub fn avg_pool2_bwd<S: Real>(dy: &[S], f: usize, t: usize, c: usize) -> Vec<S> {
    let (fh, th) = (f / 2, t / 2);
    let q = S::of(0.25);
    let mut dx = vec![S::zero(); f * t * c];
    for fo in 0..fh {
        for to in 0..th {
            let o = (fo * th + to) * c;
            for w in window(t, c, fo, to) {
                for ch in 0..c {
                    dx[w + ch] = dy[o + ch] * q;
                }
            }
        }
    }
    dx
}

/// Max pooling; also returns the flat input index selected for each output.
pub fn max_pool2_fwd<S: Real>(x: &[S], f: usize, t: usize, c: usize) -> (Vec<S>, Vec<u32>) {
    let (fh, th) = (f / 2, t / 2);
    let mut out = vec![S::zero(); fh * th * c];
    let mut arg = vec![0u32; fh * th * c];
    for fo in 0..fh {
        for to in 0..th {
            let o = (fo * th + to) * c;
            let win = window(t, c, fo, to);
            for ch in 0..c {
                let mut best = win[0] + ch;
                for w in &win[1..] {
                    if x[w + ch] > x[best] {
                        best = w + ch;
                    }
                }
                out[o + ch] = x[best];
                arg[o + ch] = best as u32;
            }
        }
    }
    (out, arg)
}

pub fn max_pool2_bwd<S: Real>(dy: &[S], arg: &[u32], n_in: usize) -> Vec<S> {
    let mut dx = vec![S::zero(); n_in];
    for (&g, &a) in dy.iter().zip(arg) {
        dx[a as usize] += g;
    }
    dx
}

pub fn upsample2_fwd<S: Real>(x: &[S], f: usize, t: usize, c: usize) -> Vec<S> {
    let t2 = 2 * t;
    let mut out = vec![S::zero(); 4 * f * t * c];
    for fi in 0..f {
        for ti in 0..t {
            let src = &x[(fi * t + ti) * c..(fi * t + ti + 1) * c];
            for di in 0..2 {
                for dj in 0..2 {
                    let o = ((2 * fi + di) * t2 + 2 * ti + dj) * c;
                    out[o..o + c].copy_from_slice(src);
                }
            }
        }
    }
    out
}

/// Adjoint of [`upsample2_fwd`]; `f`, `t` are the small (input) extents.
pub fn upsample2_bwd<S: Real>(dy: &[S], f: usize, t: usize, c: usize) -> Vec<S> {
    let t2 = 2 * t;
    let mut dx = vec![S::zero(); f * t * c];
    for fi in 0..f {
        for ti in 0..t {
            let d = &mut dx[(fi * t + ti) * c..(fi * t + ti + 1) * c];
            for di in 0..2 {
                for dj in 0..2 {
                    let o = ((2 * fi + di) * t2 + 2 * ti + dj) * c;
                    for (a, &g) in d.iter_mut().zip(&dy[o..o + c]) {
                        *a += g;
                    }
                }
            }
        }
    }
    dx
}

// ---------------------------------------------------------------- transposed conv

/// Rearranges a `2×2×Cin×Cout` kernel into a `Cin×(4·Cout)` matrix.
fn tconv_matrix<S: Real>(w: &[S], cin: usize, cout: usize) -> Vec<S> {
    let mut m = vec![S::zero(); cin * 4 * cout];
    for ij in 0..4 {
        for ci in 0..cin {
            let src = &w[(ij * cin + ci) * cout..(ij * cin + ci + 1) * cout];
            m[ci * 4 * cout + ij * cout..ci * 4 * cout + (ij + 1) * cout].copy_from_slice(src);
        }
    }
    m
}

/// Stride-2, 2×2 transposed convolution: `F×T×Cin → 2F×2T×Cout`.
pub fn tconv2_fwd<S: Real>(x: &[S], f: usize, t: usize, cin: usize, w: &[S], cout: usize) -> Vec<S> {
    let px = f * t;
    let wm = tconv_matrix(w, cin, cout);
    let mut tmp = vec![S::zero(); px * 4 * cout];
    S::gemm(px, cin, 4 * cout, x, false, &wm, false, &mut tmp, false);
    let t2 = 2 * t;
    let mut out = vec![S::zero(); 4 * px * cout];
    for fi in 0..f {
        for ti in 0..t {
            let row = &tmp[(fi * t + ti) * 4 * cout..(fi * t + ti + 1) * 4 * cout];
            for ij in 0..4 {
                let (di, dj) = (ij / 2, ij % 2);
                let o = ((2 * fi + di) * t2 + 2 * ti + dj) * cout;
                out[o..o + cout].copy_from_slice(&row[ij * cout..(ij + 1) * cout]);
            }
        }
    }
    out
}

pub fn tconv2_bwd<S: Real>(
    dy: &[S],
    x: &[S],
    f: usize,
    t: usize,
    cin: usize,
    w: &[S],
    cout: usize,
) -> (Vec<S>, Vec<S>) {
    let px = f * t;
    let t2 = 2 * t;
    let mut dtmp = vec![S::zero(); px * 4 * cout];
    for fi in 0..f {
        for ti in 0..t {
            let row = &mut dtmp[(fi * t + ti) * 4 * cout..(fi * t + ti + 1) * 4 * cout];
            for ij in 0..4 {
                let (di, dj) = (ij / 2, ij % 2);
                let o = ((2 * fi + di) * t2 + 2 * ti + dj) * cout;
                row[ij * cout..(ij + 1) * cout].copy_from_slice(&dy[o..o + cout]);
            }
        }
    }
    let wm = tconv_matrix(w, cin, cout);
    let mut dx = vec![S::zero(); px * cin];
    S::gemm(px, 4 * cout, cin, &dtmp, false, &wm, true, &mut dx, false);
    let mut dwm = vec![S::zero(); cin * 4 * cout];
    S::gemm(cin, px, 4 * cout, x, true, &dtmp, false, &mut dwm, false);
    let mut dw = vec![S::zero(); 4 * cin * cout];
    for ij in 0..4 {
        for ci in 0..cin {
            dw[(ij * cin + ci) * cout..(ij * cin + ci + 1) * cout]
                .copy_from_slice(&dwm[ci * 4 * cout + ij * cout..ci * 4 * cout + (ij + 1) * cout]);
        }
    }
    (dx, dw)
}

// ---------------------------------------------------------------- elementwise

#[inline(always)]
pub fn sigmoid<S: Real>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

pub fn prelu_fwd<S: Real>(x: &[S], c: usize, alpha: &[S]) -> Vec<S> {
    let mut out = x.to_vec();
    for row in out.chunks_exact_mut(c) {
        for (v, &a) in row.iter_mut().zip(alpha) {
            if *v <= S::zero() {
                *v *= a;
            }
        }
    }
    out
}

pub fn prelu_bwd<S: Real>(dy: &[S], x: &[S], c: usize, alpha: &[S]) -> (Vec<S>, Vec<S>) {
    let mut dx = dy.to_vec();
    let mut da = vec![S::zero(); c];
    for ((g, xr), dr) in dy.chunks_exact(c).zip(x.chunks_exact(c)).zip(dx.chunks_exact_mut(c)) {
        for ch in 0..c {
            if xr[ch] <= S::zero() {
                dr[ch] = g[ch] * alpha[ch];
                da[ch] += g[ch] * xr[ch];
            }
        }
    }
    (dx, da)
}

/// Interleaves channel blocks of several `F×T×Ci` maps.
pub fn concat_fwd<S: Real>(parts: &[(&[S], usize)], pixels: usize) -> Vec<S> {
    let ctot: usize = parts.iter().map(|p| p.1).sum();
    let mut out = Vec::with_capacity(pixels * ctot);
    for p in 0..pixels {
        for &(d, c) in parts {
            out.extend_from_slice(&d[p * c..(p + 1) * c]);
        }
    }
    out
}

pub fn concat_bwd<S: Real>(dy: &[S], widths: &[usize], pixels: usize) -> Vec<Vec<S>> {
    let ctot: usize = widths.iter().sum();
    let mut outs: Vec<Vec<S>> = widths.iter().map(|&c| Vec::with_capacity(pixels * c)).collect();
    for p in 0..pixels {
        let mut off = p * ctot;
        for (o, &c) in outs.iter_mut().zip(widths) {
            o.extend_from_slice(&dy[off..off + c]);
            off += c;
        }
    }
    outs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_window_values() {
        let x = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(avg_pool2_fwd(&x, 2, 2, 1), vec![2.5]);
        let (m, arg) = max_pool2_fwd(&x, 2, 2, 1);
        assert_eq!(m, vec![4.0]);
        assert_eq!(arg, vec![3]);
    }

    #[test]
    fn upsample_replicates_blocks() {
        let x = [1.0f64, 2.0];
        let up = upsample2_fwd(&x, 1, 2, 1);
        assert_eq!(up, vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn tconv_impulse_gives_ones_patch() {
        let out = tconv2_fwd(&[1.0f64], 1, 1, 1, &[1.0; 4], 1);
        assert_eq!(out, vec![1.0; 4]);
    }
}
