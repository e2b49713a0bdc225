//! Mixed-radix FFT for arbitrary lengths.
//!
//! Analysis frames are 510 samples (2·3·5·17), so power-of-two-only
//! transforms do not apply. The recursion is plain decimation in time with
//! a generic DFT butterfly per prime factor.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;
use num_traits::Float;

use crate::scalar::Real;

pub struct Fft<S> {
    n: usize,
    factors: Vec<usize>,
    twiddles: Vec<Complex<S>>,
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while n > 1 {
        if p * p > n {
            out.push(n);
            break;
        }
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    out
}

impl<S: Real> Fft<S> {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let twiddles = (0..n)
            .map(|k| {
                let a = -2.0 * core::f64::consts::PI * k as f64 / n as f64;
                Complex::new(S::of(Float::cos(a)), S::of(Float::sin(a)))
            })
            .collect();
        Self {
            n,
            factors: factorize(n),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X_k = Σ x_n e^{-2πikn/N}`.
    pub fn forward(&self, buf: &mut [Complex<S>]) {
        assert_eq!(buf.len(), self.n);
        let inp = buf.to_vec();
        let mut tmp = vec![Complex::new(S::zero(), S::zero()); self.factors.iter().copied().max().unwrap_or(1)];
        self.rec(buf, &inp, 1, 0, &mut tmp);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&self, buf: &mut [Complex<S>]) {
        buf.iter_mut().for_each(|v| *v = v.conj());
        self.forward(buf);
        buf.iter_mut().for_each(|v| *v = v.conj());
    }

    fn rec(&self, out: &mut [Complex<S>], inp: &[Complex<S>], stride: usize, fi: usize, tmp: &mut [Complex<S>]) {
        let n = out.len();
        if n == 1 {
            out[0] = inp[0];
            return;
        }
        let p = self.factors[fi];
        let m = n / p;
        for q in 0..p {
            self.rec(&mut out[q * m..(q + 1) * m], &inp[q * stride..], stride * p, fi + 1, tmp);
        }
        let step = self.n / n;
        let pstep = self.n / p;
        for k in 0..m {
            for q in 0..p {
                tmp[q] = out[q * m + k] * self.twiddles[step * ((q * k) % n)];
            }
            if p == 2 {
                let (a, b) = (tmp[0], tmp[1]);
                out[k] = a + b;
                out[k + m] = a - b;
                continue;
            }
            for s in 0..p {
                let mut acc = tmp[0];
                for q in 1..p {
                    acc = acc + tmp[q] * self.twiddles[pstep * ((q * s) % p)];
                }
                out[k + s * m] = acc;
            }
        }
    }

    /// One-sided spectrum (`N/2 + 1` bins) of a real frame.
    pub fn rfft(&self, x: &[S]) -> Vec<Complex<S>> {
        let mut buf: Vec<Complex<S>> = x.iter().map(|&v| Complex::new(v, S::zero())).collect();
        self.forward(&mut buf);
        buf.truncate(self.n / 2 + 1);
        buf
    }

    /// Inverse of [`Self::rfft`], normalized by `1/N`. The imaginary parts of
    /// the DC and (for even `N`) Nyquist bins are ignored.
    pub fn irfft(&self, spec: &[Complex<S>]) -> Vec<S> {
        let n = self.n;
        let half = n / 2 + 1;
        assert_eq!(spec.len(), half);
        let mut buf = vec![Complex::new(S::zero(), S::zero()); n];
        buf[..half].copy_from_slice(spec);
        for k in half..n {
            buf[k] = spec[n - k].conj();
        }
        self.inverse(&mut buf);
        let scale = S::one() / S::of(n as f64);
        buf.iter().map(|v| v.re * scale).collect()
    }
}

/// Linear convolution truncated to `out_len` samples, via zero-padded FFTs.
pub fn convolve<S: Real>(a: &[S], b: &[S], out_len: usize) -> Vec<S> {
    if a.is_empty() || b.is_empty() {
        return vec![S::zero(); out_len];
    }
    let full = a.len() + b.len() - 1;
    let n = full.next_power_of_two();
    let fft = Fft::<S>::new(n);
    let zero = Complex::new(S::zero(), S::zero());
    let mut fa = vec![zero; n];
    let mut fb = vec![zero; n];
    for (d, &v) in fa.iter_mut().zip(a) {
        d.re = v;
    }
    for (d, &v) in fb.iter_mut().zip(b) {
        d.re = v;
    }
    fft.forward(&mut fa);
    fft.forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * *y;
    }
    fft.inverse(&mut fa);
    let scale = S::one() / S::of(n as f64);
    (0..out_len)
        .map(|i| if i < full { fa[i].re * scale } else { S::zero() })
        .collect()
}
