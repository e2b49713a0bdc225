//! Dense row-major tensors.
//!
//! Feature maps use the `F×T×C` layout with channels varying fastest, so a
//! pointwise convolution is a single matrix product over `F·T` rows.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
    grad: Option<Vec<S>>,
}

impl<S: Real> Tensor<S> {
    pub fn new(shape: &[usize], data: Vec<S>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(contract(
                "tensor",
                alloc::format!("shape {:?} needs {} values, got {}", shape, n, data.len()),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, S::zero())
    }

    pub fn full(shape: &[usize], v: S) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
            grad: None,
        }
    }

    pub fn scalar(v: S) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![v],
            grad: None,
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> S) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
            grad: None,
        }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Extents of a rank-3 feature map.
    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [f, t, c] => Ok((f, t, c)),
            _ => Err(contract(
                op,
                alloc::format!("expected an F×T×C tensor, got shape {:?}", self.shape),
            )),
        }
    }

    #[inline]
    pub fn at3(&self, f: usize, t: usize, c: usize) -> S {
        let (_, tt, cc) = (self.shape[0], self.shape[1], self.shape[2]);
        self.data[(f * tt + t) * cc + c]
    }

    pub fn item(&self) -> S {
        self.data[0]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(contract("reshape", "element count changes"));
        }
        self.shape = shape.to_vec();
        if self.grad.is_some() {
            self.grad = Some(vec![S::zero(); n]);
        }
        Ok(self)
    }

    pub fn grad(&self) -> Option<&[S]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [S]> {
        self.grad.as_deref_mut()
    }

    /// Allocates a zeroed gradient buffer if none exists.
    pub fn enable_grad(&mut self) {
        if self.grad.is_none() {
            self.grad = Some(vec![S::zero(); self.data.len()]);
        }
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = S::zero());
        }
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    /// Mutable access to data and gradient at the same time.
    pub fn data_and_grad_mut(&mut self) -> (&mut [S], Option<&mut [S]>) {
        (&mut self.data, self.grad.as_deref_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Real>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::of(v.f64())).collect(),
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| T::of(v.f64())).collect()),
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.f64() - b.f64()).abs())
            .fold(0.0, f64::max)
    }

    /// Copies channel range `[from, to)` of an F×T×C tensor.
    pub fn channels(&self, from: usize, to: usize) -> Result<Self> {
        let (f, t, c) = self.dims3("channels")?;
        if from > to || to > c {
            return Err(contract("channels", "channel range out of bounds"));
        }
        let w = to - from;
        let mut out = Vec::with_capacity(f * t * w);
        for px in self.data.chunks_exact(c) {
            out.extend_from_slice(&px[from..to]);
        }
        Tensor::new(&[f, t, w], out)
    }
}
