//! Binary checkpoint container.
//!
//! Layout (all integers u64 little-endian):
//! `"LMFCA1"`, header length, header text, parameter count, parameter
//! records, optimizer record count, optimizer records. A record is name
//! length, name bytes, rank, extents, then f32 little-endian values.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::optim::TrainState;
use crate::params::ParameterStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"LMFCA1";
const STATE_PREFIX: &str = "state.";

/// Decoded checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Key-value header text, minus the training-state lines.
    pub header: String,
    pub params: ParameterStore<f32>,
    pub state: Option<TrainState<f32>>,
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_record(out: &mut Vec<u8>, name: &str, t: &Tensor<f32>) {
    put_u64(out, name.len() as u64);
    out.extend_from_slice(name.as_bytes());
    put_u64(out, t.rank() as u64);
    for &d in t.shape() {
        put_u64(out, d as u64);
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(header: &str, params: &ParameterStore<f32>, state: Option<&TrainState<f32>>) -> Vec<u8> {
    let mut head = String::from(header.trim_end());
    if let Some(s) = state {
        // Display for f64 round-trips exactly.
        let _ = write!(
            head,
            "\n{p}step={}\n{p}epoch={}\n{p}lr={}\n{p}best_val={}\n{p}stale_epochs={}",
            s.step,
            s.epoch,
            s.lr,
            s.best_val,
            s.stale_epochs,
            p = STATE_PREFIX
        );
    }
    head.push('\n');
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u64(&mut out, head.len() as u64);
    out.extend_from_slice(head.as_bytes());
    put_u64(&mut out, params.len() as u64);
    for (n, t) in params.iter() {
        put_record(&mut out, n, t);
    }
    match state {
        Some(s) => {
            put_u64(&mut out, (s.m.len() + s.v.len()) as u64);
            for (n, t) in s.m.iter() {
                put_record(&mut out, &alloc::format!("m/{n}"), t);
            }
            for (n, t) in s.v.iter() {
                put_record(&mut out, &alloc::format!("v/{n}"), t);
            }
        }
        None => put_u64(&mut out, 0),
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| bad("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        let v = usize::try_from(v).map_err(|_| bad("length overflow"))?;
        if v > self.buf.len() {
            return Err(bad("length exceeds file size"));
        }
        Ok(v)
    }

    fn record(&mut self) -> Result<(String, Tensor<f32>)> {
        let n = self.len()?;
        let name = core::str::from_utf8(self.take(n)?).map_err(|_| bad("name is not UTF-8"))?;
        let rank = self.len()?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.len()?);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&c| c.saturating_mul(4) <= self.buf.len())
            .ok_or_else(|| bad("tensor too large"))?;
        let raw = self.take(count * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let t = Tensor::new(&shape, data).map_err(|_| bad("bad tensor record"))?;
        Ok((name.to_string(), t))
    }
}

fn field<T: core::str::FromStr>(lines: &[(&str, &str)], key: &str) -> Result<T> {
    let v = lines
        .iter()
        .find(|(k, _)| *k == key)
        .ok_or_else(|| bad(alloc::format!("missing `{STATE_PREFIX}{key}`")))?;
    v.1.parse().map_err(|_| bad(alloc::format!("bad `{STATE_PREFIX}{key}`")))
}

pub fn decode(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(bad("not an LMFCA1 checkpoint"));
    }
    let hl = r.len()?;
    let head = core::str::from_utf8(r.take(hl)?).map_err(|_| bad("header is not UTF-8"))?;
    let mut header = String::new();
    let mut state_lines = Vec::new();
    for line in head.lines() {
        match line.strip_prefix(STATE_PREFIX).and_then(|l| l.split_once('=')) {
            Some(kv) => state_lines.push(kv),
            None => {
                header.push_str(line);
                header.push('\n');
            }
        }
    }
    let mut params = ParameterStore::new();
    for _ in 0..r.len()? {
        let (n, t) = r.record()?;
        params.insert(&n, t).map_err(|_| bad("duplicate parameter"))?;
    }
    let n_opt = r.len()?;
    let mut m = ParameterStore::new();
    let mut v = ParameterStore::new();
    for _ in 0..n_opt {
        let (n, t) = r.record()?;
        let (which, rest) = n.split_once('/').ok_or_else(|| bad("bad optimizer record"))?;
        let dst = match which {
            "m" => &mut m,
            "v" => &mut v,
            _ => return Err(bad("bad optimizer record")),
        };
        dst.insert(rest, t).map_err(|_| bad("duplicate optimizer record"))?;
    }
    if r.pos != buf.len() {
        return Err(bad("trailing bytes"));
    }
    let state = if state_lines.is_empty() {
        None
    } else {
        Some(TrainState {
            m,
            v,
            step: field(&state_lines, "step")?,
            epoch: field(&state_lines, "epoch")?,
            lr: field(&state_lines, "lr")?,
            best_val: field(&state_lines, "best_val")?,
            stale_epochs: field(&state_lines, "stale_epochs")?,
        })
    };
    Ok(Checkpoint { header, params, state })
}
