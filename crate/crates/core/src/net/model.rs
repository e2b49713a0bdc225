//! FCA blocks, Sandglass Units, bottlenecks and the full encoder-decoder.

use alloc::format;

use crate::error::{contract, Result};
use crate::graph::Ops;
use crate::net::config::{FcaKind, ModelConfig, SkipFusion, TrunkExpand, UnitKind};
use crate::net::fca::fca_map_pooled;
use crate::params::Init;
use crate::scalar::Real;

/// Pointwise convolution with bias, parameters `{name}.w` and `{name}.b`.
pub fn pconv<S: Real, O: Ops<S>>(o: &mut O, name: &str, x: &O::V, cin: usize, cout: usize) -> Result<O::V> {
    let w = o.param(&format!("{name}.w"), &[cin, cout], Init::HeUniform { fan_in: cin })?;
    let b = o.param(&format!("{name}.b"), &[cout], Init::Zeros)?;
    o.pointwise(x, &w, Some(&b))
}

/// Depthwise `k×k` convolution, parameter `{name}.w`.
pub fn dconv<S: Real, O: Ops<S>>(o: &mut O, name: &str, x: &O::V, c: usize, k: usize) -> Result<O::V> {
    let w = o.param(&format!("{name}.w"), &[k, k, c], Init::HeUniform { fan_in: k * k })?;
    o.depthwise2d(x, &w)
}

/// Per-channel PReLU, parameter `{name}.alpha`.
pub fn act<S: Real, O: Ops<S>>(o: &mut O, name: &str, x: &O::V, c: usize) -> Result<O::V> {
    let a = o.param(&format!("{name}.alpha"), &[c], Init::Constant(0.25))?;
    o.prelu(x, &a)
}

/// FCA block: channel-changing trunk gated by an attention map.
pub fn fca_block<S: Real, O: Ops<S>>(
    o: &mut O,
    cfg: &ModelConfig,
    name: &str,
    x: &O::V,
    cin: usize,
    cout: usize,
    kind: FcaKind,
) -> Result<O::V> {
    let half = cout / 2;
    let k = cfg.dconv_kernel;
    let h = pconv(o, &format!("{name}.pw1"), x, cin, half)?;
    let h = act(o, &format!("{name}.act1"), &h, half)?;
    let g = dconv(o, &format!("{name}.dw"), &h, half, k)?;
    let g = act(o, &format!("{name}.act2"), &g, half)?;
    let trunk = match cfg.trunk_expand {
        TrunkExpand::Ghost => o.concat(&[&h, &g])?,
        TrunkExpand::Pointwise => {
            let e = pconv(o, &format!("{name}.pw2"), &g, half, cout)?;
            act(o, &format!("{name}.act3"), &e, cout)?
        }
    };
    let mut out = if cfg.enable_fca {
        let kk = cfg.fca_kernel;
        // Pooling and the projection commute, so project the pooled input.
        let pooled = o.avg_pool2(x)?;
        let proj = pconv(o, &format!("{name}.fca.proj"), &pooled, cin, cout)?;
        let d1 = o.param(&format!("{name}.fca.d1"), &[kk, cout], Init::HeUniform { fan_in: kk })?;
        let d2 = o.param(&format!("{name}.fca.d2"), &[kk, cout], Init::HeUniform { fan_in: kk })?;
        let map = fca_map_pooled(o, &proj, kind, &d1, &d2)?;
        o.mul(&trunk, &map)?
    } else {
        trunk
    };
    if cin == cout {
        out = o.add(&out, x)?;
    }
    Ok(out)
}

/// Sandglass Unit with identity residual, or the pointwise replacement.
pub fn sandglass_unit<S: Real, O: Ops<S>>(
    o: &mut O,
    cfg: &ModelConfig,
    name: &str,
    x: &O::V,
    c: usize,
) -> Result<O::V> {
    if cfg.unit == UnitKind::Pointwise {
        return pconv(o, &format!("{name}.pw"), x, c, c);
    }
    let k = cfg.dconv_kernel;
    let y = dconv(o, &format!("{name}.dw1"), x, c, k)?;
    let y = act(o, &format!("{name}.act1"), &y, c)?;
    let y = pconv(o, &format!("{name}.pw1"), &y, c, c / 2)?;
    let y = pconv(o, &format!("{name}.pw2"), &y, c / 2, c)?;
    let y = act(o, &format!("{name}.act2"), &y, c)?;
    let y = dconv(o, &format!("{name}.dw2"), &y, c, k)?;
    o.add(&y, x)
}

/// Two Sandglass Units in sequence.
pub fn bottleneck_block<S: Real, O: Ops<S>>(
    o: &mut O,
    cfg: &ModelConfig,
    name: &str,
    x: &O::V,
    c: usize,
) -> Result<O::V> {
    let y = sandglass_unit(o, cfg, &format!("{name}.u1"), x, c)?;
    sandglass_unit(o, cfg, &format!("{name}.u2"), &y, c)
}

/// `F×T×2M` normalised stacked spectra → `F×T×2` mask estimate.
pub fn model_forward<S: Real, O: Ops<S>>(o: &mut O, cfg: &ModelConfig, x: &O::V) -> Result<O::V> {
    cfg.validate()?;
    let shape = o.shape(x);
    let [f, t, cin] = shape[..] else {
        return Err(contract("model_forward", "input must be F×T×2M"));
    };
    if cin != cfg.input_channels() {
        return Err(contract(
            "model_forward",
            format!("input has {cin} channels, config expects {}", cfg.input_channels()),
        ));
    }
    if f % 8 != 0 || t % 8 != 0 || f == 0 || t == 0 {
        return Err(contract("model_forward", format!("F={f} and T={t} must be positive multiples of 8")));
    }
    let [c1, c2, c3, c4] = cfg.channels;

    let e1 = fca_block(o, cfg, "enc1", x, cin, c1, cfg.encoder_kind(0))?;
    let p1 = o.max_pool2(&e1)?;
    let e2 = fca_block(o, cfg, "enc2", &p1, c1, c2, cfg.encoder_kind(1))?;
    let p2 = o.max_pool2(&e2)?;
    let e3 = fca_block(o, cfg, "enc3", &p2, c2, c3, cfg.encoder_kind(2))?;
    let p3 = o.max_pool2(&e3)?;

    let m = pconv(o, "mid.proj", &p3, c3, c4)?;
    let m = act(o, "mid.act", &m, c4)?;
    let mut y = bottleneck_block(o, cfg, "mid", &m, c4)?;

    let mut prev = c4;
    for (i, (skip, c)) in [(&e3, c3), (&e2, c2), (&e1, c1)].into_iter().enumerate() {
        let name = format!("dec{}", 3 - i);
        let w = o.param(&format!("{name}.up.w"), &[2, 2, prev, c], Init::HeUniform { fan_in: prev })?;
        let u = o.tconv2(&y, &w)?;
        let u = act(o, &format!("{name}.up.act"), &u, c)?;
        let (fused, width) = match cfg.skip_fusion {
            SkipFusion::Concat => (o.concat(&[&u, skip])?, 2 * c),
            SkipFusion::Add => (o.add(&u, skip)?, c),
        };
        y = fca_block(o, cfg, &name, &fused, width, c, FcaKind::FrequencyTime)?;
        prev = c;
    }

    let y = bottleneck_block(o, cfg, "tail", &y, c1)?;
    pconv(o, "out", &y, c1, 2)
}
