//! Model configuration and its key-value text form.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};
use core::str::FromStr;

use crate::error::{Error, Result};

/// Axis arrangement of an FCA block's attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcaKind {
    /// Both 1D convolutions run along time (narrow-band).
    Time,
    /// Both 1D convolutions run along frequency (sub-band).
    Frequency,
    /// First convolution along time, second along frequency.
    FrequencyTime,
}

/// Replacement for the Sandglass Unit inside bottlenecks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    Sandglass,
    /// A single pointwise convolution `C→C`.
    Pointwise,
}

/// How a decoder stage merges the upsampled path with its skip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipFusion {
    Concat,
    Add,
}

/// How the FCA-block trunk expands from `Cout/2` to `Cout` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrunkExpand {
    /// Concatenate the half-width features with a depthwise 3×3 of them.
    Ghost,
    /// Depthwise 3×3 followed by a pointwise `Cout/2→Cout`.
    Pointwise,
}

/// The ablation rows the configuration is meant to express.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    NoFca,
    PointwiseForSandglass,
    FtFcaEverywhere,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub channels: [usize; 4],
    pub mics: usize,
    pub fca_kernel: usize,
    pub dconv_kernel: usize,
    pub enable_fca: bool,
    pub unit: UnitKind,
    pub ft_fca_everywhere: bool,
    pub encoder_kinds: [FcaKind; 3],
    pub skip_fusion: SkipFusion,
    pub trunk_expand: TrunkExpand,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: [48, 96, 224, 480],
            mics: 6,
            fca_kernel: 5,
            dconv_kernel: 3,
            enable_fca: true,
            unit: UnitKind::Sandglass,
            ft_fca_everywhere: false,
            encoder_kinds: [FcaKind::Time, FcaKind::Frequency, FcaKind::Time],
            skip_fusion: SkipFusion::Concat,
            trunk_expand: TrunkExpand::Ghost,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ModelConfig {
    pub fn variant(v: Variant) -> Self {
        let mut c = Self::default();
        match v {
            Variant::Full => {}
            Variant::NoFca => c.enable_fca = false,
            Variant::PointwiseForSandglass => c.unit = UnitKind::Pointwise,
            Variant::FtFcaEverywhere => c.ft_fca_everywhere = true,
        }
        c
    }

    /// Small widths for tests and quick experiments.
    pub fn tiny(channels: [usize; 4], mics: usize) -> Self {
        Self {
            channels,
            mics,
            ..Self::default()
        }
    }

    pub fn input_channels(&self) -> usize {
        2 * self.mics
    }

    pub fn encoder_kind(&self, level: usize) -> FcaKind {
        if self.ft_fca_everywhere {
            FcaKind::FrequencyTime
        } else {
            self.encoder_kinds[level]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.iter().any(|&c| c == 0 || c % 2 != 0) {
            return Err(cfg_err("channels must be positive and even"));
        }
        if self.mics == 0 {
            return Err(cfg_err("mics must be at least 1"));
        }
        if self.fca_kernel % 2 == 0 || self.dconv_kernel % 2 == 0 {
            return Err(cfg_err("kernel sizes must be odd"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let kind = |k: FcaKind| match k {
            FcaKind::Time => "time",
            FcaKind::Frequency => "frequency",
            FcaKind::FrequencyTime => "frequency_time",
        };
        let c = self.channels;
        let e = self.encoder_kinds;
        let mut s = String::new();
        let _ = writeln!(s, "channels={},{},{},{}", c[0], c[1], c[2], c[3]);
        let _ = writeln!(s, "mics={}", self.mics);
        let _ = writeln!(s, "fca_kernel={}", self.fca_kernel);
        let _ = writeln!(s, "dconv_kernel={}", self.dconv_kernel);
        let _ = writeln!(s, "enable_fca={}", self.enable_fca);
        let _ = writeln!(
            s,
            "unit={}",
            match self.unit {
                UnitKind::Sandglass => "sandglass",
                UnitKind::Pointwise => "pconv",
            }
        );
        let _ = writeln!(s, "ft_fca_everywhere={}", self.ft_fca_everywhere);
        let _ = writeln!(s, "encoder_kinds={},{},{}", kind(e[0]), kind(e[1]), kind(e[2]));
        let _ = writeln!(
            s,
            "skip_fusion={}",
            match self.skip_fusion {
                SkipFusion::Concat => "concat",
                SkipFusion::Add => "add",
            }
        );
        let _ = writeln!(
            s,
            "trunk_expand={}",
            match self.trunk_expand {
                TrunkExpand::Ghost => "ghost",
                TrunkExpand::Pointwise => "pconv",
            }
        );
        s
    }

    /// Parses `key=value` lines. Unknown keys are rejected; blank lines and
    /// lines starting with `#` are skipped; missing keys keep defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(alloc::format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || cfg_err(alloc::format!("bad value `{v}` for `{k}`"));
            match k {
                "channels" => {
                    let xs: Vec<usize> = v
                        .split(',')
                        .map(|x| x.trim().parse())
                        .collect::<core::result::Result<_, _>>()
                        .map_err(|_| bad())?;
                    c.channels = xs.try_into().map_err(|_| bad())?;
                }
                "mics" => c.mics = parse(v).ok_or_else(bad)?,
                "fca_kernel" => c.fca_kernel = parse(v).ok_or_else(bad)?,
                "dconv_kernel" => c.dconv_kernel = parse(v).ok_or_else(bad)?,
                "enable_fca" => c.enable_fca = parse(v).ok_or_else(bad)?,
                "ft_fca_everywhere" => c.ft_fca_everywhere = parse(v).ok_or_else(bad)?,
                "unit" => {
                    c.unit = match v {
                        "sandglass" => UnitKind::Sandglass,
                        "pconv" => UnitKind::Pointwise,
                        _ => return Err(bad()),
                    }
                }
                "encoder_kinds" => {
                    let ks: Vec<FcaKind> = v
                        .split(',')
                        .map(|x| match x.trim() {
                            "time" => Ok(FcaKind::Time),
                            "frequency" => Ok(FcaKind::Frequency),
                            "frequency_time" => Ok(FcaKind::FrequencyTime),
                            _ => Err(bad()),
                        })
                        .collect::<Result<_>>()?;
                    c.encoder_kinds = ks.try_into().map_err(|_| bad())?;
                }
                "skip_fusion" => {
                    c.skip_fusion = match v {
                        "concat" => SkipFusion::Concat,
                        "add" => SkipFusion::Add,
                        _ => return Err(bad()),
                    }
                }
                "trunk_expand" => {
                    c.trunk_expand = match v {
                        "ghost" => TrunkExpand::Ghost,
                        "pconv" => TrunkExpand::Pointwise,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(cfg_err(alloc::format!("unknown key `{k}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse<T: FromStr>(v: &str) -> Option<T> {
    v.parse().ok()
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
