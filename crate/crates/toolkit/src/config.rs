//! Sectioned key-value run configuration.
//!
//! ```text
//! [model]
//! channels=32,64,96,128
//! [train]
//! lr=0.0001
//! [data]
//! rooms=200
//! [eval]
//! repeats=5
//! ```
//!
//! Unknown sections or keys are errors. [`RunConfig::to_text`] writes every
//! key, and its output parses back to the same configuration.

use std::fmt::Write;
use std::path::PathBuf;
use std::str::FromStr;

use lmfca_core::loss::LossWeights;
use lmfca_core::net::ModelConfig;
use lmfca_core::optim::INITIAL_LR;
use lmfca_core::train::BATCH_SIZE;

use crate::error::{Result, ToolkitError};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub lr: f64,
    pub batch: usize,
    pub epochs: u32,
    pub seed: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Share of the manifest (taken from its end) held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            lr: INITIAL_LR,
            batch: BATCH_SIZE,
            epochs: 100,
            seed: 0,
            grad_clip: None,
            val_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub clean_dir: Option<PathBuf>,
    pub noise_dir: Option<PathBuf>,
    pub rooms: usize,
    pub rirs_per_room: usize,
    /// Length of each synthesized example.
    pub seconds: f64,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            clean_dir: None,
            noise_dir: None,
            rooms: 200,
            rirs_per_room: 20,
            seconds: 4.0,
            snr_min_db: 0.0,
            snr_max_db: 12.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub manifest: Option<PathBuf>,
    pub repeats: usize,
    pub rtf_seconds: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            repeats: 5,
            rtf_seconds: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

fn err(line: usize, msg: impl Into<String>) -> ToolkitError {
    ToolkitError::Config(format!("line {line}: {}", msg.into()))
}

fn num<T: FromStr>(line: usize, k: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| err(line, format!("bad value `{v}` for `{k}`")))
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut model_text = String::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(s) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if !matches!(s, "model" | "train" | "data" | "eval") {
                    return Err(err(n, format!("unknown section `[{s}]`")));
                }
                section = s.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(n, format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            match section.as_str() {
                "model" => {
                    model_text.push_str(line);
                    model_text.push('\n');
                }
                "train" => {
                    let t = &mut c.train;
                    match k {
                        "alpha" => t.weights.alpha = num(n, k, v)?,
                        "beta" => t.weights.beta = num(n, k, v)?,
                        "sisdr_eps" => t.weights.sisdr_eps = num(n, k, v)?,
                        "sisdr_cap_db" => t.weights.sisdr_cap_db = num(n, k, v)?,
                        "lr" => t.lr = num(n, k, v)?,
                        "batch" => t.batch = num(n, k, v)?,
                        "epochs" => t.epochs = num(n, k, v)?,
                        "seed" => t.seed = num(n, k, v)?,
                        "grad_clip" => t.grad_clip = if v == "off" { None } else { Some(num(n, k, v)?) },
                        "val_fraction" => t.val_fraction = num(n, k, v)?,
                        _ => return Err(err(n, format!("unknown key `{k}` in [train]"))),
                    }
                }
                "data" => {
                    let d = &mut c.data;
                    match k {
                        "clean_dir" => d.clean_dir = opt_path(v),
                        "noise_dir" => d.noise_dir = opt_path(v),
                        "rooms" => d.rooms = num(n, k, v)?,
                        "rirs_per_room" => d.rirs_per_room = num(n, k, v)?,
                        "seconds" => d.seconds = num(n, k, v)?,
                        "snr_min_db" => d.snr_min_db = num(n, k, v)?,
                        "snr_max_db" => d.snr_max_db = num(n, k, v)?,
                        "seed" => d.seed = num(n, k, v)?,
                        _ => return Err(err(n, format!("unknown key `{k}` in [data]"))),
                    }
                }
                "eval" => {
                    let e = &mut c.eval;
                    match k {
                        "manifest" => e.manifest = opt_path(v),
                        "repeats" => e.repeats = num(n, k, v)?,
                        "rtf_seconds" => e.rtf_seconds = num(n, k, v)?,
                        _ => return Err(err(n, format!("unknown key `{k}` in [eval]"))),
                    }
                }
                _ => return Err(err(n, "key outside of a section")),
            }
        }
        c.model = ModelConfig::from_text(&model_text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.weights.validate()?;
        let bad = |m: &str| Err(ToolkitError::Config(m.to_string()));
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.train.batch == 0 {
            return bad("batch must be at least 1");
        }
        if !(0.0..1.0).contains(&self.train.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        if self.train.grad_clip.is_some_and(|g| g <= 0.0 || g.is_nan()) {
            return bad("grad_clip must be positive");
        }
        if self.data.seconds < 1.0 {
            return bad("examples must be at least 1 s long");
        }
        if self.data.snr_min_db > self.data.snr_max_db {
            return bad("snr_min_db exceeds snr_max_db");
        }
        if self.eval.repeats == 0 || self.eval.rtf_seconds <= 0.0 {
            return bad("eval repeats and rtf_seconds must be positive");
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("[model]\n");
        s.push_str(&self.model.to_text());
        let t = &self.train;
        let _ = write!(
            s,
            "[train]\nalpha={}\nbeta={}\nsisdr_eps={}\nsisdr_cap_db={}\nlr={}\nbatch={}\nepochs={}\nseed={}\ngrad_clip={}\nval_fraction={}\n",
            t.weights.alpha,
            t.weights.beta,
            t.weights.sisdr_eps,
            t.weights.sisdr_cap_db,
            t.lr,
            t.batch,
            t.epochs,
            t.seed,
            t.grad_clip.map_or("off".to_string(), |g| g.to_string()),
            t.val_fraction,
        );
        let d = &self.data;
        let _ = write!(
            s,
            "[data]\nclean_dir={}\nnoise_dir={}\nrooms={}\nrirs_per_room={}\nseconds={}\nsnr_min_db={}\nsnr_max_db={}\nseed={}\n",
            path_text(&d.clean_dir),
            path_text(&d.noise_dir),
            d.rooms,
            d.rirs_per_room,
            d.seconds,
            d.snr_min_db,
            d.snr_max_db,
            d.seed,
        );
        let e = &self.eval;
        let _ = write!(
            s,
            "[eval]\nmanifest={}\nrepeats={}\nrtf_seconds={}\n",
            path_text(&e.manifest),
            e.repeats,
            e.rtf_seconds
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.train.grad_clip = Some(5.0);
        c.data.clean_dir = Some("speech".into());
        c.model.enable_fca = false;
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_text("[train]\nlearning_rate=1").is_err());
        assert!(RunConfig::from_text("[model]\nchanels=1,2,3,4").is_err());
        assert!(RunConfig::from_text("[optim]\n").is_err());
        assert!(RunConfig::from_text("lr=1").is_err());
    }
}
