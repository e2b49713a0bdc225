//! SI-SDR evaluation over a manifest and real-time-factor measurement.

use std::fmt::Write;
use std::time::Instant;

use lmfca_core::dsp::{reference_channel, Waveform, SAMPLE_RATE};
use lmfca_core::loss::{si_sdr, LossWeights};
use lmfca_core::net::{count_macs_flops, ModelConfig};
use lmfca_core::pipeline::{enhance, MaskSource};
use lmfca_core::room::{noise_like, speech_like};
use lmfca_core::ParameterStore;
use rayon::prelude::*;

use crate::error::{Result, ToolkitError};
use crate::manifest::{Manifest, ManifestRecord};

/// Spectrogram size used for the complexity figures (3 s clip, 510-point FFT).
pub const STATS_BINS: usize = 256;
pub const STATS_FRAMES: usize = 192;

/// Phases timed by [`measure_rtf`] when it wraps [`enhance`].
pub const RTF_PHASES: &str = "segmentation, STFT, forward pass, mask application, iSTFT; no file I/O or model load";

/// What produces the enhanced signal.
pub enum Enhancer<'a> {
    Network {
        cfg: &'a ModelConfig,
        params: &'a ParameterStore<f32>,
    },
    /// Unit mask: output is the reference microphone.
    Identity,
    /// cIRM from the known direct-path reference.
    Oracle,
}

impl Enhancer<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Enhancer::Network { .. } => "network",
            Enhancer::Identity => "identity",
            Enhancer::Oracle => "oracle",
        }
    }

    /// Enhanced mono signal for `mixture`; `direct_ref` is consulted only by
    /// the oracle.
    pub fn run(&self, mixture: &Waveform<f32>, direct_ref: &[f32]) -> Result<Vec<f32>> {
        let out = match self {
            Enhancer::Network { cfg, params } => enhance(mixture, &MaskSource::Network { store: params, cfg })?,
            Enhancer::Identity => enhance(&mixture.cast::<f64>(), &MaskSource::Unit)?.cast::<f32>(),
            Enhancer::Oracle => {
                let d: Vec<f64> = direct_ref.iter().map(|&v| v as f64).collect();
                enhance(&mixture.cast::<f64>(), &MaskSource::Oracle { direct_ref: &d })?.cast::<f32>()
            }
        };
        Ok(out.channels.into_iter().next().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub id: String,
    pub si_sdr_noisy: f64,
    pub si_sdr_enhanced: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStats {
    pub params: usize,
    pub gmacs: f64,
    pub gflops: f64,
}

impl ModelStats {
    pub fn of(cfg: &ModelConfig) -> Result<Self> {
        let p = count_macs_flops(cfg, STATS_BINS, STATS_FRAMES)?;
        Ok(Self {
            params: p.param_count(),
            gmacs: p.gmacs(),
            gflops: p.gflops(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub label: String,
    pub rows: Vec<EvalRow>,
    pub mean_noisy: f64,
    pub mean_enhanced: f64,
    pub mean_delta: f64,
    pub stats: Option<ModelStats>,
    pub rtf: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl EvalReport {
    pub fn new(label: &str, rows: Vec<EvalRow>) -> Self {
        Self {
            label: label.to_string(),
            mean_noisy: mean(rows.iter().map(|r| r.si_sdr_noisy)),
            mean_enhanced: mean(rows.iter().map(|r| r.si_sdr_enhanced)),
            mean_delta: mean(rows.iter().map(|r| r.delta)),
            rows,
            stats: None,
            rtf: None,
        }
    }

    fn header(&self) -> String {
        let mut s = format!("# model: {}\n", self.label);
        if let Some(st) = self.stats {
            let _ = writeln!(
                s,
                "# params: {}\n# gmacs: {:.4}\n# gflops: {:.4}",
                st.params, st.gmacs, st.gflops
            );
        }
        if let Some(r) = self.rtf {
            let _ = writeln!(s, "# rtf: {r:.4} ({RTF_PHASES})");
        }
        s
    }

    /// Tab-separated rows under `#` comment lines.
    pub fn to_tsv(&self) -> String {
        let mut s = self.header();
        s.push_str("id\tsi_sdr_noisy\tsi_sdr_enhanced\tdelta\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", r.id, r.si_sdr_noisy, r.si_sdr_enhanced, r.delta);
        }
        let _ = writeln!(
            s,
            "mean\t{}\t{}\t{}",
            self.mean_noisy, self.mean_enhanced, self.mean_delta
        );
        s
    }

    pub fn to_table(&self) -> String {
        let w = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(0).max(4);
        let mut s = self.header();
        let _ = writeln!(s, "{:<w$}  {:>9}  {:>9}  {:>8}", "id", "noisy dB", "enh. dB", "delta");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<w$}  {:>9.2}  {:>9.2}  {:>+8.2}",
                r.id, r.si_sdr_noisy, r.si_sdr_enhanced, r.delta
            );
        }
        let _ = writeln!(
            s,
            "{:<w$}  {:>9.2}  {:>9.2}  {:>+8.2}",
            "mean", self.mean_noisy, self.mean_enhanced, self.mean_delta
        );
        s
    }
}

fn score(manifest: &Manifest, r: &ManifestRecord, enhancer: &Enhancer<'_>) -> Result<EvalRow> {
    let fail = |e: ToolkitError| ToolkitError::Format(format!("{}: {e}", r.id));
    let ex = manifest.load_example(r).map_err(fail)?;
    let w = LossWeights::default();
    let noisy_ref = ex.mixture.channel(reference_channel(ex.mixture.num_channels()));
    let noisy = si_sdr(noisy_ref, &ex.direct_ref, w.sisdr_eps, w.sisdr_cap_db).map_err(|e| fail(e.into()))?;
    let out = enhancer.run(&ex.mixture, &ex.direct_ref).map_err(fail)?;
    let enhanced = si_sdr(&out, &ex.direct_ref, w.sisdr_eps, w.sisdr_cap_db).map_err(|e| fail(e.into()))?;
    Ok(EvalRow {
        id: r.id.clone(),
        si_sdr_noisy: noisy,
        si_sdr_enhanced: enhanced,
        delta: enhanced - noisy,
    })
}

/// Scores every record. Utterances run in parallel; rows keep manifest
/// order. The first failing utterance aborts the run.
pub fn evaluate(manifest: &Manifest, enhancer: &Enhancer<'_>) -> Result<EvalReport> {
    if manifest.records.is_empty() {
        return Err(ToolkitError::Config("manifest is empty".into()));
    }
    let rows = manifest
        .records
        .par_iter()
        .map(|r| score(manifest, r, enhancer))
        .collect::<Result<Vec<_>>>()?;
    let mut report = EvalReport::new(enhancer.label(), rows);
    if let Enhancer::Network { cfg, .. } = enhancer {
        report.stats = Some(ModelStats::of(cfg)?);
    }
    Ok(report)
}

/// Median over `repeats` runs of processing time divided by the input
/// duration. Runs sequentially on the calling thread.
pub fn measure_rtf(
    input: &Waveform<f32>,
    repeats: usize,
    mut process: impl FnMut(&Waveform<f32>) -> Result<()>,
) -> Result<f64> {
    if repeats == 0 || input.is_empty() {
        return Err(ToolkitError::Config("RTF needs a non-empty input and at least one repeat".into()));
    }
    let dur = input.duration_s();
    let mut rtfs = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        process(input)?;
        rtfs.push(t.elapsed().as_secs_f64() / dur);
    }
    rtfs.sort_by(f64::total_cmp);
    let n = rtfs.len();
    Ok(if n % 2 == 1 {
        rtfs[n / 2]
    } else {
        0.5 * (rtfs[n / 2 - 1] + rtfs[n / 2])
    })
}

/// Speech-like source plus independent noise on each of `mics` channels.
pub fn bench_input(seconds: f64, mics: usize, seed: u64) -> Waveform<f32> {
    let s = speech_like(seconds, seed);
    let channels = (0..mics)
        .map(|m| {
            let v = noise_like(seconds, seed.wrapping_add(1 + m as u64));
            s.iter().zip(&v).map(|(a, b)| (a + 0.3 * b) as f32).collect()
        })
        .collect();
    Waveform::new(channels, SAMPLE_RATE)
}

/// RTF of the full enhancement path for one model.
pub fn bench_model(cfg: &ModelConfig, params: &ParameterStore<f32>, seconds: f64, repeats: usize) -> Result<f64> {
    let input = bench_input(seconds, cfg.mics, 0);
    measure_rtf(&input, repeats, |x| {
        enhance(x, &MaskSource::Network { store: params, cfg })?;
        Ok(())
    })
}
