//! `lmfca`: dataset synthesis, training, enhancement, evaluation, MAC
//! counting and RTF benchmarking from one binary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lmfca_core::net::{count_macs_flops, init_params, ModelConfig};
use lmfca_core::pipeline::{enhance, MaskSource};
use lmfca_toolkit::checkpoint::load_checkpoint;
use lmfca_toolkit::config::RunConfig;
use lmfca_toolkit::eval::{bench_model, evaluate, Enhancer, ModelStats};
use lmfca_toolkit::manifest::Manifest;
use lmfca_toolkit::synth::{synth_dataset, MANIFEST_FILE};
use lmfca_toolkit::trainer::{trainer_from_manifest, BEST_CHECKPOINT};
use lmfca_toolkit::wav::{read_wav, write_wav, WavFormat};

const LOG_ENV: &str = "LMFCA_LOG";

#[derive(Parser)]
#[command(name = "lmfca", version, about = "Multi-channel speech enhancement with LMFCA-Net")]
struct Cli {
    /// Key-value run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (1 gives fully sequential, reproducible runs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run synth, train, eval, enhance, count and bench on generated data.
    #[arg(long)]
    self_test: bool,
    /// Working directory for --self-test (defaults to a fresh temp dir).
    #[arg(long, requires = "self_test")]
    self_test_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render reverberant multi-channel mixtures and write a manifest.
    Synth(SynthArgs),
    /// Train a model on a manifest.
    Train(TrainArgs),
    /// Enhance a multi-channel WAV into a mono WAV.
    Enhance(EnhanceArgs),
    /// Score SI-SDR over a manifest.
    Eval(EvalArgs),
    /// Print the per-layer MAC/FLOP table.
    Count(CountArgs),
    /// Measure the real-time factor.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    NoFca,
    PconvForSandglass,
    FtFcaEverywhere,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Ablation variant applied on top of the configured model.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Single-microphone model (reference channel only).
    #[arg(long)]
    mono: bool,
    /// Encoder widths, e.g. 8,16,24,32.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    channels: Option<Vec<usize>>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rooms: Option<usize>,
    #[arg(long)]
    rirs_per_room: Option<usize>,
    /// Length of each example in seconds.
    #[arg(long)]
    seconds: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clean_dir: Option<PathBuf>,
    #[arg(long)]
    noise_dir: Option<PathBuf>,
    /// Use generated speech-like bursts and noise instead of recordings.
    #[arg(long)]
    self_test: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Global gradient-norm clip (off by default).
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Stop each epoch after this many batches.
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    /// Continue from a checkpoint with optimizer state.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    input: PathBuf,
    output: PathBuf,
    /// Write 16-bit PCM instead of 32-bit float.
    #[arg(long)]
    pcm16: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present_any = ["oracle", "identity"])]
    checkpoint: Option<PathBuf>,
    /// Use the ideal cIRM computed from the reference instead of a model.
    #[arg(long, conflicts_with_all = ["checkpoint", "identity"])]
    oracle: bool,
    /// Pass the reference microphone through unchanged.
    #[arg(long, conflicts_with = "checkpoint")]
    identity: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Write the report as tab-separated text.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CountArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 256)]
    bins: usize,
    #[arg(long, default_value_t = 192)]
    frames: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Model to time; a freshly initialised model is used when absent.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seconds: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
}

fn apply_model_args(cfg: &mut ModelConfig, a: &ModelArgs) -> Result<()> {
    match a.variant {
        Some(VariantArg::Full) | None => {}
        Some(VariantArg::NoFca) => cfg.enable_fca = false,
        Some(VariantArg::PconvForSandglass) => cfg.unit = lmfca_core::net::UnitKind::Pointwise,
        Some(VariantArg::FtFcaEverywhere) => cfg.ft_fca_everywhere = true,
    }
    if a.mono {
        cfg.mics = 1;
    }
    if let Some(c) = &a.channels {
        cfg.channels = [c[0], c[1], c[2], c[3]];
    }
    cfg.validate()?;
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_text(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(RunConfig::default()),
    }
}

fn log_resolved(cfg: &RunConfig) {
    log::info!("resolved configuration:\n{}", cfg.to_text());
}

fn cmd_synth(mut rc: RunConfig, a: &SynthArgs) -> Result<Manifest> {
    let d = &mut rc.data;
    d.rooms = a.rooms.unwrap_or(d.rooms);
    d.rirs_per_room = a.rirs_per_room.unwrap_or(d.rirs_per_room);
    d.seconds = a.seconds.unwrap_or(d.seconds);
    d.seed = a.seed.unwrap_or(d.seed);
    if a.clean_dir.is_some() {
        d.clean_dir = a.clean_dir.clone();
    }
    if a.noise_dir.is_some() {
        d.noise_dir = a.noise_dir.clone();
    }
    if a.self_test {
        d.clean_dir = None;
        d.noise_dir = None;
    } else if d.clean_dir.is_none() || d.noise_dir.is_none() {
        bail!("synth needs --clean-dir and --noise-dir (or --self-test for generated sources)");
    }
    rc.validate()?;
    log_resolved(&rc);
    let m = synth_dataset(&rc.data, &a.out)?;
    std::fs::write(a.out.join("config.txt"), rc.to_text())?;
    println!(
        "{} examples ({} rooms x {} per room) -> {}",
        m.records.len(),
        rc.data.rooms,
        rc.data.rirs_per_room,
        a.out.join(MANIFEST_FILE).display()
    );
    Ok(m)
}

fn cmd_train(mut rc: RunConfig, a: &TrainArgs) -> Result<()> {
    apply_model_args(&mut rc.model, &a.model)?;
    let t = &mut rc.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.seed = a.seed.unwrap_or(t.seed);
    t.lr = a.lr.unwrap_or(t.lr);
    t.val_fraction = a.val_fraction.unwrap_or(t.val_fraction);
    if a.grad_clip.is_some() {
        t.grad_clip = a.grad_clip;
    }
    rc.validate()?;
    log_resolved(&rc);
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("config.txt"), rc.to_text())?;
    let manifest = Manifest::load(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let mut trainer = trainer_from_manifest(&manifest, rc.model.clone(), rc.train.clone(), a.resume.as_ref())?;
    let metrics = trainer.fit(&a.out, a.steps_per_epoch)?;
    match metrics.last() {
        Some(m) => println!(
            "trained to epoch {}: train loss {:.5}, val loss {:.5}, lr {}",
            m.epoch, m.train_loss, m.val_loss, m.lr
        ),
        None => println!("nothing to do: checkpoint already at epoch {}", trainer.state.epoch),
    }
    Ok(())
}

fn cmd_enhance(a: &EnhanceArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let input = read_wav(&a.input)?;
    let (m, want) = (input.num_channels(), model.cfg.mics);
    if m != want && !(want == 1 && m > 1) {
        bail!("{} has {m} channels, model expects {want}", a.input.display());
    }
    let out = enhance(
        &input,
        &MaskSource::Network {
            store: &model.params,
            cfg: &model.cfg,
        },
    )?;
    let fmt = if a.pcm16 { WavFormat::Pcm16 } else { WavFormat::Float32 };
    write_wav(&a.output, &out, fmt)?;
    println!("{} -> {} ({} samples)", a.input.display(), a.output.display(), out.len());
    Ok(())
}

fn cmd_eval(rc: RunConfig, a: &EvalArgs) -> Result<()> {
    let path = a
        .manifest
        .clone()
        .or(rc.eval.manifest.clone())
        .context("eval needs --manifest or [eval] manifest")?;
    let manifest = Manifest::load(&path).with_context(|| format!("reading {}", path.display()))?;
    let loaded = a.checkpoint.as_ref().map(|p| load_checkpoint(p)).transpose()?;
    let enhancer = match &loaded {
        Some(m) => Enhancer::Network {
            cfg: &m.cfg,
            params: &m.params,
        },
        None if a.oracle => Enhancer::Oracle,
        None => Enhancer::Identity,
    };
    let report = evaluate(&manifest, &enhancer)?;
    print!("{}", report.to_table());
    if let Some(out) = &a.out {
        std::fs::write(out, report.to_tsv())?;
    }
    Ok(())
}

fn cmd_count(mut rc: RunConfig, a: &CountArgs) -> Result<()> {
    apply_model_args(&mut rc.model, &a.model)?;
    log_resolved(&rc);
    let p = count_macs_flops(&rc.model, a.bins, a.frames)?;
    print!("{}", p.to_table());
    println!(
        "total\tparams {}\tGMACs {:.4}\tGFLOPs {:.4}",
        p.param_count(),
        p.gmacs(),
        p.gflops()
    );
    Ok(())
}

fn cmd_bench(mut rc: RunConfig, a: &BenchArgs) -> Result<()> {
    let seconds = a.seconds.unwrap_or(rc.eval.rtf_seconds);
    let repeats = a.repeats.unwrap_or(rc.eval.repeats);
    let (cfg, params) = match &a.checkpoint {
        Some(p) => {
            let m = load_checkpoint(p)?;
            (m.cfg, m.params)
        }
        None => {
            apply_model_args(&mut rc.model, &a.model)?;
            let p = init_params::<f32>(&rc.model, 0)?;
            (rc.model.clone(), p)
        }
    };
    // RTF is always measured on a single thread.
    let rtf = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()?
        .install(|| bench_model(&cfg, &params, seconds, repeats))?;
    let st = ModelStats::of(&cfg)?;
    println!(
        "rtf {rtf:.4} (median of {repeats} x {seconds} s, single thread)\tparams {}\tGMACs {:.4}\tGFLOPs {:.4}",
        st.params, st.gmacs, st.gflops
    );
    Ok(())
}

fn self_test(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let data = dir.join("data");
    let run = dir.join("run");
    let manifest = cmd_synth(
        RunConfig::default(),
        &SynthArgs {
            out: data.clone(),
            rooms: Some(2),
            rirs_per_room: Some(3),
            seconds: Some(3.0),
            seed: Some(1),
            clean_dir: None,
            noise_dir: None,
            self_test: true,
        },
    )?;
    let tiny = ModelArgs {
        variant: None,
        mono: false,
        channels: Some(vec![8, 16, 24, 32]),
    };
    cmd_train(
        RunConfig::default(),
        &TrainArgs {
            manifest: data.join(MANIFEST_FILE),
            out: run.clone(),
            model: tiny,
            epochs: Some(1),
            seed: Some(0),
            lr: Some(1e-3),
            val_fraction: Some(0.2),
            grad_clip: None,
            steps_per_epoch: Some(2),
            resume: None,
        },
    )?;
    let ckpt = run.join(BEST_CHECKPOINT);
    cmd_eval(
        RunConfig::default(),
        &EvalArgs {
            checkpoint: Some(ckpt.clone()),
            oracle: false,
            identity: false,
            manifest: Some(data.join(MANIFEST_FILE)),
            out: Some(run.join("eval.tsv")),
        },
    )?;
    let first = manifest.path(&manifest.records[0].mixture);
    cmd_enhance(&EnhanceArgs {
        checkpoint: ckpt.clone(),
        input: first,
        output: run.join("enhanced.wav"),
        pcm16: false,
    })?;
    cmd_bench(
        RunConfig::default(),
        &BenchArgs {
            checkpoint: Some(ckpt),
            model: ModelArgs::default(),
            seconds: Some(3.0),
            repeats: Some(1),
        },
    )?;
    println!("self-test passed ({})", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let rc = load_config(&cli.config)?;
    if cli.self_test {
        let dir = cli
            .self_test_dir
            .clone()
            .unwrap_or_else(|| std::env::temp_dir().join(format!("lmfca-self-test-{}", std::process::id())));
        return self_test(&dir);
    }
    match &cli.cmd {
        Some(Cmd::Synth(a)) => cmd_synth(rc, a).map(|_| ()),
        Some(Cmd::Train(a)) => cmd_train(rc, a),
        Some(Cmd::Enhance(a)) => cmd_enhance(a),
        Some(Cmd::Eval(a)) => cmd_eval(rc, a),
        Some(Cmd::Count(a)) => cmd_count(rc, a),
        Some(Cmd::Bench(a)) => cmd_bench(rc, a),
        None => bail!("no command given (see --help)"),
    }
}
