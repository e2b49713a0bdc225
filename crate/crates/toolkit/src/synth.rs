//! Dataset synthesis: random rooms, reverberant multi-channel mixtures and
//! the matching reference signals, written as WAV files plus a manifest.

use std::path::{Path, PathBuf};

use lmfca_core::dsp::Waveform;
use lmfca_core::room::{absorption_from_t60, noise_like, render_mixture, speech_like, Room, RoomScene, N_MICS};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::DataConfig;
use crate::error::{Result, ToolkitError};
use crate::manifest::{Manifest, ManifestRecord};
use crate::wav::{read_wav, write_wav, WavFormat};

pub const MANIFEST_FILE: &str = "manifest.tsv";
const ROOM_TRIES: usize = 100;

/// Mixes a master seed with a stream tag and an index (SplitMix64 finaliser).
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Where clean speech or noise comes from.
#[derive(Debug, Clone)]
enum Source {
    Generated,
    Files(Vec<PathBuf>),
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| ToolkitError::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    if files.is_empty() {
        return Err(ToolkitError::Config(format!("{} contains no WAV files", dir.display())));
    }
    files.sort();
    Ok(files)
}

fn source(dir: &Option<PathBuf>) -> Result<Source> {
    Ok(match dir {
        Some(d) => Source::Files(wav_files(d)?),
        None => Source::Generated,
    })
}

/// Random excerpt of at most `n` samples.
fn excerpt(x: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if x.len() <= n {
        return x.to_vec();
    }
    let start = rng.random_range(0..=x.len() - n);
    x[start..start + n].to_vec()
}

fn clean_signal(src: &Source, seconds: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    match src {
        Source::Generated => Ok(speech_like(seconds, rng.random())),
        Source::Files(files) => {
            let path = &files[rng.random_range(0..files.len())];
            let w = read_wav(path)?.cast::<f64>();
            let n = (seconds * w.sample_rate as f64) as usize;
            Ok(excerpt(w.channel(0), n, rng))
        }
    }
}

fn noise_signal(src: &Source, seconds: f64, rng: &mut ChaCha8Rng) -> Result<Waveform<f64>> {
    match src {
        Source::Generated => Ok(Waveform::mono(noise_like(seconds, rng.random()))),
        Source::Files(files) => {
            let path = &files[rng.random_range(0..files.len())];
            let w = read_wav(path)?.cast::<f64>();
            if w.num_channels() != 1 && w.num_channels() != N_MICS {
                return Err(ToolkitError::Format(format!(
                    "{}: noise must be mono or {N_MICS}-channel, found {} channels",
                    path.display(),
                    w.num_channels()
                )));
            }
            Ok(w)
        }
    }
}

/// Samples a room whose requested T60 is reachable with absorption ≤ 0.99.
fn sample_room(seed: u64) -> Result<Room> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ROOM_TRIES {
        let room = Room::sample(&mut rng);
        if absorption_from_t60(&room).is_ok() {
            return Ok(room);
        }
    }
    Err(ToolkitError::Core(lmfca_core::Error::Generation(
        "no room with a reachable T60".into(),
    )))
}

fn to_f32(x: &[f64]) -> Vec<f32> {
    x.iter().map(|&v| v as f32).collect()
}

struct Job {
    room_index: usize,
    slot: usize,
    room: Room,
}

fn render_one(job: &Job, cfg: &DataConfig, clean: &Source, noise: &Source, out: &Path) -> Result<ManifestRecord> {
    let id = format!("r{:04}_s{:02}", job.room_index, job.slot);
    let seed = derive_seed(cfg.seed, 2, (job.room_index * cfg.rirs_per_room + job.slot) as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = RoomScene::sample_in(job.room.clone(), &mut rng)?;
    let snr_db = if cfg.snr_max_db > cfg.snr_min_db {
        rng.random_range(cfg.snr_min_db..=cfg.snr_max_db)
    } else {
        cfg.snr_min_db
    };
    let s = clean_signal(clean, cfg.seconds, &mut rng)?;
    let v = noise_signal(noise, cfg.seconds, &mut rng)?;
    let ex = render_mixture(&scene, &s, &v, snr_db, rng.random())?;

    let rec = ManifestRecord {
        mixture: format!("mix/{id}.wav").into(),
        clean: format!("clean/{id}.wav").into(),
        direct: format!("direct/{id}.wav").into(),
        id,
        dims: scene.room.dims,
        t60: scene.room.t60,
        source: scene.source,
        array_center: scene.array_center,
        snr_db,
        seed,
    };
    write_wav(&out.join(&rec.mixture), &ex.mixture.cast::<f32>(), WavFormat::Float32)?;
    write_wav(&out.join(&rec.clean), &Waveform::mono(to_f32(&ex.clean_ref)), WavFormat::Float32)?;
    write_wav(&out.join(&rec.direct), &Waveform::mono(to_f32(&ex.direct_ref)), WavFormat::Float32)?;
    Ok(rec)
}

/// Renders `rooms × rirs_per_room` examples into `out` and writes
/// `out/manifest.tsv`. Sources come from `clean_dir`/`noise_dir`, or are
/// generated when a directory is not set. Output depends only on `cfg`.
pub fn synth_dataset(cfg: &DataConfig, out: &Path) -> Result<Manifest> {
    if cfg.rooms == 0 || cfg.rirs_per_room == 0 {
        return Err(ToolkitError::Config("rooms and rirs_per_room must be positive".into()));
    }
    if cfg.seconds < 1.0 {
        return Err(ToolkitError::Config("examples must be at least 1 s long".into()));
    }
    let clean = source(&cfg.clean_dir)?;
    let noise = source(&cfg.noise_dir)?;
    std::fs::create_dir_all(out)?;

    let mut jobs = Vec::with_capacity(cfg.rooms * cfg.rirs_per_room);
    for r in 0..cfg.rooms {
        let room = sample_room(derive_seed(cfg.seed, 1, r as u64))?;
        for slot in 0..cfg.rirs_per_room {
            jobs.push(Job {
                room_index: r,
                slot,
                room: room.clone(),
            });
        }
    }
    let records = jobs
        .par_iter()
        .map(|j| render_one(j, cfg, &clean, &noise, out))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        root: out.to_path_buf(),
        records,
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    log::info!(
        "synthesized {} examples from {} rooms into {}",
        manifest.records.len(),
        cfg.rooms,
        out.display()
    );
    Ok(manifest)
}
