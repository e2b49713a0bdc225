mod common;

use lmfca_core::dsp::Waveform;
use lmfca_core::room::snr_db;
use lmfca_toolkit::config::{DataConfig, RunConfig};
use lmfca_toolkit::manifest::Manifest;
use lmfca_toolkit::synth::{synth_dataset, MANIFEST_FILE};
use lmfca_toolkit::wav::{read_wav, write_wav, WavFormat};
use lmfca_toolkit::ToolkitError;

use common::{small_data, synth_small};

#[test]
fn wav_round_trip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let ch: Vec<Vec<f32>> = (0..3)
        .map(|c| (0..1600).map(|i| ((i * (c + 1)) as f32 * 0.01).sin() * 0.5).collect())
        .collect();
    let w = Waveform::new(ch, 16000);
    let f = dir.path().join("sub/f.wav");
    write_wav(&f, &w, WavFormat::Float32).unwrap();
    assert_eq!(read_wav(&f).unwrap(), w);

    let p = dir.path().join("p.wav");
    write_wav(&p, &w, WavFormat::Pcm16).unwrap();
    let back = read_wav(&p).unwrap();
    assert_eq!(back.num_channels(), 3);
    for c in 0..3 {
        for (a, b) in back.channel(c).iter().zip(w.channel(c)) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}

#[test]
fn wrong_sample_rate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.wav");
    let spec = hound::WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut wr = hound::WavWriter::create(&p, spec).unwrap();
    for _ in 0..800 {
        wr.write_sample(0i16).unwrap();
    }
    wr.finalize().unwrap();
    assert!(matches!(read_wav(&p), Err(ToolkitError::SampleRate { rate: 8000, .. })));
}

#[test]
fn synth_writes_every_example_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = synth_small(a.path(), 2, 3);
    assert_eq!(m.records.len(), 6);
    for r in &m.records {
        for rel in [&r.mixture, &r.clean, &r.direct] {
            assert!(a.path().join(rel).exists());
        }
        r.scene().validate().unwrap();
        assert!((0.0..=12.0).contains(&r.snr_db));
    }
    // Examples of one room share its geometry.
    assert_eq!(m.records[0].dims, m.records[2].dims);
    assert_ne!(m.records[0].dims, m.records[3].dims);
    synth_small(b.path(), 2, 3);
    let ta = std::fs::read(a.path().join(MANIFEST_FILE)).unwrap();
    let tb = std::fs::read(b.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(ta, tb);
    let r = &m.records[4];
    assert_eq!(std::fs::read(a.path().join(&r.mixture)).unwrap(), std::fs::read(b.path().join(&r.mixture)).unwrap());
    assert_eq!(Manifest::load(&a.path().join(MANIFEST_FILE)).unwrap(), m);
}

#[test]
fn stored_snr_matches_the_written_audio() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_small(dir.path(), 1, 4);
    for r in &m.records {
        let mix = read_wav(&dir.path().join(&r.mixture)).unwrap();
        let clean = read_wav(&dir.path().join(&r.clean)).unwrap();
        let s: Vec<f64> = clean.channel(0).iter().map(|&v| v as f64).collect();
        let v: Vec<f64> = mix.channel(4).iter().zip(&s).map(|(&a, b)| a as f64 - b).collect();
        assert!((snr_db(&s, &v) - r.snr_db).abs() < 0.01, "{}", r.id);
    }
}

#[test]
fn empty_source_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let cfg = DataConfig { clean_dir: Some(empty), ..small_data(1, 1, 2.0, 0) };
    assert!(matches!(synth_dataset(&cfg, &dir.path().join("out")), Err(ToolkitError::Config(_))));
    assert!(synth_dataset(&small_data(0, 1, 2.0, 0), dir.path()).is_err());
    assert!(synth_dataset(&small_data(1, 1, 0.5, 0), dir.path()).is_err());
}

#[test]
fn default_dataset_size() {
    let d = DataConfig::default();
    assert_eq!(d.rooms * d.rirs_per_room, 4000);
}

#[test]
fn run_config_rejects_unknown_keys() {
    assert!(RunConfig::from_text("[train]\nbogus = 1\n").is_err());
    assert!(RunConfig::from_text("[nowhere]\n").is_err());
    let rc = RunConfig::from_text("[data]\nrooms = 3\n[model]\nmics = 1\n").unwrap();
    assert_eq!(rc.data.rooms, 3);
    assert_eq!(rc.model.mics, 1);
    assert_eq!(RunConfig::from_text(&rc.to_text()).unwrap(), rc);
}
