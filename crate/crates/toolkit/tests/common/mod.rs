#![allow(dead_code)]

use std::path::Path;

use lmfca_toolkit::config::DataConfig;
use lmfca_toolkit::manifest::Manifest;
use lmfca_toolkit::synth::synth_dataset;

pub fn small_data(rooms: usize, rirs: usize, seconds: f64, seed: u64) -> DataConfig {
    DataConfig {
        rooms,
        rirs_per_room: rirs,
        seconds,
        seed,
        ..DataConfig::default()
    }
}

pub fn synth_small(out: &Path, rooms: usize, rirs: usize) -> Manifest {
    synth_dataset(&small_data(rooms, rirs, 2.0, 11), out).unwrap()
}
