//! Tab-separated example manifest.
//!
//! Field order: id, mixture wav, clean wav, direct wav, length, width,
//! height, t60, source x/y/z, array centre x/y/z, snr_db, seed. WAV paths are
//! relative to the manifest's directory.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use lmfca_core::dsp::Waveform;
use lmfca_core::room::{array_positions, Point, Room, RoomScene};

use crate::error::{Result, ToolkitError};
use crate::wav::read_wav;

pub const HEADER: &str =
    "#id\tmixture\tclean\tdirect\tlength\twidth\theight\tt60\tsrc_x\tsrc_y\tsrc_z\tarr_x\tarr_y\tarr_z\tsnr_db\tseed";
const FIELDS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub mixture: PathBuf,
    pub clean: PathBuf,
    pub direct: PathBuf,
    pub dims: Point,
    pub t60: f64,
    pub source: Point,
    pub array_center: Point,
    pub snr_db: f64,
    pub seed: u64,
}

impl ManifestRecord {
    /// Rebuilds the scene the example was rendered from.
    pub fn scene(&self) -> RoomScene {
        RoomScene {
            room: Room {
                dims: self.dims,
                t60: self.t60,
            },
            source: self.source,
            array_center: self.array_center,
            mics: array_positions(self.array_center),
        }
    }
}

/// Manifest records plus the directory their paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

/// An example's audio as loaded from disk.
#[derive(Debug, Clone)]
pub struct LoadedExample {
    pub mixture: Waveform<f32>,
    pub direct_ref: Vec<f32>,
}

fn point(p: &Point) -> String {
    format!("{}\t{}\t{}", p[0], p[1], p[2])
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.id,
                r.mixture.display(),
                r.clean.display(),
                r.direct.display(),
                point(&r.dims),
                r.t60,
                point(&r.source),
                point(&r.array_center),
                r.snr_db,
                r.seed
            );
        }
        s
    }

    pub fn parse(text: &str, root: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| ToolkitError::Manifest { line: i + 1, msg };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != FIELDS {
                return Err(bad(format!("expected {FIELDS} fields, found {}", f.len())));
            }
            let x = |j: usize| -> Result<f64> {
                f[j].parse()
                    .map_err(|_| bad(format!("field {} is not a number: `{}`", j + 1, f[j])))
            };
            records.push(ManifestRecord {
                id: f[0].to_string(),
                mixture: f[1].into(),
                clean: f[2].into(),
                direct: f[3].into(),
                dims: [x(4)?, x(5)?, x(6)?],
                t60: x(7)?,
                source: [x(8)?, x(9)?, x(10)?],
                array_center: [x(11)?, x(12)?, x(13)?],
                snr_db: x(14)?,
                seed: f[15].parse().map_err(|_| bad(format!("bad seed `{}`", f[15])))?,
            });
        }
        Ok(Self {
            root: root.to_path_buf(),
            records,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn path(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    /// Reads the mixture and direct-path reference of `r`.
    pub fn load_example(&self, r: &ManifestRecord) -> Result<LoadedExample> {
        let mixture = read_wav(&self.path(&r.mixture))?;
        let direct = read_wav(&self.path(&r.direct))?;
        if direct.num_channels() != 1 || direct.len() != mixture.len() {
            return Err(ToolkitError::Format(format!(
                "{}: direct reference must be mono and as long as the mixture",
                r.id
            )));
        }
        Ok(LoadedExample {
            mixture,
            direct_ref: direct.channels.into_iter().next().unwrap_or_default(),
        })
    }

    /// Splits off the last `fraction` of records (at least one if the
    /// fraction is positive and there are two or more records).
    pub fn split_tail(&self, fraction: f64) -> (Manifest, Manifest) {
        let n = self.records.len();
        let mut k = (n as f64 * fraction).round() as usize;
        if fraction > 0.0 && n >= 2 {
            k = k.clamp(1, n - 1);
        }
        let k = k.min(n);
        let part = |rs: &[ManifestRecord]| Manifest {
            root: self.root.clone(),
            records: rs.to_vec(),
        };
        (part(&self.records[..n - k]), part(&self.records[n - k..]))
    }
}
