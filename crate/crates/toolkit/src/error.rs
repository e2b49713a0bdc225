use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ToolkitError {
    #[error(transparent)]
    Core(#[from] lmfca_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {msg}")]
    Wav { path: PathBuf, msg: String },
    #[error("{path}: sample rate {rate} Hz, expected 16000")]
    SampleRate { path: PathBuf, rate: u32 },
    #[error("{0}")]
    Format(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
}

impl ToolkitError {
    pub(crate) fn wav(path: &Path, e: hound::Error) -> Self {
        Self::Wav {
            path: path.to_path_buf(),
            msg: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ToolkitError>;
