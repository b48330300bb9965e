use std::path::{Path, PathBuf};

/// A failed command. Each variant, and each wrapped pipeline error, has its
/// own exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error(transparent)]
    Core(#[from] fsrc_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("missing artifact {}: run `fsrc {stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("provenance mismatch: {0} (pass --force to merge anyway)")]
    ProvenanceMismatch(String),
}

pub type Result<T, E = Failure> = std::result::Result<T, E>;

impl Failure {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        if err.kind() == std::io::ErrorKind::NotFound {
            Failure::Core(fsrc_core::Error::FileNotFound(path.to_path_buf()))
        } else {
            Failure::Core(fsrc_core::Error::Io(err))
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) => e.exit_code(),
            Failure::Config(_) => 62,
            Failure::MissingArtifact { .. } => 15,
            Failure::ProvenanceMismatch(_) => 53,
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(e.into())
    }
}
