use deskasm_core::mesh::MeshError;
use deskasm_core::perception::PerceptionError;
use deskasm_core::placement::PlacementError;
use deskasm_core::plan::PlanError;
use deskasm_core::teaching::TeachingError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Teaching(#[from] TeachingError),
    #[error("detection of {object}: {source}")]
    Detection {
        object: String,
        #[source]
        source: PerceptionError,
    },
    #[error("planning: {0}")]
    Plan(#[from] PlanError),
}

impl CliError {
    /// 2 for bad input or geometry, 3 for planning failures, 4 for detection
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Detection { .. } => 4,
            CliError::Plan(e) => match e.root() {
                PlanError::BadSpec(_) | PlanError::BadGraph(_) => 2,
                _ => 3,
            },
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}
