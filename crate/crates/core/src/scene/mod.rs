//! Scene description, time stepping and persistence.

mod config;
mod mesh_io;
mod sim;
mod snapshot;
mod verify;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::solver::SolverError;

pub use config::{load_scene, parse_scene, BoxSpec, ObjectConfig, OutputConfig, SceneConfig, SoftSource};
pub use mesh_io::{format_mesh, parse_mesh, read_mesh, AsciiMesh};
pub use sim::{run, PhaseTimings, Prepared, Scene, StepReport, StepSink};
pub use verify::{verify_scene, CheckResult, VerifyOptions};
pub use snapshot::{metrics_row, ContactRecord, MetricsWriter, Snapshot, SnapshotWriter, METRICS_COLUMNS, METRICS_TIMING_START};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{}: parse error at line {line}{}: {message}", path.display(), field.as_ref().map(|f| format!(" (field `{f}`)")).unwrap_or_default())]
    Parse { path: PathBuf, line: usize, field: Option<String>, message: String },
    #[error("{}: invalid scene: {message}", path.display())]
    Validation { path: PathBuf, message: String },
    #[error("mesh {}, line {line}: {message}", path.display())]
    Mesh { path: PathBuf, line: usize, message: String },
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: SolverError,
    },
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl SceneError {
    fn with_path(self, file: &Path) -> Self {
        match self {
            SceneError::Parse { line, field, message, .. } => SceneError::Parse { path: file.to_path_buf(), line, field, message },
            SceneError::Validation { message, .. } => SceneError::Validation { path: file.to_path_buf(), message },
            other => other,
        }
    }
}
