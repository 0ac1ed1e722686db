//! Pipeline driver behind the `wice` binary.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod stages;

pub use artifacts::{meta_path, read_artifact, write_atomic, ArtifactMeta, Provenance};
pub use config::{ProviderKind, RunConfig};
pub use error::{CliError, CliResult, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
pub use stages::{run_stage, Stage, StageOutput};
