//! Library side of the CLI: dataset generation and ingestion, model files,
//! the benchmark harness, and QQ plot data. The binary in `main.rs` is a
//! thin argument-parsing layer over these modules.

pub mod bench;
pub mod data;
pub mod error;
pub mod model_io;
pub mod qq;

pub use error::{CliError, CliResult};
