//! IO, file formats and command-line plumbing around `hcfreq-core`.
//!
//! File formats are described in `docs/FORMATS.md`.

pub mod ablate;
pub mod checkpoint;
pub mod config_file;
pub mod csv_io;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use hcfreq_core as core;
