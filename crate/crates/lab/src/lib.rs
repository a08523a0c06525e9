//! Host-side harness: configuration files, run directories, CSV logs,
//! snapshot files, sweeps and reports around `nmps-core`.

pub use nmps_core as core;

pub mod config;
pub mod error;
pub mod records;
pub mod report;
pub mod runner;
pub mod snapshot_io;

pub use error::{LabError, Result};
