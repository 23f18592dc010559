//! File formats, scoring backends, the on-disk score cache and the command
//! line front end for `mgtbench-core`.

pub mod backend;
pub mod cache;
pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod io;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
