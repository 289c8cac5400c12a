//! Regional economic complexity from region × industry employment panels.
pub mod complexity;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod matrix;
pub mod pipeline;
pub mod regress;
pub mod synth;
pub use error::{Error, Result};
