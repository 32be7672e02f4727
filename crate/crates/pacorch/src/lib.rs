//! File formats, configuration and the staged pipeline around `pacorch-core`.

pub mod analysis;
pub mod config;
pub mod formats;
pub mod pipeline;

pub use pipeline::{derive_seed, run_pipeline, Pipeline};
