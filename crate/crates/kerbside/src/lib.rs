//! IO, synthetic data, the pipeline runner and the annotation service
//! around `kerbside-core`.

pub mod classify;
pub mod error;
pub mod geojson;
pub mod imageio;
pub mod labels;
pub mod manifest;
pub mod pipeline;
pub mod regions;
pub mod report;
pub mod service;
pub mod synth;

pub use error::{Error, Result};
