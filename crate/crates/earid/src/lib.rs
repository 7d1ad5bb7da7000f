//! File-system side of the ear identification pipeline: image IO, dataset
//! manifests, augmentation expansion, training on manifests and the
//! experiment harness behind the `earid` command.

pub mod dataset;
mod error;
pub mod expand;
pub mod harness;
pub mod io;
mod jobs;
pub mod preprocess;
pub mod report;
pub mod synth;
pub mod training;

pub use earid_core as core;
pub use error::{Error, Result};
