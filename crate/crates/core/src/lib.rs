//! Pure image kernels, seeded augmentation chains and a compact convolutional
//! classifier for ear identification.
//!
//! Everything in this crate is `no_std` (with `alloc`): no file system, no
//! clock and no global state. File formats, dataset scanning and the
//! experiment harness live in the `earid` companion crate.
#![no_std]

extern crate alloc;

pub mod augment;
pub mod edge;
mod error;
pub mod geometry;
pub mod image;
mod math;
pub mod nn;
pub mod photometric;
pub mod seed;

pub use error::{Error, Result};
pub use image::{Image, PixelRect};
