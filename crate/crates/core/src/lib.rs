//! View-invariant gait recognition through genetic template segmentation.

mod codec;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod ga;
pub mod imagecore;
pub mod pipeline;
pub mod segmentation;
pub mod synth;
pub mod templates;
pub mod viewest;

pub use error::{GtsError, Result};
