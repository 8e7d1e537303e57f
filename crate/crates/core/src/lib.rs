//! Semi-supervised segmentation with weak-to-strong pseudo-label
//! consistency and entropy-based filtering of unlabeled samples.

pub mod augment;
pub mod data;
pub mod datastats;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod network;
pub mod preprocess;
pub mod ssl;

pub use error::{Error, Result};
