//! Polar time-series-to-image encoding with a small CNN evaluation harness.
//!
//! The pipeline turns labeled scalar series into sliding-window grayscale
//! images ([`encoder`]), augments them ([`augment`]), builds balanced and
//! leakage-free datasets ([`dataset`]), trains a from-scratch convolutional
//! network ([`classifier`]) and scores it ([`metrics`]). [`experiment`] ties
//! everything together for configuration sweeps.

pub mod augment;
pub mod classifier;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod image;
pub mod metrics;
pub mod rng;
pub mod series;

pub use error::{Error, ErrorKind, Result};
pub use image::GrayImage;
pub use series::TimeSeries;
