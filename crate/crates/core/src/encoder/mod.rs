//! Time series to image encoding.
//!
//! A series is min-max scaled to `[0, 255]`, differentiated twice, and each
//! timestep is placed in polar coordinates around the image centre: the first
//! derivative gives the radius and the magnitude of the second derivative the
//! angle. The scaled level becomes the pixel brightness. Stride-1 windows of
//! `window_length` timesteps each produce one image.

mod diff;
mod mapping;
mod normalize;

use serde::{Deserialize, Serialize};

pub use diff::{central_difference, Stencil};
pub use mapping::{map_window_to_image, pixel_position, pixel_value, polar_remap, PolarPoint};
pub use normalize::{minmax_normalize, Normalized};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingConfig {
    pub image_edge: usize,
    pub window_length: usize,
    #[serde(default = "default_stencil")]
    pub stencil_points: Stencil,
    #[serde(default = "default_pixel_max")]
    pub pixel_max: u8,
}

fn default_stencil() -> Stencil {
    Stencil::Three
}

fn default_pixel_max() -> u8 {
    255
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            image_edge: 64,
            window_length: 40,
            stencil_points: default_stencil(),
            pixel_max: default_pixel_max(),
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_edge < 2 || !self.image_edge.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "image_edge must be even and at least 2, got {}",
                self.image_edge
            )));
        }
        // derivatives are taken over the whole series, so only the series
        // (not the window) has to cover the stencil
        if self.window_length == 0 {
            return Err(Error::InvalidConfig("window_length must be positive".into()));
        }
        if self.pixel_max != 255 {
            return Err(Error::InvalidConfig(format!(
                "pixel_max must be 255 for 8-bit grayscale, got {}",
                self.pixel_max
            )));
        }
        Ok(())
    }
}

/// Scaled level plus its first (`rho`) and second (`theta`) derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSeries {
    pub normalized: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// The source series was constant; see [`pixel_value`].
    pub constant: bool,
}

impl DerivedSeries {
    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }
}

/// Normalizes `samples` and differentiates them twice with the configured stencil.
pub fn derive(samples: &[f64], config: &EncodingConfig) -> Result<DerivedSeries> {
    let Normalized { values, constant } = minmax_normalize(samples, config.pixel_max as f64);
    let rho = central_difference(&values, config.stencil_points)?;
    let theta = central_difference(&rho, config.stencil_points)?;
    Ok(DerivedSeries {
        normalized: values,
        rho,
        theta,
        constant,
    })
}

/// A series prepared for window extraction.
#[derive(Debug, Clone)]
pub struct PreparedSeries {
    pub derived: DerivedSeries,
    pub polar: Vec<PolarPoint>,
    config: EncodingConfig,
    label: String,
}

impl PreparedSeries {
    pub fn new(series: &TimeSeries, config: &EncodingConfig) -> Result<Self> {
        config.validate()?;
        series.validate()?;
        if series.len() < config.window_length {
            return Err(Error::SeriesTooShort {
                len: series.len(),
                window: config.window_length,
            });
        }
        let derived = derive(&series.samples, config).map_err(|e| e.context(format!("series `{}`", series.id)))?;
        let polar = polar_remap(&derived, config);
        Ok(PreparedSeries {
            derived,
            polar,
            config: *config,
            label: series.label.clone(),
        })
    }

    pub fn window_count(&self) -> usize {
        self.derived.len() - self.config.window_length + 1
    }

    pub fn window(&self, start: usize) -> Result<GrayImage> {
        map_window_to_image(&self.derived, &self.polar, start, &self.config, &self.label)
    }
}

/// Encodes every stride-1 window; returns `len - window_length + 1` images in window order.
pub fn encode_series(series: &TimeSeries, config: &EncodingConfig) -> Result<Vec<GrayImage>> {
    let prepared = PreparedSeries::new(series, config)?;
    (0..prepared.window_count()).map(|s| prepared.window(s)).collect()
}
