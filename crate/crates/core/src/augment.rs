//! Series-level and image-level augmentation.
//!
//! Moving average smooths a series before encoding. Random erasing only ever
//! writes black patches, so an erased region looks like background that no
//! timestep reached. Flips, shifts and crops are available but are not part
//! of the default pipeline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub ma_window: usize,
    pub re_probability: f64,
    pub re_area_range: (f64, f64),
    pub re_aspect_range: (f64, f64),
    pub rng_seed: u64,
    /// Lets dataset balancing also flip the images it synthesizes.
    pub flips: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            ma_window: 3,
            re_probability: 0.5,
            re_area_range: (0.02, 0.2),
            re_aspect_range: (0.3, 3.33),
            rng_seed: 0,
            flips: false,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let (area_lo, area_hi) = self.re_area_range;
        let (aspect_lo, aspect_hi) = self.re_aspect_range;
        if self.ma_window == 0 {
            return Err(Error::InvalidConfig("ma_window must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.re_probability) {
            return Err(Error::InvalidConfig(format!(
                "re_probability {} is outside [0, 1]",
                self.re_probability
            )));
        }
        if !(area_lo > 0.0 && area_lo <= area_hi && area_hi <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "re_area_range {:?} must satisfy 0 < low <= high <= 1",
                self.re_area_range
            )));
        }
        if !(aspect_lo > 0.0 && aspect_lo <= aspect_hi && aspect_hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "re_aspect_range {:?} must satisfy 0 < low <= high",
                self.re_aspect_range
            )));
        }
        Ok(())
    }
}

/// Trailing-window means; the output is `ma_window - 1` samples shorter.
pub fn moving_average(samples: &[f64], ma_window: usize) -> Result<Vec<f64>> {
    if ma_window == 0 {
        return Err(Error::InvalidConfig("ma_window must be positive".into()));
    }
    if samples.len() < ma_window {
        return Err(Error::TooShort {
            len: samples.len(),
            needed: ma_window,
        });
    }
    Ok(samples
        .windows(ma_window)
        .map(|w| {
            let (lo, hi) = w
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            (w.iter().sum::<f64>() / ma_window as f64).clamp(lo, hi)
        })
        .collect())
}

/// With probability `re_probability`, zeroes one rectangle whose area fraction
/// and aspect ratio are drawn from the configured ranges. Gives up (returning
/// the input) when ten draws in a row do not fit the raster.
pub fn random_erase_black<R: Rng + ?Sized>(
    image: &GrayImage,
    config: &AugmentConfig,
    rng: &mut R,
) -> GrayImage {
    let mut out = image.clone();
    if rng.random::<f64>() >= config.re_probability {
        return out;
    }
    let edge = image.edge();
    let area = (edge * edge) as f64;
    for _ in 0..10 {
        let target = area * rng.random_range(config.re_area_range.0..=config.re_area_range.1);
        let aspect = rng.random_range(config.re_aspect_range.0..=config.re_aspect_range.1);
        let height = (target * aspect).sqrt().round() as usize;
        let width = (target / aspect).sqrt().round() as usize;
        if height == 0 || width == 0 || height > edge || width > edge {
            continue;
        }
        let top = rng.random_range(0..=edge - height);
        let left = rng.random_range(0..=edge - width);
        for row in top..top + height {
            for col in left..left + width {
                out.set(row, col, 0);
            }
        }
        return out;
    }
    out
}

/// Reverses the columns of every row.
pub fn flip_horizontal(image: &GrayImage) -> GrayImage {
    let mut out = image.clone();
    let edge = image.edge();
    for row in out.pixels_mut().chunks_mut(edge.max(1)) {
        row.reverse();
    }
    out
}

/// Reverses the order of the rows.
pub fn flip_vertical(image: &GrayImage) -> GrayImage {
    let edge = image.edge();
    let mut out = image.clone();
    for row in 0..edge {
        for col in 0..edge {
            out.set(row, col, image.get(edge - 1 - row, col));
        }
    }
    out
}

/// Translates by `dx` columns and `dy` rows; vacated pixels become black.
pub fn shift(image: &GrayImage, dx: i64, dy: i64) -> Result<GrayImage> {
    let edge = image.edge();
    let e = edge as i64;
    if dx.abs() >= e || dy.abs() >= e {
        return Err(Error::ShiftTooLarge { dx, dy, edge });
    }
    let mut out = GrayImage::black(edge, image.label.clone());
    for row in 0..e {
        for col in 0..e {
            let (src_row, src_col) = (row - dy, col - dx);
            if (0..e).contains(&src_row) && (0..e).contains(&src_col) {
                out.set(
                    row as usize,
                    col as usize,
                    image.get(src_row as usize, src_col as usize),
                );
            }
        }
    }
    Ok(out)
}

/// Cuts a random `crop_edge` square and scales it back to full size by
/// nearest-neighbour sampling.
pub fn random_crop<R: Rng + ?Sized>(
    image: &GrayImage,
    crop_edge: usize,
    rng: &mut R,
) -> Result<GrayImage> {
    let edge = image.edge();
    if crop_edge == 0 || crop_edge > edge {
        return Err(Error::CropTooLarge {
            crop: crop_edge,
            edge,
        });
    }
    let top = rng.random_range(0..=edge - crop_edge);
    let left = rng.random_range(0..=edge - crop_edge);
    let mut out = GrayImage::black(edge, image.label.clone());
    for row in 0..edge {
        for col in 0..edge {
            let src_row = top + row * crop_edge / edge;
            let src_col = left + col * crop_edge / edge;
            out.set(row, col, image.get(src_row, src_col));
        }
    }
    Ok(out)
}
