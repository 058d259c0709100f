use std::f64::consts::TAU;

use super::{DerivedSeries, EncodingConfig};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Radius in pixels and angle in radians for one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub rho_px: f64,
    pub theta_rad: f64,
}

/// Rescales into `[0, upper]` over the whole slice; a flat slice maps to zeros.
fn remap(values: impl Iterator<Item = f64> + Clone, upper: f64) -> Vec<f64> {
    let (lo, hi) = values
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi <= lo {
        return values.map(|_| 0.0).collect();
    }
    let scale = upper / (hi - lo);
    values.map(|x| ((x - lo) * scale).clamp(0.0, upper)).collect()
}

/// Radius from the first derivative remapped to `[0, edge - 1]`, angle from the
/// absolute second derivative remapped to `[0, 2π]`, both over the full series.
pub fn polar_remap(derived: &DerivedSeries, config: &EncodingConfig) -> Vec<PolarPoint> {
    let rho = remap(derived.rho.iter().copied(), (config.image_edge - 1) as f64);
    let theta = remap(derived.theta.iter().map(|x| x.abs()), TAU);
    rho.into_iter()
        .zip(theta)
        .map(|(rho_px, theta_rad)| PolarPoint { rho_px, theta_rad })
        .collect()
}

/// Row and column of a polar point in an `edge × edge` raster centred at
/// `(edge/2, edge/2)`. Coordinates that leave the raster are clamped to it.
pub fn pixel_position(point: PolarPoint, edge: usize) -> (usize, usize) {
    let center = (edge / 2) as f64;
    let last = (edge - 1) as f64;
    let row = (point.rho_px * point.theta_rad.cos() + center).floor();
    let col = (point.rho_px * point.theta_rad.sin() + center).floor();
    (row.clamp(0.0, last) as usize, col.clamp(0.0, last) as usize)
}

/// Byte written for timestep `t`. A constant series has no brightness scale,
/// so its samples are drawn at full intensity instead of vanishing into the
/// black background.
pub fn pixel_value(derived: &DerivedSeries, t: usize, pixel_max: u8) -> u8 {
    if derived.constant {
        pixel_max
    } else {
        // round half up; values are non-negative
        (derived.normalized[t] + 0.5).floor().clamp(0.0, pixel_max as f64) as u8
    }
}

/// Draws the window `[window_start, window_start + window_length)` onto a black
/// image. Timesteps are written in time order, so on collisions the latest wins.
pub fn map_window_to_image(
    derived: &DerivedSeries,
    polar: &[PolarPoint],
    window_start: usize,
    config: &EncodingConfig,
    label: &str,
) -> Result<GrayImage> {
    let len = derived.len().min(polar.len());
    let end = window_start
        .checked_add(config.window_length)
        .filter(|&end| end <= len)
        .ok_or(Error::WindowOutOfRange {
            start: window_start,
            window: config.window_length,
            len,
        })?;
    let mut image = GrayImage::black(config.image_edge, label);
    for t in window_start..end {
        let (row, col) = pixel_position(polar[t], config.image_edge);
        image.set(row, col, pixel_value(derived, t, config.pixel_max));
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn config(edge: usize, window: usize) -> EncodingConfig {
        EncodingConfig {
            image_edge: edge,
            window_length: window,
            ..EncodingConfig::default()
        }
    }

    fn derived(rho: Vec<f64>, theta: Vec<f64>) -> DerivedSeries {
        DerivedSeries {
            normalized: vec![100.0; rho.len()],
            rho,
            theta,
            constant: false,
        }
    }

    #[test]
    fn flat_radius_maps_to_zero() {
        let polar = polar_remap(&derived(vec![3.0; 4], vec![0.0, 1.0, 2.0, 3.0]), &config(64, 3));
        assert!(polar.iter().all(|p| p.rho_px == 0.0));
    }

    #[test]
    fn radius_spans_edge_minus_one() {
        let polar = polar_remap(&derived(vec![0.0, 1.0], vec![0.0, 0.0]), &config(64, 2));
        assert_eq!(polar[0].rho_px, 0.0);
        assert_eq!(polar[1].rho_px, 63.0);
    }

    #[test]
    fn angle_uses_absolute_second_derivative() {
        let polar = polar_remap(&derived(vec![0.0; 3], vec![0.0, -2.0, 4.0]), &config(64, 3));
        let theta: Vec<f64> = polar.iter().map(|p| p.theta_rad).collect();
        assert_eq!(theta, vec![0.0, PI, TAU]);
    }

    #[test]
    fn right_angle_points_along_columns() {
        let p = PolarPoint {
            rho_px: 10.0,
            theta_rad: FRAC_PI_2,
        };
        assert_eq!(pixel_position(p, 64), (32, 42));
    }

    #[test]
    fn overflowing_radius_is_clamped() {
        let p = PolarPoint {
            rho_px: 63.0,
            theta_rad: 0.0,
        };
        assert_eq!(pixel_position(p, 64), (63, 32));
        let p = PolarPoint {
            rho_px: 63.0,
            theta_rad: PI,
        };
        assert_eq!(pixel_position(p, 64), (0, 32));
    }

    #[test]
    fn later_timestep_overwrites() {
        let mut d = derived(vec![0.0; 3], vec![0.0; 3]);
        d.normalized = vec![10.0, 20.0, 30.4];
        let polar = polar_remap(&d, &config(8, 3));
        let img = map_window_to_image(&d, &polar, 0, &config(8, 3), "x").unwrap();
        assert_eq!(img.count_nonzero(), 1);
        assert_eq!(img.get(4, 4), 30);
    }

    #[test]
    fn rounding_is_half_up() {
        let mut d = derived(vec![0.0; 1], vec![0.0; 1]);
        d.normalized = vec![2.5];
        assert_eq!(pixel_value(&d, 0, 255), 3);
        d.normalized = vec![2.4999];
        assert_eq!(pixel_value(&d, 0, 255), 2);
    }

    #[test]
    fn window_bounds_checked() {
        let d = derived(vec![0.0; 5], vec![0.0; 5]);
        let polar = polar_remap(&d, &config(8, 3));
        assert!(map_window_to_image(&d, &polar, 2, &config(8, 3), "x").is_ok());
        assert!(matches!(
            map_window_to_image(&d, &polar, 3, &config(8, 3), "x"),
            Err(Error::WindowOutOfRange { .. })
        ));
    }
}
