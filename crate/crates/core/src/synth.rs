//! Synthetic scenes for tests and benchmarks: panoramas with planted disc
//! lights over a uniform background, and constant depth maps.

use std::f64::consts::PI;

use crate::geom::pixel_to_direction;
use crate::types::{DepthMap, Direction, EnvironmentMap, Rgb};

/// A planted disc light: every pixel whose center lies within
/// `angular_radius` of `center` takes `color`.
#[derive(Debug, Clone, Copy)]
pub struct Disc {
    pub center: Direction,
    /// Angular radius, radians.
    pub angular_radius: f64,
    pub color: Rgb,
}

impl Disc {
    /// Solid angle of the spherical cap the disc covers.
    pub fn solid_angle(&self) -> f64 {
        2.0 * PI * (1.0 - self.angular_radius.cos())
    }
}

/// Build a panorama with the given discs over a uniform background. Discs
/// are painted in order; later discs win where they overlap.
pub fn disc_panorama(
    width: usize,
    height: usize,
    discs: &[Disc],
    background: Rgb,
) -> EnvironmentMap {
    let cos_radii: Vec<f64> = discs.iter().map(|d| d.angular_radius.cos()).collect();
    EnvironmentMap::from_fn(width, height, |x, y| {
        let u = pixel_to_direction(x, y, width, height);
        let mut value = background;
        for (disc, cos_r) in discs.iter().zip(&cos_radii) {
            if disc.center.dot(u) >= *cos_r {
                value = disc.color;
            }
        }
        value
    })
    .expect("disc panorama dimensions are valid")
}

/// Constant-depth companion map.
pub fn constant_depth(width: usize, height: usize, meters: f64) -> DepthMap {
    DepthMap::constant(width, height, meters).expect("constant depth is valid")
}
