//! Equirectangular panorama geometry: pixel/direction mappings, per-band
//! solid angles and the scalar luminance reduction.
//!
//! Pixel centers sample polar angle `theta = pi*(y+0.5)/height` (measured
//! from +Y) and azimuth `phi = 2*pi*(x+0.5)/width - pi` (zero at +Z, i.e. at
//! the center column). Row bands use the exact integral
//! `(2*pi/width)*(cos(pi*y/h) - cos(pi*(y+1)/h))`, which makes the sphere sum
//! to 4*pi at any resolution.

use std::f64::consts::PI;

use crate::types::{Direction, Rgb};

/// Direction of the pixel center at column `x`, row `y`.
pub fn pixel_to_direction(x: usize, y: usize, width: usize, height: usize) -> Direction {
    assert!(x < width && y < height, "pixel ({x}, {y}) outside {width}x{height}");
    let theta = PI * (y as f64 + 0.5) / height as f64;
    let phi = 2.0 * PI * (x as f64 + 0.5) / width as f64 - PI;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Direction::from_unit([st * sp, ct, st * cp])
}

/// Pixel containing the given direction. Inverse of [`pixel_to_direction`]
/// up to pixel quantization: the pixel -> direction -> pixel round trip is
/// the identity for every pixel. Poles land on rows 0 / height-1; azimuth
/// wraps modulo the width (the zenith's degenerate azimuth resolves to
/// `atan2(0, 0) = 0`, column `width/2`).
pub fn direction_to_pixel(u: Direction, width: usize, height: usize) -> (usize, usize) {
    vector_to_pixel(u.to_array(), width, height)
}

/// Same as [`direction_to_pixel`] but for an arbitrary non-zero vector; the
/// mapping only depends on the vector's direction, so no normalization is
/// needed.
pub(crate) fn vector_to_pixel(v: [f64; 3], width: usize, height: usize) -> (usize, usize) {
    let [x, y, z] = v;
    debug_assert!(x != 0.0 || y != 0.0 || z != 0.0);
    let theta = f64::atan2((x * x + z * z).sqrt(), y);
    let phi = f64::atan2(x, z);
    let row = ((theta / PI) * height as f64).floor() as isize;
    let col = (((phi + PI) / (2.0 * PI)) * width as f64).floor() as isize;
    let row = row.clamp(0, height as isize - 1) as usize;
    let col = col.rem_euclid(width as isize) as usize;
    (col, row)
}

/// Solid angle of any pixel in row `y`, steradians. Exact band integral;
/// summing over all pixels of a map gives 4*pi.
pub fn pixel_solid_angle(y: usize, width: usize, height: usize) -> f64 {
    assert!(y < height, "row {y} outside height {height}");
    let h = height as f64;
    (2.0 * PI / width as f64) * ((PI * y as f64 / h).cos() - (PI * (y as f64 + 1.0) / h).cos())
}

/// Rec. 709 luminance of a linear RGB value.
pub fn luminance(c: Rgb) -> f64 {
    0.2126 * c.r + 0.7152 * c.g + 0.0722 * c.b
}

/// Precomputed pixel-center directions and per-row solid angles for one
/// equirectangular resolution. Built once and shared by every projection or
/// integration pass over maps of that size.
#[derive(Debug, Clone)]
pub struct DirectionGrid {
    width: usize,
    height: usize,
    directions: Vec<Direction>,
    band_solid_angles: Vec<f64>,
}

impl DirectionGrid {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(height > 0 && width == 2 * height, "grid must be 2:1, got {width}x{height}");
        let mut directions = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                directions.push(pixel_to_direction(x, y, width, height));
            }
        }
        let band_solid_angles =
            (0..height).map(|y| pixel_solid_angle(y, width, height)).collect();
        DirectionGrid { width, height, directions, band_solid_angles }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn direction(&self, x: usize, y: usize) -> Direction {
        self.directions[y * self.width + x]
    }

    /// Directions of one row, left to right.
    pub fn row(&self, y: usize) -> &[Direction] {
        &self.directions[y * self.width..(y + 1) * self.width]
    }

    pub fn solid_angle(&self, y: usize) -> f64 {
        self.band_solid_angles[y]
    }
}
