//! Shared domain types: colors, directions, lights and the image grids they
//! live on.
//!
//! Coordinate convention used throughout: right-handed, Y is up, +Z is the
//! camera's forward axis. Environment maps are equirectangular with a 2:1
//! aspect; the forward axis lands on the center column.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Sub};

use crate::error::{Error, Result};

/// Linear RGB radiance. Values are unitless relative scale, never gamma
/// encoded.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb { r: 0.0, g: 0.0, b: 0.0 };

    pub fn new(r: f64, g: f64, b: f64) -> Self {
        Rgb { r, g, b }
    }

    /// All three channels set to `v`.
    pub fn splat(v: f64) -> Self {
        Rgb { r: v, g: v, b: v }
    }

    pub fn max_channel(self) -> f64 {
        self.r.max(self.g).max(self.b)
    }

    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.g.is_finite() && self.b.is_finite()
    }

    pub fn is_non_negative(self) -> bool {
        self.r >= 0.0 && self.g >= 0.0 && self.b >= 0.0
    }

    /// Channel-wise clamp to zero.
    pub fn clamp_non_negative(self) -> Self {
        Rgb::new(self.r.max(0.0), self.g.max(0.0), self.b.max(0.0))
    }

    /// Channel-wise product.
    pub fn modulate(self, other: Rgb) -> Self {
        Rgb::new(self.r * other.r, self.g * other.g, self.b * other.b)
    }

    /// Dot product over channels.
    pub fn dot(self, other: Rgb) -> f64 {
        self.r * other.r + self.g * other.g + self.b * other.b
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Rgb::new(v[0], v[1], v[2])
    }
}

impl Add for Rgb {
    type Output = Rgb;
    fn add(self, o: Rgb) -> Rgb {
        Rgb::new(self.r + o.r, self.g + o.g, self.b + o.b)
    }
}

impl AddAssign for Rgb {
    fn add_assign(&mut self, o: Rgb) {
        self.r += o.r;
        self.g += o.g;
        self.b += o.b;
    }
}

impl Sub for Rgb {
    type Output = Rgb;
    fn sub(self, o: Rgb) -> Rgb {
        Rgb::new(self.r - o.r, self.g - o.g, self.b - o.b)
    }
}

impl Mul<f64> for Rgb {
    type Output = Rgb;
    fn mul(self, k: f64) -> Rgb {
        Rgb::new(self.r * k, self.g * k, self.b * k)
    }
}

/// Unit vector on the sphere. Construction normalizes, so the unit-length
/// invariant holds for every value of this type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    x: f64,
    y: f64,
    z: f64,
}

impl Direction {
    /// Normalizes the given components. Returns `None` for a near-zero or
    /// non-finite vector.
    pub fn new(x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return None;
        }
        Some(Direction { x: x / n, y: y / n, z: z / n })
    }

    /// Wraps components that are already unit length (e.g. built from
    /// sin/cos). Debug builds check the invariant.
    pub(crate) fn from_unit(v: [f64; 3]) -> Self {
        debug_assert!((v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 1.0).abs() < 1e-9);
        Direction { x: v[0], y: v[1], z: v[2] }
    }

    pub fn x(self) -> f64 {
        self.x
    }

    pub fn y(self) -> f64 {
        self.y
    }

    pub fn z(self) -> f64 {
        self.z
    }

    pub fn dot(self, o: Direction) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Angle between two directions, radians in [0, pi].
    pub fn angle_to(self, o: Direction) -> f64 {
        self.dot(o).clamp(-1.0, 1.0).acos()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// One parametric light source, defined with respect to the camera.
///
/// Invariants: `distance > 0`, `solid_angle` in (0, 4pi], color channels
/// non-negative. A light with zero color is semantically "off".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Light {
    /// Unit direction from the camera toward the light.
    pub direction: Direction,
    /// Distance from the camera, meters.
    pub distance: f64,
    /// Angular size, steradians.
    pub solid_angle: f64,
    /// Mean radiance of the source.
    pub color: Rgb,
}

impl Light {
    pub fn new(direction: Direction, distance: f64, solid_angle: f64, color: Rgb) -> Result<Self> {
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::InvalidLightSet(format!("distance {distance} must be positive")));
        }
        if !(solid_angle > 0.0 && solid_angle <= 4.0 * PI) {
            return Err(Error::InvalidLightSet(format!(
                "solid angle {solid_angle} outside (0, 4pi]"
            )));
        }
        if !color.is_finite() || !color.is_non_negative() {
            return Err(Error::InvalidLightSet("color channels must be non-negative".into()));
        }
        Ok(Light { direction, distance, solid_angle, color })
    }
}

/// A set of parametric lights plus a constant ambient term.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LightSet {
    pub lights: Vec<Light>,
    pub ambient: Rgb,
}

impl LightSet {
    pub fn new(lights: Vec<Light>, ambient: Rgb) -> Result<Self> {
        if !ambient.is_finite() || !ambient.is_non_negative() {
            return Err(Error::InvalidLightSet("ambient channels must be non-negative".into()));
        }
        Ok(LightSet { lights, ambient })
    }

    pub fn len(&self) -> usize {
        self.lights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lights.is_empty()
    }
}

/// Equirectangular grid of linear radiance. Width is always twice the
/// height; contents are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl EnvironmentMap {
    pub fn from_pixels(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::AspectRatio { width, height });
        }
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "pixel buffer holds {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if data.iter().any(|p| !p.is_finite() || !p.is_non_negative()) {
            return Err(Error::InvalidRadiance);
        }
        Ok(EnvironmentMap { width, height, data })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Rgb,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_pixels(width, height, data)
    }

    pub fn constant(width: usize, height: usize, value: Rgb) -> Result<Self> {
        Self::from_pixels(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[Rgb] {
        &self.data
    }
}

/// Per-pixel distance in meters aligned to a companion [`EnvironmentMap`].
/// A value of exactly `0.0` marks an unknown depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub const UNKNOWN: f64 = 0.0;

    pub fn from_values(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "depth buffer holds {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(&bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDepth(bad));
        }
        Ok(DepthMap { width, height, data })
    }

    pub fn constant(width: usize, height: usize, meters: f64) -> Result<Self> {
        Self::from_values(width, height, vec![meters; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Depth at a pixel, `None` when unknown.
    pub fn depth(&self, x: usize, y: usize) -> Option<f64> {
        let v = self.data[y * self.width + x];
        if v > 0.0 {
            Some(v)
        } else {
            None
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Fraction of pixels with a known depth.
    pub fn known_fraction(&self) -> f64 {
        let known = self.data.iter().filter(|v| **v > 0.0).count();
        known as f64 / self.data.len() as f64
    }
}
