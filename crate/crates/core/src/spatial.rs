//! 3D re-use of lighting: relocate parametric lights to a new observer
//! position, forward-warp full environment maps with per-pixel depth, and
//! extract rectilinear crops.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{pixel_to_direction, vector_to_pixel};
use crate::types::{DepthMap, Direction, EnvironmentMap, LightSet, Rgb};

/// Displacement of the new observer from the capture point, meters, in the
/// panorama's axes (Y up, +Z forward).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Translation {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Translation {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Translation { x, y, z }
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Rectilinear crop of a panorama.
#[derive(Debug, Clone)]
pub struct CropImage {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
    fov_deg: f64,
}

impl CropImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Horizontal field of view, degrees.
    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[Rgb] {
        &self.data
    }
}

/// World position of a light, camera at the origin: `p = distance * direction`.
pub fn light_world_position(light: &crate::types::Light) -> [f64; 3] {
    let l = light.direction;
    [light.distance * l.x(), light.distance * l.y(), light.distance * l.z()]
}

/// Re-express every light relative to an observer displaced by `t`. World
/// positions are fixed; direction and distance follow, and the solid angle
/// rescales as `s * (d/d')^2` (constant physical area in the small-angle
/// model), clamped to 4*pi. Color is radiance and does not change. `t = 0`
/// returns the input unchanged.
pub fn relocate_lightset(set: &LightSet, t: Translation) -> Result<LightSet> {
    if t.is_zero() {
        return Ok(set.clone());
    }
    let mut lights = Vec::with_capacity(set.lights.len());
    for (i, light) in set.lights.iter().enumerate() {
        let p = light_world_position(light);
        let q = [p[0] - t.x, p[1] - t.y, p[2] - t.z];
        let dist = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        if dist <= 1e-6 {
            return Err(Error::InvalidInput(format!(
                "observer coincides with light {i} (distance {dist})"
            )));
        }
        let direction = Direction::new(q[0], q[1], q[2])
            .ok_or_else(|| Error::InvalidInput(format!("light {i}: degenerate direction")))?;
        let ratio = light.distance / dist;
        let solid_angle = (light.solid_angle * ratio * ratio).min(4.0 * PI);
        lights.push(crate::types::Light {
            direction,
            distance: dist,
            solid_angle,
            color: light.color,
        });
    }
    Ok(LightSet { lights, ambient: set.ambient })
}

/// Densify a depth map: unknown pixels inherit the nearest known depth along
/// their row (cyclic); rows with no known depth copy from the nearest row
/// that has one.
fn fill_unknown_depths(depth: &DepthMap) -> Vec<f64> {
    let (width, height) = (depth.width(), depth.height());
    let mut filled = vec![0.0f64; width * height];
    let mut row_has_depth = vec![false; height];
    for y in 0..height {
        let known: Vec<usize> = (0..width).filter(|&x| depth.depth(x, y).is_some()).collect();
        if known.is_empty() {
            continue;
        }
        row_has_depth[y] = true;
        for x in 0..width {
            if let Some(v) = depth.depth(x, y) {
                filled[y * width + x] = v;
            } else {
                // nearest known column, scanning left then right at each radius
                let mut value = None;
                'search: for radius in 1..=width / 2 + 1 {
                    for nx in [
                        (x + width - radius % width) % width,
                        (x + radius) % width,
                    ] {
                        if depth.depth(nx, y).is_some() {
                            value = depth.depth(nx, y);
                            break 'search;
                        }
                    }
                }
                filled[y * width + x] = value.expect("row has a known depth");
            }
        }
    }
    for y in 0..height {
        if row_has_depth[y] {
            continue;
        }
        let source = (1..height as i64)
            .flat_map(|r| [y as i64 - r, y as i64 + r])
            .find(|&ny| ny >= 0 && ny < height as i64 && row_has_depth[ny as usize])
            .expect("at least one row has a known depth");
        for x in 0..width {
            filled[y * width + x] = filled[source as usize * width + x];
        }
    }
    filled
}

/// Forward-warp an environment map to an observer displaced by `t`. Each
/// source pixel's world point (`depth * direction`) is re-projected from the
/// new origin; collisions keep the nearest point, and remaining holes are
/// filled by iterative nearest-neighbor dilation. Radiance values are copied
/// unchanged, so a zero translation reproduces the input bit for bit.
pub fn warp_envmap(map: &EnvironmentMap, depth: &DepthMap, t: Translation) -> Result<EnvironmentMap> {
    let (width, height) = (map.width(), map.height());
    if depth.width() != width || depth.height() != height {
        return Err(Error::DimensionMismatch {
            expected_width: width,
            expected_height: height,
            width: depth.width(),
            height: depth.height(),
        });
    }
    if depth.values().iter().all(|&v| v <= 0.0) {
        return Err(Error::InvalidInput("depth map has no known depths".into()));
    }
    let depths = fill_unknown_depths(depth);

    let mut color = vec![None::<Rgb>; width * height];
    let mut nearest = vec![f64::INFINITY; width * height];
    for y in 0..height {
        for x in 0..width {
            let u = pixel_to_direction(x, y, width, height);
            let d = depths[y * width + x];
            let q = [d * u.x() - t.x, d * u.y() - t.y, d * u.z() - t.z];
            let dist2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
            if dist2 <= 1e-18 {
                continue; // world point coincides with the new observer
            }
            let (nx, ny) = vector_to_pixel(q, width, height);
            let j = ny * width + nx;
            if dist2 < nearest[j] {
                nearest[j] = dist2;
                color[j] = Some(map.pixel(x, y));
            }
        }
    }

    // Iterative nearest-neighbor dilation until no holes remain. Each pass
    // reads the previous pass's state, so fill order cannot matter.
    const NEIGHBORS: [(i64, i64); 8] =
        [(0, -1), (0, 1), (-1, 0), (1, 0), (-1, -1), (1, -1), (-1, 1), (1, 1)];
    loop {
        let holes: Vec<usize> =
            (0..color.len()).filter(|&i| color[i].is_none()).collect();
        if holes.is_empty() {
            break;
        }
        let snapshot = color.clone();
        let mut progressed = false;
        for i in holes {
            let (x, y) = (i % width, i / width);
            for (dx, dy) in NEIGHBORS {
                let ny = y as i64 + dy;
                if ny < 0 || ny >= height as i64 {
                    continue;
                }
                let nx = (x as i64 + dx).rem_euclid(width as i64);
                if let Some(v) = snapshot[ny as usize * width + nx as usize] {
                    color[i] = Some(v);
                    progressed = true;
                    break;
                }
            }
        }
        assert!(progressed, "dilation must make progress while holes remain");
    }

    let data = color.into_iter().map(|c| c.expect("all holes filled")).collect();
    EnvironmentMap::from_pixels(width, height, data)
}

/// Rectilinear (gnomonic) crop centered on the given azimuth/elevation,
/// degrees, with nearest-neighbor sampling. `fov_deg` is the horizontal
/// field of view; vertical follows from square pixels.
pub fn crop_view(
    map: &EnvironmentMap,
    azimuth_deg: f64,
    elevation_deg: f64,
    fov_deg: f64,
    width: usize,
    height: usize,
) -> CropImage {
    assert!(fov_deg > 0.0 && fov_deg < 180.0, "fov {fov_deg} outside (0, 180)");
    assert!(width > 0 && height > 0);
    let az = azimuth_deg.to_radians();
    let el = elevation_deg.to_radians();
    let forward = [az.sin() * el.cos(), el.sin(), az.cos() * el.cos()];
    // right = up x forward, with a fallback at the poles
    let right = {
        let c = [forward[2], 0.0, -forward[0]];
        let n = (c[0] * c[0] + c[2] * c[2]).sqrt();
        if n > 1e-9 {
            [c[0] / n, 0.0, c[2] / n]
        } else {
            [az.cos(), 0.0, -az.sin()]
        }
    };
    let up = [
        forward[1] * right[2] - forward[2] * right[1],
        forward[2] * right[0] - forward[0] * right[2],
        forward[0] * right[1] - forward[1] * right[0],
    ];
    let tan_half_x = (0.5 * fov_deg.to_radians()).tan();
    let tan_half_y = tan_half_x * height as f64 / width as f64;

    let mut data = Vec::with_capacity(width * height);
    for j in 0..height {
        let sy = (1.0 - 2.0 * (j as f64 + 0.5) / height as f64) * tan_half_y;
        for i in 0..width {
            let sx = (2.0 * (i as f64 + 0.5) / width as f64 - 1.0) * tan_half_x;
            let v = [
                forward[0] + sx * right[0] + sy * up[0],
                forward[1] + sx * right[1] + sy * up[1],
                forward[2] + sx * right[2] + sy * up[2],
            ];
            let (x, y) = vector_to_pixel(v, map.width(), map.height());
            data.push(map.pixel(x, y));
        }
    }
    CropImage { width, height, data, fov_deg }
}
