//! Ground-truth light extraction: detect bright sources in an HDR panorama
//! by seeded region growing, then convert each region to a parametric light
//! and average the rest into an ambient term.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{luminance, pixel_solid_angle, pixel_to_direction};
use crate::types::{DepthMap, Direction, EnvironmentMap, Light, LightSet, Rgb};

/// Fraction of the seed luminance below which region growing stops.
pub const GROWTH_FRACTION: f64 = 1.0 / 3.0;
/// A source is kept only while its energy is at least this fraction of the
/// strongest source's energy.
pub const SIGNIFICANT_ENERGY_FRACTION: f64 = 0.1;
/// Hard cap on the number of detected sources.
pub const MAX_SOURCES: usize = 10;
/// Distance assumed when no depth is known for a source, meters.
pub const DEPTH_FALLBACK: f64 = 3.0;
/// Clamp range for estimated solid angles, steradians.
pub const SOLID_ANGLE_FLOOR: f64 = 1e-4;

/// Pixels of one detected source, with its seed luminance and total energy
/// (sum of luminance times solid angle). Pixels are 8-connected with
/// azimuth wrap-around.
#[derive(Debug, Clone)]
pub struct LightMask {
    pixels: Vec<(usize, usize)>,
    peak: f64,
    energy: f64,
}

impl LightMask {
    /// Build a mask from explicit pixels, computing peak and energy from the
    /// map. Connectivity is the caller's responsibility.
    pub fn from_pixels(pixels: Vec<(usize, usize)>, map: &EnvironmentMap) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::InvalidInput("light mask must be non-empty".into()));
        }
        let mut peak = 0.0f64;
        let mut energy = 0.0f64;
        for &(x, y) in &pixels {
            if x >= map.width() || y >= map.height() {
                return Err(Error::InvalidInput(format!("mask pixel ({x}, {y}) outside map")));
            }
            let lum = luminance(map.pixel(x, y));
            peak = peak.max(lum);
            energy += lum * pixel_solid_angle(y, map.width(), map.height());
        }
        if energy <= 0.0 {
            return Err(Error::InvalidInput("light mask has zero energy".into()));
        }
        Ok(LightMask { pixels, peak, energy })
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    /// Luminance of the seed pixel.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Sum of luminance times solid angle over the mask.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Detect light sources by repeated seeded region growing.
///
/// Each round seeds at the brightest unmasked pixel (row-major order breaks
/// ties) and grows an 8-connected region over unmasked pixels whose
/// luminance stays at or above a third of the seed. Detection stops when a
/// new region's energy drops below 10% of the first region's energy (that
/// region is discarded) or after [`MAX_SOURCES`] regions. Returned masks are
/// pairwise disjoint, all within 10% of the strongest mask's energy, and
/// ordered by decreasing energy.
pub fn detect_lights(map: &EnvironmentMap) -> Vec<LightMask> {
    let (width, height) = (map.width(), map.height());
    let lum: Vec<f64> = map.data().iter().map(|&p| luminance(p)).collect();
    let band: Vec<f64> = (0..height).map(|y| pixel_solid_angle(y, width, height)).collect();
    let mut masked = vec![false; width * height];
    let mut masks: Vec<LightMask> = Vec::new();

    while masks.len() < MAX_SOURCES {
        let mut seed = None;
        let mut best = 0.0f64;
        for (i, (&l, &m)) in lum.iter().zip(&masked).enumerate() {
            if !m && l > best {
                best = l;
                seed = Some(i);
            }
        }
        let Some(seed) = seed else { break };

        let threshold = best * GROWTH_FRACTION;
        let mut pixels = Vec::new();
        let mut energy = 0.0f64;
        let mut queue = VecDeque::new();
        masked[seed] = true;
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            pixels.push((x, y));
            energy += lum[i] * band[y];
            for dy in -1i64..=1 {
                let ny = y as i64 + dy;
                if ny < 0 || ny >= height as i64 {
                    continue;
                }
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = (x as i64 + dx).rem_euclid(width as i64);
                    let j = ny as usize * width + nx as usize;
                    if !masked[j] && lum[j] >= threshold {
                        masked[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }

        let mask = LightMask { pixels, peak: best, energy };
        if let Some(first) = masks.first() {
            if mask.energy < SIGNIFICANT_ENERGY_FRACTION * first.energy {
                break; // insignificant source; discard and stop
            }
        }
        masks.push(mask);
    }

    // The greedy loop compares against the first (brightest-peak) source;
    // re-check against the strongest by energy, then order by energy.
    if let Some(max_energy) =
        masks.iter().map(|m| m.energy).max_by(|a, b| a.total_cmp(b))
    {
        masks.retain(|m| m.energy >= SIGNIFICANT_ENERGY_FRACTION * max_energy);
    }
    masks.sort_by(|a, b| b.energy.total_cmp(&a.energy));
    masks
}

/// Convert one detected region to a parametric light.
///
/// Direction is the normalized luminance-weighted mean of pixel-center
/// directions; distance the mean known depth over the mask (falling back to
/// [`DEPTH_FALLBACK`]); the angular size comes from a solid-angle-weighted
/// PCA of tangent-plane offsets (half-angles of two sigma per axis,
/// averaged, converted to the cap solid angle); color is the
/// solid-angle-weighted mean over the mask.
pub fn estimate_light(mask: &LightMask, map: &EnvironmentMap, depth: Option<&DepthMap>) -> Light {
    assert!(!mask.is_empty(), "cannot estimate a light from an empty mask");
    let (width, height) = (map.width(), map.height());

    let mut dir_sum = [0.0f64; 3];
    let mut peak_dir = None;
    let mut peak_lum = -1.0f64;
    for &(x, y) in mask.pixels() {
        let u = pixel_to_direction(x, y, width, height);
        let lum = luminance(map.pixel(x, y));
        dir_sum[0] += lum * u.x();
        dir_sum[1] += lum * u.y();
        dir_sum[2] += lum * u.z();
        if lum > peak_lum {
            peak_lum = lum;
            peak_dir = Some(u);
        }
    }
    let direction = Direction::new(dir_sum[0], dir_sum[1], dir_sum[2])
        .or(peak_dir)
        .expect("mask is non-empty");

    let distance = match depth {
        Some(d) => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for &(x, y) in mask.pixels() {
                if let Some(v) = d.depth(x, y) {
                    sum += v;
                    count += 1;
                }
            }
            if count > 0 {
                sum / count as f64
            } else {
                DEPTH_FALLBACK
            }
        }
        None => DEPTH_FALLBACK,
    };

    // Tangent-plane PCA for the angular size.
    let l = direction;
    let helper = if l.y().abs() < 0.9 { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] };
    let e1 = {
        let c = [
            helper[1] * l.z() - helper[2] * l.y(),
            helper[2] * l.x() - helper[0] * l.z(),
            helper[0] * l.y() - helper[1] * l.x(),
        ];
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        [c[0] / n, c[1] / n, c[2] / n]
    };
    let e2 = [
        l.y() * e1[2] - l.z() * e1[1],
        l.z() * e1[0] - l.x() * e1[2],
        l.x() * e1[1] - l.y() * e1[0],
    ];

    let mut w_sum = 0.0f64;
    let mut mean = [0.0f64; 2];
    let mut cov = [0.0f64; 3]; // xx, xy, yy
    let mut color_sum = Rgb::BLACK;
    for &(x, y) in mask.pixels() {
        let u = pixel_to_direction(x, y, width, height);
        let radial = u.dot(l);
        let v = [u.x() - radial * l.x(), u.y() - radial * l.y(), u.z() - radial * l.z()];
        let px = v[0] * e1[0] + v[1] * e1[1] + v[2] * e1[2];
        let py = v[0] * e2[0] + v[1] * e2[1] + v[2] * e2[2];
        let w = pixel_solid_angle(y, width, height);
        w_sum += w;
        mean[0] += w * px;
        mean[1] += w * py;
        cov[0] += w * px * px;
        cov[1] += w * px * py;
        cov[2] += w * py * py;
        color_sum += map.pixel(x, y) * w;
    }
    mean[0] /= w_sum;
    mean[1] /= w_sum;
    let cxx = cov[0] / w_sum - mean[0] * mean[0];
    let cxy = cov[1] / w_sum - mean[0] * mean[1];
    let cyy = cov[2] / w_sum - mean[1] * mean[1];
    let m = 0.5 * (cxx + cyy);
    let det = cxx * cyy - cxy * cxy;
    let disc = (m * m - det).max(0.0).sqrt();
    let lambda1 = (m + disc).max(0.0);
    let lambda2 = (m - disc).max(0.0);
    let half_angle = 0.5 * (2.0 * lambda1.sqrt() + 2.0 * lambda2.sqrt());
    let solid_angle =
        (2.0 * PI * (1.0 - half_angle.cos())).clamp(SOLID_ANGLE_FLOOR, 4.0 * PI);

    let color = color_sum * (1.0 / w_sum);

    Light { direction, distance, solid_angle, color }
}

/// Solid-angle-weighted mean radiance over all pixels not covered by any
/// mask; zero when every pixel is masked.
pub fn estimate_ambient(map: &EnvironmentMap, masks: &[LightMask]) -> Rgb {
    let (width, height) = (map.width(), map.height());
    let mut masked = vec![false; width * height];
    for mask in masks {
        for &(x, y) in mask.pixels() {
            masked[y * width + x] = true;
        }
    }
    let mut sum = Rgb::BLACK;
    let mut w_sum = 0.0f64;
    for y in 0..height {
        let w = pixel_solid_angle(y, width, height);
        for x in 0..width {
            if !masked[y * width + x] {
                sum += map.pixel(x, y) * w;
                w_sum += w;
            }
        }
    }
    if w_sum > 0.0 {
        sum * (1.0 / w_sum)
    } else {
        Rgb::BLACK
    }
}

/// Full extraction: detect sources, estimate a parametric light per source
/// and average the remainder into the ambient term. Lights are ordered by
/// decreasing energy.
pub fn extract_lightset(map: &EnvironmentMap, depth: Option<&DepthMap>) -> LightSet {
    let masks = detect_lights(map);
    let lights = masks.iter().map(|m| estimate_light(m, map, depth)).collect();
    let ambient = estimate_ambient(map, &masks);
    LightSet { lights, ambient }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::direction_to_pixel;
    use crate::synth::{disc_panorama, Disc};
    use approx::assert_relative_eq;

    fn nine_pixel_disc(extra: Option<(usize, usize)>) -> EnvironmentMap {
        // 3x3 block of luminance-100 pixels centered on the pixel nearest
        // (0,0,1) in a 128x64 map, plus an optional single bright pixel.
        let center = direction_to_pixel(Direction::new(0.0, 0.0, 1.0).unwrap(), 128, 64);
        EnvironmentMap::from_fn(128, 64, |x, y| {
            let in_block = x.abs_diff(center.0) <= 1 && y.abs_diff(center.1) <= 1;
            if in_block || extra == Some((x, y)) {
                Rgb::splat(100.0)
            } else {
                Rgb::BLACK
            }
        })
        .unwrap()
    }

    #[test]
    fn detects_single_disc() {
        let map = nine_pixel_disc(None);
        let masks = detect_lights(&map);
        assert_eq!(masks.len(), 1);
        assert_eq!(masks[0].len(), 9);
        assert_relative_eq!(masks[0].peak(), 100.0, epsilon = 1e-9);
    }

    #[test]
    fn insignificant_second_source_discarded() {
        // A single pixel near the pole carries far less solid angle than the
        // 9-pixel block at the equator, so its energy falls below 10%.
        let map = nine_pixel_disc(Some((5, 2)));
        let e_single = 100.0 * pixel_solid_angle(2, 128, 64);
        let e_block: f64 = (31..=33).map(|y| 3.0 * 100.0 * pixel_solid_angle(y, 128, 64)).sum();
        assert!(e_single < SIGNIFICANT_ENERGY_FRACTION * e_block);
        let masks = detect_lights(&map);
        assert_eq!(masks.len(), 1);
        assert_eq!(masks[0].len(), 9);
    }

    #[test]
    fn all_zero_map_yields_no_masks() {
        let map = EnvironmentMap::constant(64, 32, Rgb::BLACK).unwrap();
        assert!(detect_lights(&map).is_empty());
    }

    #[test]
    fn masks_are_disjoint() {
        let discs = [
            Disc {
                center: Direction::new(0.0, 0.0, 1.0).unwrap(),
                angular_radius: 0.2,
                color: Rgb::splat(80.0),
            },
            Disc {
                center: Direction::new(1.0, 0.3, 0.0).unwrap(),
                angular_radius: 0.25,
                color: Rgb::splat(60.0),
            },
        ];
        let map = disc_panorama(128, 64, &discs, Rgb::splat(0.002));
        let masks = detect_lights(&map);
        assert_eq!(masks.len(), 2);
        let mut seen = std::collections::HashSet::new();
        for mask in &masks {
            for &p in mask.pixels() {
                assert!(seen.insert(p), "pixel {p:?} in two masks");
            }
        }
    }

    #[test]
    fn estimate_recovers_symmetric_disc() {
        let center = Direction::new(0.0, 0.0, 1.0).unwrap();
        let disc = Disc { center, angular_radius: 0.2, color: Rgb::new(50.0, 40.0, 30.0) };
        let map = disc_panorama(128, 64, &[disc], Rgb::BLACK);
        let depth = crate::synth::constant_depth(128, 64, 2.5);
        let masks = detect_lights(&map);
        assert_eq!(masks.len(), 1);
        let light = estimate_light(&masks[0], &map, Some(&depth));
        assert!(light.direction.angle_to(center) < 1e-2);
        assert_relative_eq!(light.distance, 2.5, epsilon = 1e-12);
        assert_relative_eq!(light.color.r, 50.0, epsilon = 1e-9);
        assert_relative_eq!(light.color.g, 40.0, epsilon = 1e-9);
        assert_relative_eq!(light.color.b, 30.0, epsilon = 1e-9);
        assert_relative_eq!(light.solid_angle, disc.solid_angle(), max_relative = 0.15);
    }

    #[test]
    fn single_pixel_mask_degenerates() {
        let map = EnvironmentMap::from_fn(64, 32, |x, y| {
            if (x, y) == (10, 12) {
                Rgb::splat(5.0)
            } else {
                Rgb::BLACK
            }
        })
        .unwrap();
        let mask = LightMask::from_pixels(vec![(10, 12)], &map).unwrap();
        let light = estimate_light(&mask, &map, None);
        let expected = pixel_to_direction(10, 12, 64, 32);
        assert!(light.direction.angle_to(expected) < 1e-9);
        assert_eq!(light.solid_angle, SOLID_ANGLE_FLOOR);
        assert_eq!(light.distance, DEPTH_FALLBACK);
    }

    #[test]
    fn ambient_excludes_masked_pixels() {
        let map = EnvironmentMap::constant(64, 32, Rgb::splat(0.2)).unwrap();
        assert_relative_eq!(estimate_ambient(&map, &[]).g, 0.2, max_relative = 1e-12);

        let disc = Disc {
            center: Direction::new(0.0, 0.0, 1.0).unwrap(),
            angular_radius: 0.3,
            color: Rgb::splat(90.0),
        };
        let map = disc_panorama(64, 32, &[disc], Rgb::splat(0.1));
        let masks = detect_lights(&map);
        let ambient = estimate_ambient(&map, &masks);
        assert_relative_eq!(ambient.r, 0.1, epsilon = 1e-9);
    }

    #[test]
    fn fully_masked_map_has_zero_ambient() {
        let map = EnvironmentMap::constant(4, 2, Rgb::splat(3.0)).unwrap();
        let pixels = (0..2).flat_map(|y| (0..4).map(move |x| (x, y))).collect();
        let mask = LightMask::from_pixels(pixels, &map).unwrap();
        assert_eq!(estimate_ambient(&map, &[mask]), Rgb::BLACK);
    }

    #[test]
    fn extraction_orders_by_energy() {
        let strong = Disc {
            center: Direction::new(0.0, 0.0, 1.0).unwrap(),
            angular_radius: 0.22,
            color: Rgb::splat(60.0),
        };
        let weak = Disc {
            center: Direction::new(1.0, 0.0, 0.0).unwrap(),
            angular_radius: 0.18,
            color: Rgb::splat(55.0),
        };
        let map = disc_panorama(128, 64, &[strong, weak], Rgb::splat(0.002));
        let set = extract_lightset(&map, None);
        assert_eq!(set.len(), 2);
        assert!(set.lights[0].direction.angle_to(strong.center) < 0.05);
        assert!(set.lights[1].direction.angle_to(weak.center) < 0.05);
        assert_relative_eq!(set.ambient.r, 0.002, max_relative = 1e-6);
    }

    #[test]
    fn all_zero_map_extracts_empty_set() {
        let map = EnvironmentMap::constant(64, 32, Rgb::BLACK).unwrap();
        let set = extract_lightset(&map, None);
        assert_eq!(set.len(), 0);
        assert_eq!(set.ambient, Rgb::BLACK);
    }

    #[test]
    fn extraction_rotates_with_panorama() {
        let disc = Disc {
            center: Direction::new(0.4, 0.2, 0.9).unwrap(),
            angular_radius: 0.25,
            color: Rgb::new(70.0, 50.0, 30.0),
        };
        let (w, h) = (128usize, 64usize);
        let map = disc_panorama(w, h, &[disc], Rgb::splat(0.002));
        let shift = 17usize;
        let shifted = EnvironmentMap::from_fn(w, h, |x, y| {
            map.pixel((x + w - shift) % w, y)
        })
        .unwrap();
        let a = extract_lightset(&map, None);
        let b = extract_lightset(&shifted, None);
        assert_eq!(a.len(), 1);
        assert_eq!(b.len(), 1);
        let angle = 2.0 * PI * shift as f64 / w as f64;
        let l = a.lights[0].direction;
        let rotated = Direction::new(
            l.x() * angle.cos() + l.z() * angle.sin(),
            l.y(),
            -l.x() * angle.sin() + l.z() * angle.cos(),
        )
        .unwrap();
        // Component-wise: acos cannot resolve angles this small.
        let d = b.lights[0].direction;
        assert_relative_eq!(d.x(), rotated.x(), epsilon = 1e-12);
        assert_relative_eq!(d.y(), rotated.y(), epsilon = 1e-12);
        assert_relative_eq!(d.z(), rotated.z(), epsilon = 1e-12);
        assert_relative_eq!(a.lights[0].solid_angle, b.lights[0].solid_angle, epsilon = 1e-12);
    }

    #[test]
    fn radiance_scaling_scales_colors_only() {
        let disc = Disc {
            center: Direction::new(0.1, -0.3, 1.0).unwrap(),
            angular_radius: 0.2,
            color: Rgb::new(40.0, 60.0, 20.0),
        };
        let (w, h) = (128usize, 64usize);
        let map = disc_panorama(w, h, &[disc], Rgb::splat(0.002));
        let alpha = 3.5;
        let scaled =
            EnvironmentMap::from_fn(w, h, |x, y| map.pixel(x, y) * alpha).unwrap();
        let a = extract_lightset(&map, None);
        let b = extract_lightset(&scaled, None);
        assert_eq!(a.len(), b.len());
        for (la, lb) in a.lights.iter().zip(&b.lights) {
            assert!(la.direction.angle_to(lb.direction) < 1e-12);
            assert_relative_eq!(la.solid_angle, lb.solid_angle, epsilon = 1e-12);
            assert_relative_eq!(lb.color.r, alpha * la.color.r, max_relative = 1e-12);
            assert_eq!(la.distance, lb.distance);
        }
        assert_relative_eq!(b.ambient.g, alpha * a.ambient.g, max_relative = 1e-12);
    }
}
