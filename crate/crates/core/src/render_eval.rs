//! Diffuse-probe rendering and the RMSE / si-RMSE metrics used to score
//! lighting estimates at multiple insertion points.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::DirectionGrid;
use crate::project::project_lightset;
use crate::spatial::{relocate_lightset, warp_envmap, Translation};
use crate::types::{DepthMap, Direction, EnvironmentMap, LightSet, Rgb};

/// Resolution at which light sets are projected before integration, so both
/// representations share one rendering pipeline.
pub const LIGHTSET_PROJECTION_WIDTH: usize = 128;
pub const LIGHTSET_PROJECTION_HEIGHT: usize = 64;

/// Probe resolution used by [`evaluate_at_positions`].
pub const EVAL_PROBE_RESOLUTION: usize = 64;

/// Orthographic render of a unit diffuse sphere. Pixels outside the
/// silhouette are background and excluded from every metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeImage {
    resolution: usize,
    data: Vec<Rgb>,
    foreground: Vec<bool>,
}

impl ProbeImage {
    pub fn from_parts(resolution: usize, data: Vec<Rgb>, foreground: Vec<bool>) -> Result<Self> {
        if data.len() != resolution * resolution || foreground.len() != data.len() {
            return Err(Error::InvalidInput("probe buffers must be resolution^2".into()));
        }
        if data.iter().any(|p| !p.is_finite() || !p.is_non_negative()) {
            return Err(Error::InvalidRadiance);
        }
        Ok(ProbeImage { resolution, data, foreground })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.resolution + x]
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.foreground[y * self.resolution + x]
    }

    pub fn data(&self) -> &[Rgb] {
        &self.data
    }

    pub fn foreground(&self) -> &[bool] {
        &self.foreground
    }

    fn is_all_zero(&self) -> bool {
        self.data
            .iter()
            .zip(&self.foreground)
            .all(|(p, &fg)| !fg || *p == Rgb::BLACK)
    }
}

/// Cosine-weighted integral of the map over the hemisphere of `normal`:
/// `E(n) = sum L(u) * max(0, n.u) * domega` with exact band solid angles.
pub fn irradiance(map: &EnvironmentMap, normal: Direction) -> Rgb {
    let grid = DirectionGrid::new(map.width(), map.height());
    irradiance_on_grid(map, &grid, normal)
}

fn irradiance_on_grid(map: &EnvironmentMap, grid: &DirectionGrid, normal: Direction) -> Rgb {
    let mut sum = Rgb::BLACK;
    for y in 0..map.height() {
        let omega = grid.solid_angle(y);
        let dirs = grid.row(y);
        let mut row_sum = Rgb::BLACK;
        for (x, &u) in dirs.iter().enumerate() {
            let cosine = normal.dot(u);
            if cosine > 0.0 {
                row_sum += map.pixel(x, y) * cosine;
            }
        }
        sum += row_sum * omega;
    }
    sum
}

/// Render a unit-albedo diffuse sphere under an environment map:
/// orthographic view along -Z, pixel value `irradiance(n) / pi`.
pub fn render_sphere_from_map(map: &EnvironmentMap, resolution: usize) -> ProbeImage {
    assert!(resolution >= 16, "probe resolution {resolution} < 16");
    let grid = DirectionGrid::new(map.width(), map.height());
    let mut data = vec![Rgb::BLACK; resolution * resolution];
    let mut foreground = vec![false; resolution * resolution];
    data.par_chunks_mut(resolution)
        .zip(foreground.par_chunks_mut(resolution))
        .enumerate()
        .for_each(|(j, (row, fg_row))| {
            let py = 1.0 - 2.0 * (j as f64 + 0.5) / resolution as f64;
            for i in 0..resolution {
                let px = 2.0 * (i as f64 + 0.5) / resolution as f64 - 1.0;
                let rr = px * px + py * py;
                if rr <= 1.0 {
                    let n = Direction::new(px, py, (1.0 - rr).sqrt())
                        .expect("silhouette normal is non-zero");
                    row[i] = irradiance_on_grid(map, &grid, n) * (1.0 / PI);
                    fg_row[i] = true;
                }
            }
        });
    ProbeImage { resolution, data, foreground }
}

/// Render a diffuse sphere under a parametric light set by first projecting
/// it (ambient included) to an environment map.
pub fn render_sphere_from_lights(set: &LightSet, resolution: usize) -> ProbeImage {
    let env =
        project_lightset(set, LIGHTSET_PROJECTION_WIDTH, LIGHTSET_PROJECTION_HEIGHT, true);
    render_sphere_from_map(&env, resolution)
}

fn check_same_resolution(a: &ProbeImage, b: &ProbeImage) -> Result<()> {
    if a.resolution != b.resolution {
        return Err(Error::DimensionMismatch {
            expected_width: a.resolution,
            expected_height: a.resolution,
            width: b.resolution,
            height: b.resolution,
        });
    }
    Ok(())
}

/// Root mean squared error over foreground pixels and channels.
pub fn rmse(a: &ProbeImage, b: &ProbeImage) -> Result<f64> {
    check_same_resolution(a, b)?;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for i in 0..a.data.len() {
        if a.foreground[i] {
            let e = a.data[i] - b.data[i];
            sum += e.dot(e);
            count += 3;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok((sum / count as f64).sqrt())
}

/// Scale-invariant RMSE: the prediction `a` is rescaled by the single
/// scalar `alpha = sum(a*b) / sum(a*a)` (over foreground pixels, channels
/// jointly) that minimizes the squared error, then compared by [`rmse`].
/// Errors when `a` is identically zero on the foreground.
pub fn si_rmse(a: &ProbeImage, b: &ProbeImage) -> Result<f64> {
    check_same_resolution(a, b)?;
    let mut dot_ab = 0.0f64;
    let mut dot_aa = 0.0f64;
    for i in 0..a.data.len() {
        if a.foreground[i] {
            dot_ab += a.data[i].dot(b.data[i]);
            dot_aa += a.data[i].dot(a.data[i]);
        }
    }
    if dot_aa == 0.0 {
        return Err(Error::InvalidInput(
            "si-rmse is undefined for an identically zero prediction".into(),
        ));
    }
    let alpha = dot_ab / dot_aa;
    let scaled = ProbeImage {
        resolution: a.resolution,
        data: a.data.iter().map(|&p| p * alpha).collect(),
        foreground: a.foreground.clone(),
    };
    rmse(&scaled, b)
}

/// Metrics for one insertion offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalEntry {
    pub offset: Translation,
    pub rmse: f64,
    pub si_rmse: f64,
}

/// Per-position RMSE / si-RMSE of a prediction against a ground-truth
/// panorama.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub entries: Vec<EvalEntry>,
}

/// The evaluation protocol's insertion points: center, 1 m left, 1 m right.
pub fn default_offsets() -> Vec<Translation> {
    vec![
        Translation::new(0.0, 0.0, 0.0),
        Translation::new(-1.0, 0.0, 0.0),
        Translation::new(1.0, 0.0, 0.0),
    ]
}

/// Compare a predicted light set against a ground-truth panorama at each
/// offset: the ground truth is depth-warped and the prediction relocated,
/// then both are rendered as diffuse probes and scored. A prediction that
/// renders to an all-zero probe falls back to the plain RMSE for its
/// si-RMSE entry (the optimal scale is undefined there).
pub fn evaluate_at_positions(
    predicted: &LightSet,
    gt_map: &EnvironmentMap,
    gt_depth: &DepthMap,
    offsets: &[Translation],
) -> Result<EvalReport> {
    if offsets.is_empty() {
        return Err(Error::InvalidInput("at least one offset is required".into()));
    }
    let mut entries = Vec::with_capacity(offsets.len());
    for &offset in offsets {
        let gt_probe =
            render_sphere_from_map(&warp_envmap(gt_map, gt_depth, offset)?, EVAL_PROBE_RESOLUTION);
        let moved = relocate_lightset(predicted, offset)?;
        let predicted_probe = render_sphere_from_lights(&moved, EVAL_PROBE_RESOLUTION);
        let rmse_value = rmse(&predicted_probe, &gt_probe)?;
        let si_value = if predicted_probe.is_all_zero() {
            rmse_value
        } else {
            si_rmse(&predicted_probe, &gt_probe)?
        };
        entries.push(EvalEntry { offset, rmse: rmse_value, si_rmse: si_value });
    }
    Ok(EvalReport { entries })
}
