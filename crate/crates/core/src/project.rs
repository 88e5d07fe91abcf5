//! Differentiable projection of a parametric light set onto an environment
//! map, and the render-space loss with analytic gradients.
//!
//! Each light contributes a spherical Gaussian `c * exp((l.u - 1)/kappa)`
//! where the bandwidth `kappa = s / (2*pi*ln 10)` is scaled so the lobe
//! falls to exactly 10% of its peak at the rim of a spherical cap of solid
//! angle `s`. Distance does not enter the projection; lighting is projected
//! at the observer.
//!
//! Loss terms are solid-angle-weighted means, so values are
//! resolution-independent. Pixel reductions keep a fixed (row-major) order:
//! rows may be computed in parallel but row partials are always folded in
//! row order, so results are bitwise reproducible for any thread count.

use std::f64::consts::{LN_10, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::DirectionGrid;
use crate::types::{EnvironmentMap, LightSet, Rgb};

/// Spherical-Gaussian bandwidth for a light of the given solid angle:
/// `kappa = s / (2*pi*ln 10)`. With this scaling
/// `exp((cos(theta_s) - 1)/kappa) = 0.1` exactly, where `theta_s` is the
/// angular radius of a cap of solid angle `s`.
pub fn gaussian_bandwidth(solid_angle: f64) -> f64 {
    assert!(solid_angle > 0.0, "solid angle must be positive, got {solid_angle}");
    solid_angle / (2.0 * PI * LN_10)
}

/// Per-parameter gradient accumulators for one light.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LightGradients {
    /// Gradient w.r.t. the direction vector, projected onto the tangent
    /// plane of the unit sphere at the light's current direction.
    pub direction: [f64; 3],
    /// Gradient w.r.t. the solid angle.
    pub solid_angle: f64,
    /// Gradient w.r.t. the color channels.
    pub color: Rgb,
}

/// Gradients of a scalar loss w.r.t. every light-set parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionJacobian {
    pub lights: Vec<LightGradients>,
    pub ambient: Rgb,
}

impl ProjectionJacobian {
    fn zeros(n: usize) -> Self {
        ProjectionJacobian { lights: vec![LightGradients::default(); n], ambient: Rgb::BLACK }
    }
}

/// Projects light sets onto one equirectangular resolution. Pixel-center
/// directions are precomputed once and reused across calls.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: DirectionGrid,
}

impl Projector {
    pub fn new(width: usize, height: usize) -> Self {
        Projector { grid: DirectionGrid::new(width, height) }
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    /// Render the set to an environment map. With `include_ambient` the
    /// ambient term is added to every pixel.
    pub fn project(&self, set: &LightSet, include_ambient: bool) -> EnvironmentMap {
        let width = self.grid.width();
        let height = self.grid.height();
        let lights = light_params(set);
        let base = if include_ambient { set.ambient } else { Rgb::BLACK };
        let mut data = vec![Rgb::BLACK; width * height];
        data.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
            let dirs = self.grid.row(y);
            for (x, out) in row.iter_mut().enumerate() {
                let u = dirs[x];
                let mut value = base;
                for light in &lights {
                    let g = ((light.direction.dot(u) - 1.0) / light.kappa).exp();
                    value += light.color * g;
                }
                *out = value;
            }
        });
        EnvironmentMap::from_pixels(width, height, data)
            .expect("projection of a valid set is a valid map")
    }

    /// Solid-angle-weighted squared-error loss against a target map plus a
    /// separate ambient comparison:
    ///
    /// `loss = w_r * mean((f - target)^2) + w_a * mean((ambient - target_ambient)^2)`
    ///
    /// where both means run over channels (and pixels, weighted by solid
    /// angle, for the render term). The rendered map `f` never includes the
    /// ambient term; ambient is compared only through the second term.
    /// Gradients are analytic; direction gradients are tangent-projected so
    /// a follow-up renormalization keeps directions unit length.
    pub fn loss_and_gradients(
        &self,
        set: &LightSet,
        target: &EnvironmentMap,
        target_ambient: Rgb,
        render_weight: f64,
        ambient_weight: f64,
    ) -> Result<(f64, ProjectionJacobian)> {
        let width = self.grid.width();
        let height = self.grid.height();
        if target.width() != width || target.height() != height {
            return Err(Error::DimensionMismatch {
                expected_width: width,
                expected_height: height,
                width: target.width(),
                height: target.height(),
            });
        }
        let lights = light_params(set);
        let n = lights.len();

        let partials: Vec<RowPartial> = (0..height)
            .into_par_iter()
            .map(|y| {
                let dirs = self.grid.row(y);
                let omega = self.grid.solid_angle(y);
                let mut partial = RowPartial::zeros(n);
                let mut kernels = vec![0.0f64; n];
                for (x, &u) in dirs.iter().enumerate() {
                    let mut f = Rgb::BLACK;
                    for (i, light) in lights.iter().enumerate() {
                        let g = ((light.direction.dot(u) - 1.0) / light.kappa).exp();
                        kernels[i] = g;
                        f += light.color * g;
                    }
                    let e = f - target.pixel(x, y);
                    partial.squared_residual += omega * e.dot(e);
                    let two_omega = 2.0 * omega;
                    for (i, light) in lights.iter().enumerate() {
                        let g = kernels[i];
                        if g == 0.0 {
                            continue;
                        }
                        let grad = &mut partial.lights[i];
                        grad.color += e * (two_omega * g);
                        let along = e.dot(light.color) * two_omega * g;
                        let dot = light.direction.dot(u);
                        let dir_scale = along / light.kappa;
                        grad.direction[0] += dir_scale * u.x();
                        grad.direction[1] += dir_scale * u.y();
                        grad.direction[2] += dir_scale * u.z();
                        grad.solid_angle +=
                            along * (1.0 - dot) / (light.kappa * light.solid_angle);
                    }
                }
                partial
            })
            .collect();

        // Fixed reduction order: fold row partials top to bottom.
        let mut total = RowPartial::zeros(n);
        for p in &partials {
            total.squared_residual += p.squared_residual;
            for (acc, row) in total.lights.iter_mut().zip(&p.lights) {
                acc.color += row.color;
                acc.solid_angle += row.solid_angle;
                for k in 0..3 {
                    acc.direction[k] += row.direction[k];
                }
            }
        }

        let render_norm = render_weight / (3.0 * 4.0 * PI);
        let mut jacobian = ProjectionJacobian::zeros(n);
        for (i, light) in lights.iter().enumerate() {
            let acc = &total.lights[i];
            let mut dir = [
                acc.direction[0] * render_norm,
                acc.direction[1] * render_norm,
                acc.direction[2] * render_norm,
            ];
            // Project onto the tangent space of the sphere at l.
            let l = light.direction;
            let radial = dir[0] * l.x() + dir[1] * l.y() + dir[2] * l.z();
            dir[0] -= radial * l.x();
            dir[1] -= radial * l.y();
            dir[2] -= radial * l.z();
            jacobian.lights[i] = LightGradients {
                direction: dir,
                solid_angle: acc.solid_angle * render_norm,
                color: acc.color * render_norm,
            };
        }

        let ambient_diff = set.ambient - target_ambient;
        let ambient_loss = ambient_weight * ambient_diff.dot(ambient_diff) / 3.0;
        jacobian.ambient = ambient_diff * (2.0 * ambient_weight / 3.0);

        let loss = render_norm * total.squared_residual + ambient_loss;
        Ok((loss, jacobian))
    }
}

struct LightParams {
    direction: crate::types::Direction,
    color: Rgb,
    solid_angle: f64,
    kappa: f64,
}

fn light_params(set: &LightSet) -> Vec<LightParams> {
    set.lights
        .iter()
        .map(|l| LightParams {
            direction: l.direction,
            color: l.color,
            solid_angle: l.solid_angle,
            kappa: gaussian_bandwidth(l.solid_angle),
        })
        .collect()
}

struct RowPartial {
    squared_residual: f64,
    lights: Vec<LightGradients>,
}

impl RowPartial {
    fn zeros(n: usize) -> Self {
        RowPartial { squared_residual: 0.0, lights: vec![LightGradients::default(); n] }
    }
}

/// One-shot projection at the given resolution; see [`Projector::project`].
pub fn project_lightset(
    set: &LightSet,
    width: usize,
    height: usize,
    include_ambient: bool,
) -> EnvironmentMap {
    Projector::new(width, height).project(set, include_ambient)
}

/// One-shot loss/gradient evaluation; see [`Projector::loss_and_gradients`].
pub fn loss_and_gradients(
    set: &LightSet,
    target: &EnvironmentMap,
    target_ambient: Rgb,
    render_weight: f64,
    ambient_weight: f64,
) -> Result<(f64, ProjectionJacobian)> {
    Projector::new(target.width(), target.height()).loss_and_gradients(
        set,
        target,
        target_ambient,
        render_weight,
        ambient_weight,
    )
}
