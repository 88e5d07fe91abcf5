//! Losses and fitting: ground-truth thresholding, the render-space loss,
//! nearest-light assignment with its parametric loss, NNLS intensity
//! refinement, and a moment-based gradient-descent fitter.

use std::f64::consts::PI;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extract::LightMask;
use crate::geom::{luminance, pixel_solid_angle};
use crate::project::{ProjectionJacobian, Projector};
use crate::render_eval::{render_sphere_from_lights, render_sphere_from_map, ProbeImage};
use crate::types::{Direction, EnvironmentMap, Light, LightSet, Rgb};

/// Weights and thresholding for the render-space loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the rendered-map term (w_r).
    pub render_weight: f64,
    /// Weight of the ambient term (w_a).
    pub ambient_weight: f64,
    /// Ground-truth maps keep only pixels at or above this fraction of the
    /// peak luminance.
    pub threshold_fraction: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { render_weight: 20.0, ambient_weight: 1.0, threshold_fraction: 0.05 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.render_weight < 0.0 || self.ambient_weight < 0.0 {
            return Err(Error::InvalidInput("loss weights must be non-negative".into()));
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold fraction {} outside (0, 1)",
                self.threshold_fraction
            )));
        }
        Ok(())
    }
}

/// Settings for the gradient-descent fitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Iterations between halvings of the learning rate.
    pub lr_half_life: usize,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Stabilizer added to the second-moment denominator.
    pub epsilon: f64,
    /// Seed for the initial light directions.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            iterations: 500,
            learning_rate: 0.001,
            lr_half_life: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        if self.lr_half_life == 0 {
            return Err(Error::InvalidInput("lr half-life must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidInput(format!("{name} {b} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Predicted lights matched to their nearest ground-truth light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignedPair {
    pub predicted: usize,
    pub ground_truth: usize,
    pub angle_deg: f64,
}

/// Nearest-light assignment: every predicted index appears exactly once,
/// either in `pairs` (within the cutoff) or in `unmatched`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub pairs: Vec<AssignedPair>,
    pub unmatched: Vec<usize>,
}

/// Angular cutoff for assignment; matches at exactly 45 degrees count.
pub const ASSIGNMENT_CUTOFF_DEG: f64 = 45.0;

/// Initial parameters for fitted lights, standing in for upstream
/// predictions: fixed size/color/distance, seeded uniform directions.
pub const INITIAL_SOLID_ANGLE: f64 = 0.3;
pub const INITIAL_DISTANCE: f64 = 3.0;

const SOLID_ANGLE_FLOOR: f64 = 1e-4;

/// Zero out everything below `fraction` of the peak luminance, returning
/// the thresholded map and the solid-angle-weighted mean of the removed
/// remainder as an ambient term.
pub fn threshold_ground_truth(
    map: &EnvironmentMap,
    fraction: f64,
) -> Result<(EnvironmentMap, Rgb)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("fraction {fraction} outside (0, 1)")));
    }
    let peak = map.data().iter().map(|&p| luminance(p)).fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::InvalidInput("cannot threshold an all-zero map".into()));
    }
    let cutoff = fraction * peak;
    let (width, height) = (map.width(), map.height());
    let mut remainder = Rgb::BLACK;
    let mut remainder_weight = 0.0f64;
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let omega = pixel_solid_angle(y, width, height);
        for x in 0..width {
            let p = map.pixel(x, y);
            if luminance(p) >= cutoff {
                data.push(p);
            } else {
                data.push(Rgb::BLACK);
                remainder += p * omega;
                remainder_weight += omega;
            }
        }
    }
    let ambient = if remainder_weight > 0.0 {
        remainder * (1.0 / remainder_weight)
    } else {
        Rgb::BLACK
    };
    Ok((EnvironmentMap::from_pixels(width, height, data)?, ambient))
}

/// Render-space training loss: delegates to the projection module with the
/// config's weights. The ground-truth map is expected to be thresholded
/// already.
pub fn loss_step1(
    set: &LightSet,
    gt_map: &EnvironmentMap,
    gt_ambient: Rgb,
    cfg: &LossConfig,
) -> Result<(f64, ProjectionJacobian)> {
    cfg.validate()?;
    crate::project::loss_and_gradients(
        set,
        gt_map,
        gt_ambient,
        cfg.render_weight,
        cfg.ambient_weight,
    )
}

/// Match each predicted light to the ground-truth light with the smallest
/// angular distance. Matches beyond [`ASSIGNMENT_CUTOFF_DEG`] are dropped;
/// the comparison happens in cosine space so the 45-degree boundary is
/// exact. Several predicted lights may share one ground-truth light; ties
/// go to the lowest ground-truth index.
pub fn assign_lights(predicted: &LightSet, gt: &LightSet) -> Assignment {
    let cutoff_cos = ASSIGNMENT_CUTOFF_DEG.to_radians().cos();
    let mut assignment = Assignment::default();
    for (i, pred) in predicted.lights.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, truth) in gt.lights.iter().enumerate() {
            let dot = pred.direction.dot(truth.direction);
            if best.is_none_or(|(_, d)| dot > d) {
                best = Some((j, dot));
            }
        }
        match best {
            Some((j, dot)) if dot >= cutoff_cos => assignment.pairs.push(AssignedPair {
                predicted: i,
                ground_truth: j,
                angle_deg: dot.clamp(-1.0, 1.0).acos().to_degrees(),
            }),
            _ => assignment.unmatched.push(i),
        }
    }
    assignment
}

/// Parametric loss over assigned lights: squared errors on distance, solid
/// angle and color for each matched pair, plus the ambient squared error.
/// Direction contributes nothing and unmatched lights are skipped.
pub fn loss_step2(predicted: &LightSet, gt: &LightSet) -> f64 {
    let ambient = predicted.ambient - gt.ambient;
    let mut loss = ambient.dot(ambient);
    for pair in assign_lights(predicted, gt).pairs {
        let p = &predicted.lights[pair.predicted];
        let q = &gt.lights[pair.ground_truth];
        let dc = p.color - q.color;
        loss += (p.distance - q.distance).powi(2)
            + (p.solid_angle - q.solid_angle).powi(2)
            + dc.dot(dc);
    }
    loss
}

/// Non-negative least squares by projected gradient descent: minimizes
/// `|| sum_i x_i * columns[i] - target ||^2` subject to `x >= 0`. Runs to a
/// step-change tolerance of 1e-8 or 10,000 iterations.
pub fn nnls(columns: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let n = columns.len();
    if n == 0 {
        return Vec::new();
    }
    for col in columns {
        assert_eq!(col.len(), target.len(), "column/target length mismatch");
    }
    let mut gram = vec![vec![0.0f64; n]; n];
    let mut rhs = vec![0.0f64; n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = dot;
            gram[j][i] = dot;
        }
        rhs[i] = columns[i].iter().zip(target).map(|(a, b)| a * b).sum();
    }
    // Gershgorin bound on the largest eigenvalue gives a safe step size.
    let lipschitz = gram
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut x = vec![0.0f64; n];
    if lipschitz <= 0.0 {
        return x;
    }
    let step = 1.0 / lipschitz;
    for _ in 0..10_000 {
        let mut delta = 0.0f64;
        let mut next = vec![0.0f64; n];
        for i in 0..n {
            let grad: f64 =
                gram[i].iter().zip(&x).map(|(g, v)| g * v).sum::<f64>() - rhs[i];
            next[i] = (x[i] - step * grad).max(0.0);
            delta = delta.max((next[i] - x[i]).abs());
        }
        let scale = x.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        x = next;
        if delta <= 1e-8 * scale {
            break;
        }
    }
    x
}

/// Probe resolution used by [`refine_intensities`].
pub const REFINE_PROBE_RESOLUTION: usize = 32;

/// Fine-tune light colors with a rendering-based fit: render a diffuse
/// probe under the ground truth masked to each detected source and under
/// each parametric light alone, then solve per-channel NNLS for the scales
/// that best reproduce the masked ground truth. Masks must correspond to
/// lights one-to-one, in order. A light whose own render is all zero keeps
/// a zero scale (with a warning).
pub fn refine_intensities(
    set: &LightSet,
    gt_map: &EnvironmentMap,
    masks: &[LightMask],
) -> Result<LightSet> {
    if masks.len() != set.lights.len() {
        return Err(Error::InvalidInput(format!(
            "{} masks for {} lights",
            masks.len(),
            set.lights.len()
        )));
    }
    if set.lights.is_empty() {
        return Ok(set.clone());
    }
    let (width, height) = (gt_map.width(), gt_map.height());

    let mut target = vec![[0.0f64; 3]; 0];
    let mut columns: Vec<Vec<[f64; 3]>> = Vec::with_capacity(set.lights.len());
    let mut foreground_len = None;
    for (light, mask) in set.lights.iter().zip(masks) {
        // Ground truth restricted to this source.
        let mut masked = vec![Rgb::BLACK; width * height];
        for &(x, y) in mask.pixels() {
            masked[y * width + x] = gt_map.pixel(x, y);
        }
        let masked_map = EnvironmentMap::from_pixels(width, height, masked)?;
        let gt_probe = render_sphere_from_map(&masked_map, REFINE_PROBE_RESOLUTION);

        let alone = LightSet { lights: vec![*light], ambient: Rgb::BLACK };
        let own_probe = render_sphere_from_lights(&alone, REFINE_PROBE_RESOLUTION);

        let gt_fg = probe_foreground(&gt_probe);
        let own_fg = probe_foreground(&own_probe);
        if foreground_len.is_none() {
            foreground_len = Some(gt_fg.len());
            target = vec![[0.0; 3]; gt_fg.len()];
        }
        for (acc, v) in target.iter_mut().zip(&gt_fg) {
            acc[0] += v[0];
            acc[1] += v[1];
            acc[2] += v[2];
        }
        columns.push(own_fg);
    }

    let mut scales = vec![[0.0f64; 3]; set.lights.len()];
    for ch in 0..3 {
        let cols: Vec<Vec<f64>> =
            columns.iter().map(|c| c.iter().map(|v| v[ch]).collect()).collect();
        let t: Vec<f64> = target.iter().map(|v| v[ch]).collect();
        let solution = nnls(&cols, &t);
        for (i, &alpha) in solution.iter().enumerate() {
            scales[i][ch] = alpha;
        }
    }

    let mut refined = set.clone();
    for (i, light) in refined.lights.iter_mut().enumerate() {
        let renders_to_zero = columns[i].iter().all(|v| v == &[0.0, 0.0, 0.0]);
        if renders_to_zero {
            log::warn!("light {i} renders to zero; its intensity scale is forced to 0");
            light.color = Rgb::BLACK;
            continue;
        }
        light.color = Rgb::new(
            scales[i][0] * light.color.r,
            scales[i][1] * light.color.g,
            scales[i][2] * light.color.b,
        );
    }
    Ok(refined)
}

fn probe_foreground(probe: &ProbeImage) -> Vec<[f64; 3]> {
    probe
        .data()
        .iter()
        .zip(probe.foreground())
        .filter(|(_, &fg)| fg)
        .map(|(p, _)| [p.r, p.g, p.b])
        .collect()
}

/// Deterministic initial guess: `n` unit-color lights of solid angle 0.3 at
/// 3 m, directions drawn from a seeded uniform sphere sampler.
pub fn seeded_initial_lightset(n: usize, seed: u64, ambient: Rgb) -> LightSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lights = (0..n)
        .map(|_| {
            let y: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let r = (1.0 - y * y).sqrt();
            Light {
                direction: Direction::new(r * phi.sin(), y, r * phi.cos())
                    .expect("sampled direction is non-zero"),
                distance: INITIAL_DISTANCE,
                solid_angle: INITIAL_SOLID_ANGLE,
                color: Rgb::splat(1.0),
            }
        })
        .collect();
    LightSet { lights, ambient }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(n: usize, opts: &FitOptions) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: opts.beta1,
            beta2: opts.beta2,
            epsilon: opts.epsilon,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

fn decayed_lr(opts: &FitOptions, iteration: usize) -> f64 {
    opts.learning_rate * 0.5f64.powi((iteration / opts.lr_half_life) as i32)
}

/// Fit `n` lights plus ambient to a target panorama by gradient descent on
/// the render-space loss.
///
/// The target is thresholded first; the removed remainder seeds the ambient
/// term. Directions, solid angles, colors and ambient are optimized with
/// first/second-moment (bias-corrected) updates; after every step
/// directions are renormalized, solid angles clamped to [1e-4, 4pi] and
/// colors clamped non-negative. Distance is not observable in the
/// projection and keeps its initial value. Returns the fitted set and the
/// loss trace: one entry per iteration evaluated before its update, plus a
/// final entry after the last update.
pub fn fit_lightset(
    target: &EnvironmentMap,
    n: usize,
    cfg: &LossConfig,
    opts: &FitOptions,
) -> Result<(LightSet, Vec<f64>)> {
    cfg.validate()?;
    opts.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("cannot fit zero lights".into()));
    }
    let (gt_map, gt_ambient) = threshold_ground_truth(target, cfg.threshold_fraction)?;
    let mut set = seeded_initial_lightset(n, opts.seed, gt_ambient);
    let projector = Projector::new(target.width(), target.height());

    let dim = 7 * n + 3;
    let mut adam = Adam::new(dim, opts);
    let mut params = vec![0.0f64; dim];
    let mut grads = vec![0.0f64; dim];
    let mut trace = Vec::with_capacity(opts.iterations + 1);

    for iteration in 0..opts.iterations {
        let (loss, jacobian) = projector.loss_and_gradients(
            &set,
            &gt_map,
            gt_ambient,
            cfg.render_weight,
            cfg.ambient_weight,
        )?;
        trace.push(loss);

        for (i, light) in set.lights.iter().enumerate() {
            let o = 7 * i;
            let d = light.direction.to_array();
            params[o..o + 3].copy_from_slice(&d);
            params[o + 3] = light.solid_angle;
            params[o + 4..o + 7].copy_from_slice(&light.color.to_array());
            let g = &jacobian.lights[i];
            grads[o..o + 3].copy_from_slice(&g.direction);
            grads[o + 3] = g.solid_angle;
            grads[o + 4..o + 7].copy_from_slice(&g.color.to_array());
        }
        let o = 7 * n;
        params[o..o + 3].copy_from_slice(&set.ambient.to_array());
        grads[o..o + 3].copy_from_slice(&jacobian.ambient.to_array());

        adam.update(&mut params, &grads, decayed_lr(opts, iteration));

        for (i, light) in set.lights.iter_mut().enumerate() {
            let o = 7 * i;
            if let Some(dir) = Direction::new(params[o], params[o + 1], params[o + 2]) {
                light.direction = dir;
            }
            light.solid_angle = params[o + 3].clamp(SOLID_ANGLE_FLOOR, 4.0 * PI);
            light.color =
                Rgb::new(params[o + 4], params[o + 5], params[o + 6]).clamp_non_negative();
            // Write the constrained values back so the optimizer state
            // tracks the actual parameters.
            let d = light.direction.to_array();
            params[o..o + 3].copy_from_slice(&d);
            params[o + 3] = light.solid_angle;
            params[o + 4..o + 7].copy_from_slice(&light.color.to_array());
        }
        let o = 7 * n;
        set.ambient = Rgb::new(params[o], params[o + 1], params[o + 2]).clamp_non_negative();
        params[o..o + 3].copy_from_slice(&set.ambient.to_array());
    }

    let (final_loss, _) = projector.loss_and_gradients(
        &set,
        &gt_map,
        gt_ambient,
        cfg.render_weight,
        cfg.ambient_weight,
    )?;
    trace.push(final_loss);
    Ok((set, trace))
}

/// Parametric refinement against an annotated ground-truth set: gradient
/// descent on [`loss_step2`], recomputing the nearest-light assignment each
/// iteration. Directions stay frozen (the assignment gives them no
/// gradient); distance, solid angle, color and ambient move. Starting this
/// from a random initialization instead of a render-space fit reproduces
/// the instability of assignment-based training: unmatched lights never
/// receive a gradient.
pub fn refine_assigned(set: &LightSet, gt: &LightSet, opts: &FitOptions) -> LightSet {
    let n = set.lights.len();
    let dim = 5 * n + 3;
    let mut current = set.clone();
    let mut adam = Adam::new(dim, opts);
    let mut params = vec![0.0f64; dim];
    let mut grads = vec![0.0f64; dim];

    for iteration in 0..opts.iterations {
        let assignment = assign_lights(&current, gt);
        for g in grads.iter_mut() {
            *g = 0.0;
        }
        for (i, light) in current.lights.iter().enumerate() {
            let o = 5 * i;
            params[o] = light.distance;
            params[o + 1] = light.solid_angle;
            params[o + 2..o + 5].copy_from_slice(&light.color.to_array());
        }
        let o = 5 * n;
        params[o..o + 3].copy_from_slice(&current.ambient.to_array());

        for pair in &assignment.pairs {
            let p = &current.lights[pair.predicted];
            let q = &gt.lights[pair.ground_truth];
            let o = 5 * pair.predicted;
            grads[o] = 2.0 * (p.distance - q.distance);
            grads[o + 1] = 2.0 * (p.solid_angle - q.solid_angle);
            let dc = p.color - q.color;
            grads[o + 2] = 2.0 * dc.r;
            grads[o + 3] = 2.0 * dc.g;
            grads[o + 4] = 2.0 * dc.b;
        }
        let da = current.ambient - gt.ambient;
        grads[o] = 2.0 * da.r;
        grads[o + 1] = 2.0 * da.g;
        grads[o + 2] = 2.0 * da.b;

        adam.update(&mut params, &grads, decayed_lr(opts, iteration));

        for (i, light) in current.lights.iter_mut().enumerate() {
            let o = 5 * i;
            light.distance = params[o].max(1e-6);
            light.solid_angle = params[o + 1].clamp(SOLID_ANGLE_FLOOR, 4.0 * PI);
            light.color =
                Rgb::new(params[o + 2], params[o + 3], params[o + 4]).clamp_non_negative();
            params[o] = light.distance;
            params[o + 1] = light.solid_angle;
            params[o + 2..o + 5].copy_from_slice(&light.color.to_array());
        }
        let o = 5 * n;
        current.ambient = Rgb::new(params[o], params[o + 1], params[o + 2]).clamp_non_negative();
        params[o..o + 3].copy_from_slice(&current.ambient.to_array());
    }
    current
}
