//! Shared fixtures for the pipeline benchmarks.

use lumiparam::synth::{constant_depth, disc_panorama, Disc};
use lumiparam::types::{DepthMap, Direction, EnvironmentMap, Light, LightSet, Rgb};

pub fn bench_lightset(n: usize) -> LightSet {
    let dirs = [
        [0.0, 0.2, 1.0],
        [-0.8, 0.1, -0.4],
        [0.6, -0.5, 0.2],
        [0.1, 0.9, -0.3],
        [-0.3, -0.2, 0.9],
    ];
    let lights = (0..n)
        .map(|i| {
            let d = dirs[i % dirs.len()];
            Light {
                direction: Direction::new(d[0], d[1], d[2]).unwrap(),
                distance: 2.0 + i as f64,
                solid_angle: 0.2 + 0.1 * i as f64,
                color: Rgb::new(3.0, 2.0 + i as f64, 1.5),
            }
        })
        .collect();
    LightSet { lights, ambient: Rgb::splat(0.05) }
}

pub fn bench_panorama(width: usize, height: usize) -> EnvironmentMap {
    let discs = [
        Disc {
            center: Direction::new(0.0, 0.1, 1.0).unwrap(),
            angular_radius: 0.22,
            color: Rgb::new(60.0, 50.0, 40.0),
        },
        Disc {
            center: Direction::new(0.9, 0.3, -0.2).unwrap(),
            angular_radius: 0.15,
            color: Rgb::new(45.0, 50.0, 60.0),
        },
    ];
    disc_panorama(width, height, &discs, Rgb::splat(0.002))
}

pub fn bench_depth(width: usize, height: usize) -> DepthMap {
    constant_depth(width, height, 3.0)
}
