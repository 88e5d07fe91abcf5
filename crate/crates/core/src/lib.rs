//! Parametric 3D lighting toolkit for HDR panoramas.
//!
//! Extracts discrete light sources (direction, distance, angular size,
//! color) plus an ambient term from equirectangular HDR environment maps,
//! projects them back through a differentiable spherical-Gaussian mapping,
//! relocates them in 3D, fits them by gradient descent, and scores lighting
//! estimates with diffuse probe renders (RMSE / si-RMSE).

pub mod error;
pub mod extract;
pub mod geom;
pub mod io;
pub mod optimize;
pub mod project;
pub mod render_eval;
pub mod spatial;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{DepthMap, Direction, EnvironmentMap, Light, LightSet, Rgb};
