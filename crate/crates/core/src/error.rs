use std::io;

use thiserror::Error;

/// Errors reported by loaders, savers and pipeline operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("unexpected end of stream")]
    UnexpectedEof,

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("invalid run-length encoding")]
    InvalidRle,

    #[error("environment map must have a 2:1 aspect, got {width}x{height}")]
    AspectRatio { width: usize, height: usize },

    #[error("image contains negative or non-finite radiance")]
    InvalidRadiance,

    #[error("invalid depth value {0}")]
    InvalidDepth(f64),

    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid light set: {0}")]
    InvalidLightSet(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
