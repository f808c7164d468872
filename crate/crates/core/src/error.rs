use std::io;

use thiserror::Error;

/// Errors raised by the splicing laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{what} = {value} is not a multiple of the grid step {step}")]
    Misaligned { what: &'static str, value: f64, step: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("window [{a}, {b}] lies outside [{t_min}, {t_max}]")]
    WindowOutOfRange { a: f64, b: f64, t_min: f64, t_max: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("regions not ordered: R - d - l - 3 = {gap} <= 0 (R = {r}, l = {l}, d = {d})")]
    RegionOrdering { r: f64, l: f64, d: f64, gap: f64 },
    #[error("overlap formulas disagree by {diff:e} at t = {t} (tolerance {tol:e})")]
    OverlapDisagreement { t: f64, diff: f64, tol: f64 },
    #[error("inconsistent evaluation: {0}")]
    Inconsistent(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
