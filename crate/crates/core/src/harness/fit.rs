//! Least-squares decay fits on `ln value` against `R`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of `ln value` from the fitted line.
    pub residual: f64,
}

/// Fits `ln value = slope * R + intercept`; needs at least four positive values.
pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 4 {
        return Err(Error::InvalidParameter(format!("a decay fit needs at least 4 points, got {}", points.len())));
    }
    if let Some((r, v)) = points.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-positive value {v} at R = {r}")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all R values coincide".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points.iter().map(|p| (p.1.ln() - slope * p.0 - intercept).abs()).fold(0.0, f64::max);
    Ok(DecayFit { slope, intercept, residual })
}
