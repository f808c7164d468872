//! Seeded fixed-end test maps: finite Fourier sums in `s` under an
//! exponentially decaying envelope, normalized in `L^p_{k, delta}`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CylinderGrid, Field};
use crate::norms::{pair_norm, WeightedNormParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// `e^{-delta' |t|}`
    Exp,
    /// `(1 + |t|) e^{-delta' |t|}`
    ExpPoly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMapSpec {
    /// Decay rate `delta'`, which must exceed the norm weight `delta`.
    pub decay: f64,
    /// `(m, amplitude)` pairs for the modes `e^{i m s}`.
    pub modes: Vec<(i32, f64)>,
    pub envelope: Envelope,
}

impl Default for TestMapSpec {
    fn default() -> Self {
        Self { decay: 0.8, modes: vec![(0, 0.3), (1, 1.0), (2, 0.5), (-3, 0.25)], envelope: Envelope::Exp }
    }
}

impl TestMapSpec {
    pub fn envelope_at(&self, t: f64) -> f64 {
        let a = t.abs();
        let e = (-self.decay * a).exp();
        match self.envelope {
            Envelope::Exp => e,
            Envelope::ExpPoly => (1.0 + a) * e,
        }
    }

    /// Sum of the mode amplitudes.
    pub fn amplitude_sum(&self) -> f64 {
        self.modes.iter().map(|(_, a)| a.abs()).sum()
    }
}

struct Mode {
    m: f64,
    amp: f64,
    phase: f64,
    /// Unit vector in `C^n`, interleaved real and imaginary parts.
    dir: Vec<f64>,
}

fn draw_modes(spec: &TestMapSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<Mode> {
    spec.modes
        .iter()
        .map(|&(m, amp)| {
            let mut dir: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            dir.iter_mut().for_each(|v| *v /= norm);
            Mode { m: m as f64, amp, phase: rng.random_range(0.0..std::f64::consts::TAU), dir }
        })
        .collect()
}

fn sample(spec: &TestMapSpec, grid: &CylinderGrid, n: usize, modes: &[Mode]) -> Result<Field> {
    Field::sample(*grid, n, |t, s, out| {
        out.iter_mut().for_each(|o| *o = 0.0);
        let env = spec.envelope_at(t);
        for md in modes {
            let (sn, cs) = (md.m * s + md.phase).sin_cos();
            for k in 0..n {
                let (re, im) = (md.dir[2 * k], md.dir[2 * k + 1]);
                out[2 * k] += env * md.amp * (re * cs - im * sn);
                out[2 * k + 1] += env * md.amp * (re * sn + im * cs);
            }
        }
    })
}

/// Unnormalized pair: `u_+(t, s) = e(t) sum_m a_m e^{i(m s + phi_m)} c_m` with
/// random unit `c_m in C^n` and phases, mirrored in `t` for `u_-`.
pub fn generate_raw_pair(spec: &TestMapSpec, grid_minus: &CylinderGrid, grid_plus: &CylinderGrid, n: usize, seed: u64) -> Result<(Field, Field)> {
    if spec.modes.is_empty() {
        return Err(Error::InvalidParameter("test map needs at least one Fourier mode".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let minus = draw_modes(spec, n, &mut rng);
    let plus = draw_modes(spec, n, &mut rng);
    Ok((sample(spec, grid_minus, n, &minus)?, sample(spec, grid_plus, n, &plus)?))
}

/// As [`generate_raw_pair`], scaled so that `||u_-|| + ||u_+|| = 1` in `L^p_{k, delta}`.
pub fn generate_test_pair(
    spec: &TestMapSpec,
    grid_minus: &CylinderGrid,
    grid_plus: &CylinderGrid,
    n: usize,
    params: &WeightedNormParams,
    seed: u64,
) -> Result<(Field, Field)> {
    if !(spec.decay > params.delta) {
        return Err(Error::InvalidParameter(format!(
            "test map decay {} must exceed the weight {}",
            spec.decay, params.delta
        )));
    }
    let (um, up) = generate_raw_pair(spec, grid_minus, grid_plus, n, seed)?;
    let norm = pair_norm(&um, &up, params)?;
    if !(norm > 0.0) {
        return Err(Error::NonFinite("test pair has zero norm".into()));
    }
    Ok((um.scale(1.0 / norm), up.scale(1.0 / norm)))
}
