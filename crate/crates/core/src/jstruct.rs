//! Almost complex structures `x -> J(x)` on `E = C^n` and their derivatives.
//!
//! Non-constant structures are conjugates `J(x) = Q(x) J0 Q(x)^{-1}` of the
//! standard structure, with `Q = I + eps B(x)`. `B` is linear in `x` times a
//! radial bump supported in `|x| < 2`, so `J(0) = J0` and `J^2 = -I` holds to
//! rounding.

use std::sync::OnceLock;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cutoffs::{alpha_minus, alpha_minus_deriv};
use crate::error::{Error, Result};
use crate::grid::{CylinderGrid, Field};
use crate::linalg::{apply_standard, frobenius, invert, matmul, matvec, standard_complex_structure};

/// Measured sup-bounds of `J` and its first two derivatives on `[-2, 2]^{2n}`
/// (Frobenius norms, derivatives along unit directions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmBounds {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl CmBounds {
    /// `||J||_{C^k}`; orders above two reuse the second-order bound.
    pub fn norm(&self, k: usize) -> f64 {
        match k {
            0 => self.c0,
            1 => self.c0.max(self.c1),
            _ => self.c0.max(self.c1).max(self.c2),
        }
    }

    /// `||DJ||_{C^k}`.
    pub fn deriv_norm(&self, k: usize) -> f64 {
        match k {
            0 => self.c1,
            _ => self.c1.max(self.c2),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Standard,
    Conjugated { eps: f64, coeffs: Vec<f64> },
}

#[derive(Debug)]
pub struct AlmostComplexStructure {
    n: usize,
    kind: Kind,
    j0: Vec<f64>,
    bounds: OnceLock<CmBounds>,
}

impl Clone for AlmostComplexStructure {
    fn clone(&self) -> Self {
        Self { n: self.n, kind: self.kind.clone(), j0: self.j0.clone(), bounds: self.bounds.clone() }
    }
}

/// Per-thread work buffers for evaluating a structure.
#[derive(Debug, Clone)]
pub struct Scratch {
    q: Vec<f64>,
    q_inv: Vec<f64>,
    j: Vec<f64>,
    p: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
    dj: Vec<f64>,
}

impl Scratch {
    pub fn new(m: usize) -> Self {
        let z = vec![0.0; m * m];
        Self { q: z.clone(), q_inv: z.clone(), j: z.clone(), p: z.clone(), t1: z.clone(), t2: z.clone(), dj: z }
    }
}

impl AlmostComplexStructure {
    /// The constant structure of `C^n`.
    pub fn standard(n: usize) -> Self {
        assert!(n >= 1);
        Self { n, kind: Kind::Standard, j0: standard_complex_structure(n), bounds: OnceLock::new() }
    }

    /// A conjugated structure with bump amplitude `eps in [0, 0.5)`; the
    /// coefficients of `B` are drawn from `seed`.
    pub fn conjugated(n: usize, eps: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !(0.0..0.5).contains(&eps) {
            return Err(Error::InvalidParameter(format!("amplitude eps = {eps} must lie in [0, 0.5) to keep Q invertible")));
        }
        let m = 2 * n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs: Vec<f64> = (0..m * m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        // ||c||_F = 1/2 gives ||B(x)|| <= |x| / 2 <= 1 on the bump support.
        let norm = frobenius(&coeffs);
        coeffs.iter_mut().for_each(|c| *c *= 0.5 / norm);
        Ok(Self { n, kind: Kind::Conjugated { eps, coeffs }, j0: standard_complex_structure(n), bounds: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Real dimension `2n`.
    pub fn m(&self) -> usize {
        2 * self.n
    }

    pub fn is_constant(&self) -> bool {
        match &self.kind {
            Kind::Standard => true,
            Kind::Conjugated { eps, .. } => *eps == 0.0,
        }
    }

    pub fn scratch(&self) -> Scratch {
        Scratch::new(self.m())
    }

    /// Bump factor `phi(|x|^2)` and the linear part `L(y)_{ab} = sum_k c_abk y_k`.
    fn linear_part(coeffs: &[f64], y: &[f64], out: &mut [f64], m: usize) {
        for ab in 0..m * m {
            out[ab] = (0..m).map(|k| coeffs[ab * m + k] * y[k]).sum();
        }
    }

    /// Fills `ws.q`, `ws.q_inv` and `ws.j` for the point `x`.
    fn prepare(&self, x: &[f64], ws: &mut Scratch) -> Result<()> {
        let m = self.m();
        match &self.kind {
            Kind::Standard => {
                ws.j.copy_from_slice(&self.j0);
                Ok(())
            }
            Kind::Conjugated { eps, coeffs } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let phi = alpha_minus(r2 / 2.0 - 1.0);
                Self::linear_part(coeffs, x, &mut ws.q, m);
                for (ab, v) in ws.q.iter_mut().enumerate() {
                    *v *= eps * phi;
                    if ab / m == ab % m {
                        *v += 1.0;
                    }
                }
                if !invert(&ws.q, &mut ws.q_inv, m) {
                    return Err(Error::InvalidParameter("Q(x) is singular".into()));
                }
                matmul(&ws.q, &self.j0, &mut ws.t1, m);
                matmul(&ws.t1, &ws.q_inv, &mut ws.j, m);
                Ok(())
            }
        }
    }

    /// `J(x)` into `out` (row-major `2n x 2n`).
    pub fn eval(&self, x: &[f64], out: &mut [f64], ws: &mut Scratch) -> Result<()> {
        self.prepare(x, ws)?;
        out.copy_from_slice(&ws.j);
        Ok(())
    }

    /// `DJ_x(xi)` into `out`; `DJ = P J - J P` with `P = eps DB_x(xi) Q^{-1}`.
    pub fn deriv(&self, x: &[f64], xi: &[f64], out: &mut [f64], ws: &mut Scratch) -> Result<()> {
        let m = self.m();
        match &self.kind {
            Kind::Standard => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            Kind::Conjugated { eps, coeffs } => {
                self.prepare(x, ws)?;
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let phi = alpha_minus(r2 / 2.0 - 1.0);
                let dphi = alpha_minus_deriv(r2 / 2.0 - 1.0) * x.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
                Self::linear_part(coeffs, x, &mut ws.t1, m);
                Self::linear_part(coeffs, xi, &mut ws.t2, m);
                for ab in 0..m * m {
                    ws.t1[ab] = eps * (dphi * ws.t1[ab] + phi * ws.t2[ab]);
                }
                matmul(&ws.t1, &ws.q_inv, &mut ws.p, m);
                matmul(&ws.p, &ws.j, &mut ws.t1, m);
                matmul(&ws.j, &ws.p, &mut ws.t2, m);
                for ab in 0..m * m {
                    out[ab] = ws.t1[ab] - ws.t2[ab];
                }
                Ok(())
            }
        }
    }

    /// `J(x) v` into `out`.
    pub fn apply(&self, x: &[f64], v: &[f64], out: &mut [f64], ws: &mut Scratch) -> Result<()> {
        if let Kind::Standard = self.kind {
            apply_standard(v, out);
            return Ok(());
        }
        self.prepare(x, ws)?;
        matvec(&ws.j, v, out, self.m());
        Ok(())
    }

    /// `DJ_x(xi) v` into `out`.
    pub fn deriv_apply(&self, x: &[f64], xi: &[f64], v: &[f64], out: &mut [f64], ws: &mut Scratch) -> Result<()> {
        if let Kind::Standard = self.kind {
            out.iter_mut().for_each(|o| *o = 0.0);
            return Ok(());
        }
        let mut dj = std::mem::take(&mut ws.dj);
        let res = self.deriv(x, xi, &mut dj, ws);
        if res.is_ok() {
            matvec(&dj, v, out, self.m());
        }
        ws.dj = dj;
        res
    }

    /// Sampled sup-bounds on the box `[-2, 2]^{2n}`, computed once.
    pub fn cm_bounds(&self) -> CmBounds {
        *self.bounds.get_or_init(|| self.measure_bounds(4000, 0x5eed))
    }

    fn measure_bounds(&self, samples: usize, seed: u64) -> CmBounds {
        let m = self.m();
        if let Kind::Standard = self.kind {
            return CmBounds { c0: frobenius(&self.j0), c1: 0.0, c2: 0.0 };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ws = self.scratch();
        let (mut c0, mut c1, mut c2) = (0.0f64, 0.0f64, 0.0f64);
        let mut j = vec![0.0; m * m];
        let mut d1 = vec![0.0; m * m];
        let mut d2 = vec![0.0; m * m];
        let unit = |rng: &mut ChaCha8Rng| {
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = frobenius(&v).max(1e-300);
            v.into_iter().map(|a| a / n).collect::<Vec<_>>()
        };
        let h = 1e-4;
        for _ in 0..samples {
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            self.eval(&x, &mut j, &mut ws).expect("Q invertible on the box");
            c0 = c0.max(frobenius(&j));
            let xi = unit(&mut rng);
            self.deriv(&x, &xi, &mut d1, &mut ws).unwrap();
            c1 = c1.max(frobenius(&d1));
            let eta = unit(&mut rng);
            let xp: Vec<f64> = x.iter().zip(&eta).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&eta).map(|(a, b)| a - h * b).collect();
            self.deriv(&xp, &xi, &mut d1, &mut ws).unwrap();
            self.deriv(&xm, &xi, &mut d2, &mut ws).unwrap();
            let second = d1.iter().zip(&d2).map(|(a, b)| ((a - b) / (2.0 * h)).powi(2)).sum::<f64>().sqrt();
            c2 = c2.max(second);
        }
        CmBounds { c0, c1, c2 }
    }

    /// Node-wise `J(w) v`.
    pub fn apply_along(&self, w: &Field, v: &Field) -> Result<Field> {
        check_pair(self, w, v)?;
        let m = self.m();
        let mut out = Field::zeros(*v.grid(), v.dim());
        let row = v.grid().ns() * m;
        out.values_mut().par_chunks_mut(row).enumerate().try_for_each_init(
            || self.scratch(),
            |ws, (i, dst)| -> Result<()> {
                let (wr, vr) = (w.row(i), v.row(i));
                for j in 0..v.grid().ns() {
                    let k = j * m;
                    self.apply(&wr[k..k + m], &vr[k..k + m], &mut dst[k..k + m], ws)?;
                }
                Ok(())
            },
        )?;
        Ok(out)
    }

    /// Node-wise `DJ_w(xi) v`.
    pub fn deriv_apply_along(&self, w: &Field, xi: &Field, v: &Field) -> Result<Field> {
        check_pair(self, w, v)?;
        check_pair(self, xi, v)?;
        let m = self.m();
        let mut out = Field::zeros(*v.grid(), v.dim());
        if self.is_constant() {
            return Ok(out);
        }
        let row = v.grid().ns() * m;
        out.values_mut().par_chunks_mut(row).enumerate().try_for_each_init(
            || self.scratch(),
            |ws, (i, dst)| -> Result<()> {
                let (wr, xr, vr) = (w.row(i), xi.row(i), v.row(i));
                for j in 0..v.grid().ns() {
                    let k = j * m;
                    self.deriv_apply(&wr[k..k + m], &xr[k..k + m], &vr[k..k + m], &mut dst[k..k + m], ws)?;
                }
                Ok(())
            },
        )?;
        Ok(out)
    }
}

fn check_pair(j: &AlmostComplexStructure, a: &Field, b: &Field) -> Result<()> {
    if a.dim() != j.n() || b.dim() != j.n() || !a.grid().same_window(b.grid()) {
        return Err(Error::GridMismatch("structure, base map and vector field must share grid and dimension".into()));
    }
    Ok(())
}

/// A `2n x 2n` matrix at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: CylinderGrid,
    m: usize,
    data: Vec<f64>,
}

impl MatrixField {
    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }

    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let mm = self.m * self.m;
        let k = (i * self.grid.ns() + j) * mm;
        &self.data[k..k + mm]
    }

    /// The matrix entries as a field with `(2n)^2` real components per node.
    pub fn to_field(&self) -> Field {
        Field::from_values(self.grid, self.m * self.m / 2, self.data.clone()).expect("matrix field layout")
    }

    /// Largest node Frobenius norm.
    pub fn sup_norm(&self) -> f64 {
        self.data.chunks(self.m * self.m).map(frobenius).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &MatrixField) -> Result<f64> {
        if self.m != other.m || !self.grid.same_window(&other.grid) {
            return Err(Error::GridMismatch("matrix fields on different grids".into()));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Largest node Frobenius norm of the difference.
    pub fn sup_dist(&self, other: &MatrixField) -> Result<f64> {
        if self.m != other.m || !self.grid.same_window(&other.grid) {
            return Err(Error::GridMismatch("matrix fields on different grids".into()));
        }
        let mm = self.m * self.m;
        Ok(self
            .data
            .chunks(mm)
            .zip(other.data.chunks(mm))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max))
    }
}

/// `J(u(t, s))` at every node.
pub fn eval_j_along(j: &AlmostComplexStructure, u: &Field) -> Result<MatrixField> {
    let m = j.m();
    if u.dim() != j.n() {
        return Err(Error::GridMismatch("dimension mismatch".into()));
    }
    let mut ws = j.scratch();
    let mut data = vec![0.0; u.grid().nt() * u.grid().ns() * m * m];
    for (node, out) in data.chunks_mut(m * m).enumerate() {
        let (i, jj) = (node / u.grid().ns(), node % u.grid().ns());
        j.eval(u.at(i, jj), out, &mut ws)?;
    }
    Ok(MatrixField { grid: *u.grid(), m, data })
}

/// `DJ_{u(t, s)}(xi(t, s))` at every node.
pub fn dj_along(j: &AlmostComplexStructure, u: &Field, xi: &Field) -> Result<MatrixField> {
    let m = j.m();
    if u.dim() != j.n() || xi.dim() != j.n() || !u.grid().same_window(xi.grid()) {
        return Err(Error::GridMismatch("u and xi must share grid and dimension".into()));
    }
    let mut ws = j.scratch();
    let mut data = vec![0.0; u.grid().nt() * u.grid().ns() * m * m];
    for (node, out) in data.chunks_mut(m * m).enumerate() {
        let (i, jj) = (node / u.grid().ns(), node % u.grid().ns());
        j.deriv(u.at(i, jj), xi.at(i, jj), out, &mut ws)?;
    }
    Ok(MatrixField { grid: *u.grid(), m, data })
}
