//! Discretized cylinders `[t_min, t_max] x S^1` and sampled `C^n`-valued fields.
//!
//! A field stores `2n` real components per node (real and imaginary parts
//! interleaved), row-major in `t`, then `s`, then component. The circle has
//! circumference `2 pi` and is sampled periodically.
//!
//! Translations in `t` and rotations in `s` are exact index shifts, so every
//! shift amount must be a multiple of the corresponding grid step.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a real number sits on the lattice.
const ALIGN_TOL: f64 = 1e-8;

/// Returns `x / step` as an integer if `x` is a lattice multiple of `step`.
pub fn lattice_steps(what: &'static str, x: f64, step: f64) -> Result<i64> {
    let q = x / step;
    let k = q.round();
    if (q - k).abs() > ALIGN_TOL * k.abs().max(1.0) {
        return Err(Error::Misaligned { what, value: x, step });
    }
    Ok(k as i64)
}

/// Snaps `x` to the nearest multiple of `step`.
pub fn snap(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderGrid {
    t_min: f64,
    h_t: f64,
    nt: usize,
    ns: usize,
}

impl CylinderGrid {
    pub fn new(t_min: f64, t_max: f64, nt: usize, ns: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) || t_min >= t_max {
            return Err(Error::InvalidGrid(format!("need t_min < t_max, got [{t_min}, {t_max}]")));
        }
        if nt < 2 {
            return Err(Error::InvalidGrid(format!("need nt >= 2, got {nt}")));
        }
        if ns < 16 || ns % 2 != 0 {
            return Err(Error::InvalidGrid(format!("ns must be even and >= 16, got {ns}")));
        }
        let h_t = (t_max - t_min) / (nt - 1) as f64;
        Ok(Self { t_min, h_t, nt, ns })
    }

    /// Grid with step `h_t` covering `[t_min, t_max]`; both ends must be lattice points.
    pub fn with_step(t_min: f64, t_max: f64, h_t: f64, ns: usize) -> Result<Self> {
        let steps = lattice_steps("t_max - t_min", t_max - t_min, h_t)?;
        if steps < 1 {
            return Err(Error::InvalidGrid(format!("empty window [{t_min}, {t_max}]")));
        }
        let mut g = Self::new(t_min, t_max, steps as usize + 1, ns)?;
        g.h_t = h_t;
        Ok(g)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_min + (self.nt - 1) as f64 * self.h_t
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn h_t(&self) -> f64 {
        self.h_t
    }

    pub fn h_s(&self) -> f64 {
        2.0 * PI / self.ns as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t_min + i as f64 * self.h_t
    }

    pub fn s(&self, j: usize) -> f64 {
        j as f64 * self.h_s()
    }

    pub fn ts(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nt).map(|i| self.t(i))
    }

    /// Index of the node at `t`, which must be a lattice point inside the window.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = lattice_steps("t", t - self.t_min, self.h_t)?;
        if k < 0 || k as usize >= self.nt {
            return Err(Error::WindowOutOfRange { a: t, b: t, t_min: self.t_min, t_max: self.t_max() });
        }
        Ok(k as usize)
    }

    /// Number of steps from `self.t_min` to `other.t_min`; both grids must share the lattice.
    pub fn offset_to(&self, other: &CylinderGrid) -> Result<i64> {
        self.check_compatible(other)?;
        lattice_steps("window offset", other.t_min - self.t_min, self.h_t)
    }

    pub fn check_compatible(&self, other: &CylinderGrid) -> Result<()> {
        if self.ns != other.ns {
            return Err(Error::GridMismatch(format!("ns {} vs {}", self.ns, other.ns)));
        }
        if (self.h_t - other.h_t).abs() > 1e-12 * self.h_t {
            return Err(Error::GridMismatch(format!("h_t {} vs {}", self.h_t, other.h_t)));
        }
        Ok(())
    }

    /// Same lattice, new window `[a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Result<CylinderGrid> {
        lattice_steps("window start", a - self.t_min, self.h_t)?;
        let mut g = Self::with_step(a, b, self.h_t, self.ns)?;
        g.t_min = self.t_min + snap(a - self.t_min, self.h_t);
        Ok(g)
    }

    /// The grid translated so that node `t` becomes node `t - d`.
    pub fn translated(&self, d: f64) -> CylinderGrid {
        CylinderGrid { t_min: self.t_min - d, ..*self }
    }

    pub fn same_window(&self, other: &CylinderGrid) -> bool {
        self.nt == other.nt
            && self.ns == other.ns
            && (self.t_min - other.t_min).abs() <= 1e-9 * self.h_t
            && (self.h_t - other.h_t).abs() <= 1e-12 * self.h_t
    }
}

/// A sampled map from a cylinder grid into `C^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: CylinderGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: CylinderGrid, dim: usize) -> Self {
        assert!(dim >= 1, "complex dimension must be positive");
        Self { grid, dim, values: vec![0.0; grid.nt * grid.ns * 2 * dim] }
    }

    pub fn from_values(grid: CylinderGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.nt * grid.ns * 2 * dim {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{}x{} field",
                values.len(),
                grid.nt,
                grid.ns,
                2 * dim
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value #{pos}")));
        }
        Ok(Self { grid, dim, values })
    }

    /// Samples `f(t, s, out)` at every node; `out` has `2n` real slots.
    pub fn sample<F>(grid: CylinderGrid, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, f64, &mut [f64]),
    {
        let mut u = Self::zeros(grid, dim);
        let m = 2 * dim;
        for i in 0..grid.nt {
            let t = grid.t(i);
            for j in 0..grid.ns {
                let s = grid.s(j);
                let k = (i * grid.ns + j) * m;
                let slot = &mut u.values[k..k + m];
                f(t, s, slot);
                if slot.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("sample at (t, s) = ({t}, {s})")));
                }
            }
        }
        Ok(u)
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of real components per node (`2n`).
    pub fn width(&self) -> usize {
        2 * self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let m = self.width();
        let k = (i * self.grid.ns + j) * m;
        &self.values[k..k + m]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let m = self.width();
        let k = (i * self.grid.ns + j) * m;
        &mut self.values[k..k + m]
    }

    /// All values of row `i` (fixed `t`).
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.grid.ns * self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.grid.ns * self.width();
        &mut self.values[i * w..(i + 1) * w]
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.dim != other.dim || !self.grid.same_window(&other.grid) {
            return Err(Error::GridMismatch(format!(
                "fields on [{}, {}] (n = {}) and [{}, {}] (n = {})",
                self.grid.t_min(),
                self.grid.t_max(),
                self.dim,
                other.grid.t_min(),
                other.grid.t_max(),
                other.dim
            )));
        }
        Ok(())
    }

    /// `output(t, s) = u(t + d, s)` on the same window, zero where `t + d` leaves it.
    pub fn shift_t(&self, d: f64) -> Result<Field> {
        let k = lattice_steps("d", d, self.grid.h_t)?;
        let mut out = Field::zeros(self.grid, self.dim);
        let nt = self.grid.nt as i64;
        for i in 0..nt {
            let src = i + k;
            if (0..nt).contains(&src) {
                out.row_mut(i as usize).copy_from_slice(self.row(src as usize));
            }
        }
        Ok(out)
    }

    /// `output(t, s) = u(t + d, s)` with the window carried along: values are
    /// untouched and the window becomes `[t_min - d, t_max - d]`.
    pub fn translate(&self, d: f64) -> Result<Field> {
        lattice_steps("d", d, self.grid.h_t)?;
        Ok(Field { grid: self.grid.translated(d), dim: self.dim, values: self.values.clone() })
    }

    /// `output(t, s) = u(t, s + theta)` with periodic wrap.
    pub fn rotate_s(&self, theta: f64) -> Result<Field> {
        let k = lattice_steps("theta", theta, self.grid.h_s())?;
        let ns = self.grid.ns as i64;
        let k = k.rem_euclid(ns) as usize;
        if k == 0 {
            return Ok(self.clone());
        }
        let m = self.width();
        let mut out = Field::zeros(self.grid, self.dim);
        for i in 0..self.grid.nt {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for j in 0..self.grid.ns {
                let jj = (j + k) % self.grid.ns;
                dst[j * m..(j + 1) * m].copy_from_slice(&src[jj * m..(jj + 1) * m]);
            }
        }
        Ok(out)
    }

    /// `output(t, s) = u(t + dt, s + ds)`, window carried along.
    pub fn translate_ts(&self, dt: f64, ds: f64) -> Result<Field> {
        self.translate(dt)?.rotate_s(ds)
    }

    /// Fourth-order central difference in `s` (periodic).
    pub fn d_s(&self) -> Field {
        let ns = self.grid.ns;
        let m = self.width();
        let inv = 1.0 / (12.0 * self.grid.h_s());
        let mut out = Field::zeros(self.grid, self.dim);
        for i in 0..self.grid.nt {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for j in 0..ns {
                let jm2 = (j + ns - 2) % ns;
                let jm1 = (j + ns - 1) % ns;
                let jp1 = (j + 1) % ns;
                let jp2 = (j + 2) % ns;
                for c in 0..m {
                    dst[j * m + c] = (-src[jp2 * m + c] + 8.0 * src[jp1 * m + c]
                        - 8.0 * src[jm1 * m + c]
                        + src[jm2 * m + c])
                        * inv;
                }
            }
        }
        out
    }

    /// Fourth-order difference in `t`: central inside, one-sided at the two
    /// boundary circles on each end.
    pub fn d_t(&self) -> Result<Field> {
        let nt = self.grid.nt;
        if nt < 5 {
            return Err(Error::InvalidGrid(format!("d_t needs nt >= 5, got {nt}")));
        }
        const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
        const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
        let inv = 1.0 / (12.0 * self.grid.h_t);
        let w = self.grid.ns * self.width();
        let mut out = Field::zeros(self.grid, self.dim);
        for i in 0..nt {
            let dst = &mut out.values[i * w..(i + 1) * w];
            let (rows, coef, sign): ([usize; 5], [f64; 5], f64) = match i {
                0 => ([0, 1, 2, 3, 4], EDGE0, 1.0),
                1 => ([0, 1, 2, 3, 4], EDGE1, 1.0),
                _ if i == nt - 1 => ([nt - 1, nt - 2, nt - 3, nt - 4, nt - 5], EDGE0, -1.0),
                _ if i == nt - 2 => ([nt - 1, nt - 2, nt - 3, nt - 4, nt - 5], EDGE1, -1.0),
                _ => ([i - 2, i - 1, i, i + 1, i + 2], [1.0, -8.0, 0.0, 8.0, -1.0], 1.0),
            };
            for (r, c) in rows.iter().zip(coef) {
                if c == 0.0 {
                    continue;
                }
                let src = &self.values[r * w..(r + 1) * w];
                let f = sign * c * inv;
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += f * s;
                }
            }
        }
        Ok(out)
    }

    /// Copy of the sub-window `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Field> {
        let out_of_range = || Error::WindowOutOfRange {
            a,
            b,
            t_min: self.grid.t_min(),
            t_max: self.grid.t_max(),
        };
        if a >= b {
            return Err(out_of_range());
        }
        let i0 = self.grid.index_of(a).map_err(|e| match e {
            Error::WindowOutOfRange { .. } => out_of_range(),
            other => other,
        })?;
        let i1 = self.grid.index_of(b).map_err(|e| match e {
            Error::WindowOutOfRange { .. } => out_of_range(),
            other => other,
        })?;
        let grid = self.grid.window(self.grid.t(i0), self.grid.t(i1))?;
        let w = self.grid.ns * self.width();
        Ok(Field { grid, dim: self.dim, values: self.values[i0 * w..(i1 + 1) * w].to_vec() })
    }

    /// The field seen on another window of the same lattice: values are copied
    /// where the windows overlap and zero elsewhere.
    pub fn reframe(&self, target: &CylinderGrid) -> Result<Field> {
        let off = target.offset_to(&self.grid)?;
        let mut out = Field::zeros(*target, self.dim);
        let n_src = self.grid.nt as i64;
        for i in 0..target.nt {
            let src = i as i64 - off;
            if (0..n_src).contains(&src) {
                out.row_mut(i).copy_from_slice(self.row(src as usize));
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Field {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|a| *a *= c);
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Field) -> Result<()> {
        self.check_same(other)?;
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    /// Pointwise product with a real function of `t`.
    pub fn mul_profile<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        let mut out = self.clone();
        for i in 0..self.grid.nt {
            let c = f(self.grid.t(i));
            out.row_mut(i).iter_mut().for_each(|a| *a *= c);
        }
        out
    }

    /// Zeroes every row whose `t` fails `keep`.
    pub fn mask<F: Fn(f64) -> bool>(&self, keep: F) -> Field {
        let mut out = self.clone();
        for i in 0..self.grid.nt {
            if !keep(self.grid.t(i)) {
                out.row_mut(i).iter_mut().for_each(|a| *a = 0.0);
            }
        }
        out
    }

    /// Euclidean magnitude of the value at node `(i, j)`.
    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        self.at(i, j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum node magnitude.
    pub fn sup_norm(&self) -> f64 {
        self.values.chunks(self.width()).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    /// Maximum node magnitude over rows with `t` in `[a, b]`.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        let eps = 1e-9 * self.grid.h_t;
        (0..self.grid.nt)
            .filter(|&i| {
                let t = self.grid.t(i);
                t >= a - eps && t <= b + eps
            })
            .flat_map(|i| (0..self.grid.ns).map(move |j| (i, j)))
            .map(|(i, j)| self.magnitude(i, j))
            .fold(0.0, f64::max)
    }

    /// Maximum node magnitude over the outermost `fraction` of rows at the given end.
    pub fn tail_sup(&self, fraction: f64, upper_end: bool) -> f64 {
        let rows = ((self.grid.nt as f64 * fraction).ceil() as usize).clamp(1, self.grid.nt);
        let range = if upper_end { self.grid.nt - rows..self.grid.nt } else { 0..rows };
        range.flat_map(|i| (0..self.grid.ns).map(move |j| (i, j))).map(|(i, j)| self.magnitude(i, j)).fold(0.0, f64::max)
    }

    /// Largest absolute component difference; both fields must share a window.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Writes the `CYLF` binary format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"CYLF")?;
        w.write_all(&CYLF_VERSION.to_le_bytes())?;
        for x in [self.grid.nt, self.grid.ns, self.width()] {
            w.write_all(&(x as u32).to_le_bytes())?;
        }
        w.write_all(&self.grid.t_min().to_le_bytes())?;
        w.write_all(&self.grid.t_max().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Field> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CYLF" {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CYLF_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let nt = read_u32(&mut r)? as usize;
        let ns = read_u32(&mut r)? as usize;
        let width = read_u32(&mut r)? as usize;
        if width == 0 || width % 2 != 0 {
            return Err(Error::Format(format!("component count {width} is not 2n")));
        }
        let t_min = read_f64(&mut r)?;
        let t_max = read_f64(&mut r)?;
        let grid = CylinderGrid::new(t_min, t_max, nt, ns)?;
        let mut bytes = vec![0u8; nt * ns * width * 8];
        r.read_exact(&mut bytes)?;
        let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        Field::from_values(grid, width / 2, values)
    }
}

pub const CYLF_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
