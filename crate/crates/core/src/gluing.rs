//! Total gluing of map pairs, its inverse, the extended gluing and the
//! transfer map.
//!
//! Inputs live on half-cylinders: `u_-` on `[-L, 0]`, `u_+` on `[0, L]`. Glued
//! fields live in the `a`-dependent coordinate on `[-T_max, T_max]` with
//! `T_max = L - R`, except `v_+`, which is stored on `[-R, R]`. Translations
//! follow `tau_d xi (t) = xi(t + d)`, so
//! `tau_{-a} u_-(t, s) = u_-(t - R, s - theta)` and
//! `tau_a u_+(t, s) = u_+(t + R, s + theta)`; shifted inputs are zero outside
//! their half-cylinder, where every coefficient multiplying them vanishes.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{CutoffFamily, GluingData};
use crate::error::{Error, Result};
use crate::grid::{CylinderGrid, Field};

#[derive(Debug, Clone, PartialEq)]
pub struct GluedPair {
    pub v_minus: Field,
    pub v_plus: Field,
    pub gluing: GluingData,
    /// Rounding residuals of `(v_-, v_+)`, so that `v + residual` is the exact
    /// combination of the inputs to about `eps^2`. Inside the ramp `v_+` mixes
    /// `u_-(t - 2R)` with a far smaller `u_+`, and [`total_unglue`] needs these
    /// bits to recover `u_+`. `None` reads as zero.
    pub residual: Option<(Field, Field)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedGluing {
    pub v_hat_plus: Field,
    pub gluing: GluingData,
}

/// Which half of the extended gluing is kept when the other cut-off is frozen at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// `out(t) = ca(t) a(t) + cb(t) b(t)` node-wise, rows in parallel.
pub(crate) fn combine<F>(a: &Field, b: &Field, coeffs: F) -> Result<Field>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    if a.dim() != b.dim() || !a.grid().same_window(b.grid()) {
        return Err(Error::GridMismatch("combined fields must share a window".into()));
    }
    let grid = *a.grid();
    let mut out = Field::zeros(grid, a.dim());
    let w = grid.ns() * a.width();
    out.values_mut().par_chunks_mut(w).enumerate().for_each(|(i, dst)| {
        let (ca, cb) = coeffs(grid.t(i));
        for ((d, x), y) in dst.iter_mut().zip(a.row(i)).zip(b.row(i)) {
            *d = ca * x + cb * y;
        }
    });
    Ok(out)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Double-double `ca x + cb y` with `x = (x.0 + x.1)`, `y = (y.0 + y.1)`.
fn dd_combine(ca: f64, x: (f64, f64), cb: f64, y: (f64, f64)) -> (f64, f64) {
    let (p1, e1) = two_prod(ca, x.0);
    let (p2, e2) = two_prod(cb, y.0);
    let (s, e3) = two_sum(p1, p2);
    quick_two_sum(s, e1 + e2 + e3 + ca * x.1 + cb * y.1)
}

/// `(a / b)` for double-double `a`, `b`, rounded to `f64`.
fn dd_div(a: (f64, f64), b: (f64, f64)) -> f64 {
    let q1 = a.0 / b.0;
    let (p, e) = two_prod(q1, b.0);
    let r = ((a.0 - p) - e) + a.1 - q1 * b.1;
    q1 + r / b.0
}

/// [`combine`] with the rounding residual of every value.
fn combine_compensated<F>(a: &Field, b: &Field, coeffs: F) -> Result<(Field, Field)>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    if a.dim() != b.dim() || !a.grid().same_window(b.grid()) {
        return Err(Error::GridMismatch("combined fields must share a window".into()));
    }
    let grid = *a.grid();
    let mut hi = Field::zeros(grid, a.dim());
    let mut lo = Field::zeros(grid, a.dim());
    let w = grid.ns() * a.width();
    hi.values_mut().par_chunks_mut(w).zip(lo.values_mut().par_chunks_mut(w)).enumerate().for_each(|(i, (dh, dl))| {
        let (ca, cb) = coeffs(grid.t(i));
        for (((h, l), x), y) in dh.iter_mut().zip(dl.iter_mut()).zip(a.row(i)).zip(b.row(i)) {
            (*h, *l) = dd_combine(ca, (*x, 0.0), cb, (*y, 0.0));
        }
    });
    Ok((hi, lo))
}

/// Coefficients `(A, B)` of `v_hat = A tau_{-a} u_- + B tau_a u_+`.
pub fn extended_coefficients(fam: &CutoffFamily, t: f64) -> (f64, f64) {
    let (gm, gp) = (fam.gamma_minus(t), fam.gamma_plus(t));
    let (bm, bp) = (fam.beta_minus(t), fam.beta_plus(t));
    (gm * gp * bp + 1.0 - gm, gm * gp * bm + 1.0 - gp)
}

/// Coefficients of the one-sided extended gluing: `Plus` freezes `gamma_- = 1`,
/// `Minus` freezes `gamma_+ = 1`.
pub fn one_sided_coefficients(fam: &CutoffFamily, t: f64, side: Side) -> (f64, f64) {
    let (bm, bp) = (fam.beta_minus(t), fam.beta_plus(t));
    match side {
        Side::Plus => {
            let gp = fam.gamma_plus(t);
            (gp * bp, gp * bm + 1.0 - gp)
        }
        Side::Minus => {
            let gm = fam.gamma_minus(t);
            (gm * bp + 1.0 - gm, gm * bm)
        }
    }
}

/// Validates an input pair and returns the shared half-length `L`.
pub fn check_pair(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<f64> {
    let (gm, gp) = (u_minus.grid(), u_plus.grid());
    gm.check_compatible(gp)?;
    if u_minus.dim() != u_plus.dim() {
        return Err(Error::GridMismatch(format!("dimensions {} and {}", u_minus.dim(), u_plus.dim())));
    }
    if (gp.h_t() - g.h_t).abs() > 1e-12 * g.h_t || (gp.h_s() - g.h_s).abs() > 1e-12 * g.h_s {
        return Err(Error::GridMismatch(format!(
            "gluing data steps ({}, {}) differ from grid steps ({}, {})",
            g.h_t,
            g.h_s,
            gp.h_t(),
            gp.h_s()
        )));
    }
    let tol = 1e-9 * g.h_t;
    if gm.t_max().abs() > tol || gp.t_min().abs() > tol {
        return Err(Error::GridMismatch("u_- must end and u_+ must start at t = 0".into()));
    }
    let len = gp.t_max();
    if (gm.t_min() + len).abs() > tol {
        return Err(Error::GridMismatch(format!("half-cylinders of lengths {} and {}", -gm.t_min(), len)));
    }
    if len - g.r < g.d + g.l + 3.0 {
        return Err(Error::InvalidParameter(format!(
            "half-length {len} too short for R = {} (need at least R + d + l + 3)",
            g.r
        )));
    }
    Ok(len)
}

/// The `a`-line grid `[-T_max, T_max]` for inputs of half-length `len`.
pub fn a_line(u_plus: &Field, len: f64, r: f64) -> Result<CylinderGrid> {
    let t_max = len - r;
    CylinderGrid::with_step(-t_max, t_max, u_plus.grid().h_t(), u_plus.grid().ns())
}

/// `tau_{-a} u_-` and `tau_a u_+` on the `a`-line.
pub fn shifted_inputs(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<(Field, Field, CylinderGrid)> {
    let len = check_pair(u_minus, u_plus, g)?;
    let line = a_line(u_plus, len, g.r)?;
    let a = u_minus.translate_ts(-g.r, -g.theta)?.reframe(&line)?;
    let b = u_plus.translate_ts(g.r, g.theta)?.reframe(&line)?;
    Ok((a, b, line))
}

/// `(v_-, v_+) = T_beta (tau_{-a} u_-, tau_a u_+)` node-wise.
pub fn total_glue(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<GluedPair> {
    let (a, b, _) = shifted_inputs(u_minus, u_plus, g)?;
    let fam = g.family();
    let (v_minus, lo_minus) = combine_compensated(&a, &b, |t| (fam.beta_minus(t), -fam.beta_plus(t)))?;
    let (v_plus, lo_plus) = combine_compensated(&a, &b, |t| (fam.beta_plus(t), fam.beta_minus(t)))?;
    Ok(GluedPair {
        v_minus,
        v_plus: v_plus.restrict(-g.r, g.r)?,
        gluing: *g,
        residual: Some((lo_minus, lo_plus.restrict(-g.r, g.r)?)),
    })
}

/// Inverse of [`total_glue`], evaluated in double-double; returns `(u_-, u_+)` on `[-L, 0]` and `[0, L]`
/// with `L = T_max + R`.
pub fn total_unglue(pair: &GluedPair) -> Result<(Field, Field)> {
    let g = &pair.gluing;
    let line = *pair.v_minus.grid();
    if (line.t_min() + line.t_max()).abs() > 1e-9 * line.h_t() {
        return Err(Error::GridMismatch("v_- window must be symmetric".into()));
    }
    let v_plus = pair.v_plus.grid();
    if !v_plus.same_window(&line.window(-g.r, g.r)?) || pair.v_plus.dim() != pair.v_minus.dim() {
        return Err(Error::GridMismatch("v_+ must live on [-R, R] of the v_- lattice".into()));
    }
    let eta_plus = pair.v_plus.reframe(&line)?;
    let (lo_minus, lo_plus) = match &pair.residual {
        Some((lm, lp)) => {
            if !lm.grid().same_window(&line) || !lp.grid().same_window(v_plus) {
                return Err(Error::GridMismatch("residuals must share the windows of (v_-, v_+)".into()));
            }
            (lm.clone(), lp.reframe(&line)?)
        }
        None => (Field::zeros(line, pair.v_minus.dim()), Field::zeros(line, pair.v_minus.dim())),
    };
    let fam = g.family();
    let mut p1 = Field::zeros(line, pair.v_minus.dim());
    let mut p2 = Field::zeros(line, pair.v_minus.dim());
    let w = line.ns() * pair.v_minus.width();
    p1.values_mut().par_chunks_mut(w).zip(p2.values_mut().par_chunks_mut(w)).enumerate().for_each(|(i, (d1, d2))| {
        let t = line.t(i);
        let (bm, bp) = (fam.beta_minus(t), fam.beta_plus(t));
        let (q1, e1) = two_prod(bm, bm);
        let (q2, e2) = two_prod(bp, bp);
        let (det, e3) = two_sum(q1, q2);
        let det = quick_two_sum(det, e1 + e2 + e3);
        let rows = pair.v_minus.row(i).iter().zip(lo_minus.row(i)).zip(eta_plus.row(i).iter().zip(lo_plus.row(i)));
        for ((o1, o2), ((&hm, &lm), (&hp, &lp))) in d1.iter_mut().zip(d2.iter_mut()).zip(rows) {
            *o1 = dd_div(dd_combine(bm, (hm, lm), bp, (hp, lp)), det);
            *o2 = dd_div(dd_combine(-bp, (hm, lm), bm, (hp, lp)), det);
        }
    });
    let len = line.t_max() + g.r;
    let cm = CylinderGrid::with_step(-len, 0.0, line.h_t(), line.ns())?;
    let cp = CylinderGrid::with_step(0.0, len, line.h_t(), line.ns())?;
    let u_minus = p1.translate_ts(g.r, g.theta)?.reframe(&cm)?;
    let u_plus = p2.translate_ts(-g.r, -g.theta)?.reframe(&cp)?;
    Ok((u_minus, u_plus))
}

/// `v_hat = A tau_{-a} u_- + B tau_a u_+` (expanded two-coefficient form).
pub fn extended_glue(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<ExtendedGluing> {
    let (a, b, _) = shifted_inputs(u_minus, u_plus, g)?;
    let fam = g.family();
    let v_hat_plus = combine(&a, &b, |t| extended_coefficients(&fam, t))?;
    Ok(ExtendedGluing { v_hat_plus, gluing: *g })
}

/// The same gluing written as
/// `gamma_- gamma_+ (u_- (+)_a u_+) + (1 - gamma_-) tau_{-a} u_- + (1 - gamma_+) tau_a u_+`.
pub fn extended_glue_cutoff_form(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<ExtendedGluing> {
    let (a, b, _) = shifted_inputs(u_minus, u_plus, g)?;
    let fam = g.family();
    let ordinary = combine(&a, &b, |t| (fam.beta_plus(t), fam.beta_minus(t)))?;
    let mut v = ordinary.mul_profile(|t| fam.gamma_minus(t) * fam.gamma_plus(t));
    v.axpy(1.0, &combine(&a, &b, |t| (1.0 - fam.gamma_minus(t), 1.0 - fam.gamma_plus(t)))?)?;
    Ok(ExtendedGluing { v_hat_plus: v, gluing: *g })
}

/// One-sided extended gluing on the `a`-line (see [`one_sided_coefficients`]).
pub fn one_sided_glue(u_minus: &Field, u_plus: &Field, g: &GluingData, side: Side) -> Result<Field> {
    let (a, b, _) = shifted_inputs(u_minus, u_plus, g)?;
    let fam = g.family();
    combine(&a, &b, |t| one_sided_coefficients(&fam, t, side))
}

/// The transfer map is the coordinate identity: values unchanged, viewed on `S^a_-`.
pub fn transfer_pullback(ext: &ExtendedGluing) -> Field {
    ext.v_hat_plus.clone()
}

/// `(v_hat o Gamma o tau_{-R})(t, s) = v_hat(t - R, s - theta)`, on `[R - T_max, R + T_max]`.
pub fn pullback_shifted(ext: &ExtendedGluing) -> Result<Field> {
    let g = &ext.gluing;
    transfer_pullback(ext).translate_ts(-g.r, -g.theta)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: String,
    gluing: GluingData,
    files: Vec<String>,
}

fn write_field(path: &Path, f: &Field) -> Result<()> {
    f.write_to(BufWriter::new(File::create(path)?))
}

fn read_field(path: &Path) -> Result<Field> {
    Field::read_from(BufReader::new(File::open(path)?))
}

fn sibling(dir: &Path, stem: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{stem}{suffix}"))
}

fn write_sidecar(dir: &Path, stem: &str, kind: &str, g: &GluingData, files: Vec<String>) -> Result<()> {
    let car = Sidecar { kind: kind.into(), gluing: *g, files };
    let json = serde_json::to_string_pretty(&car).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(sibling(dir, stem, ".json"), json)?;
    Ok(())
}

fn read_sidecar(dir: &Path, stem: &str, kind: &str) -> Result<Sidecar> {
    let text = std::fs::read_to_string(sibling(dir, stem, ".json"))?;
    let car: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    if car.kind != kind {
        return Err(Error::Format(format!("expected a {kind} sidecar, found {}", car.kind)));
    }
    Ok(car)
}

impl GluedPair {
    /// Writes `<stem>_minus.cylf`, `<stem>_plus.cylf` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut names = vec![format!("{stem}_minus.cylf"), format!("{stem}_plus.cylf")];
        write_field(&dir.join(&names[0]), &self.v_minus)?;
        write_field(&dir.join(&names[1]), &self.v_plus)?;
        if let Some((lm, lp)) = &self.residual {
            names.extend([format!("{stem}_minus_lo.cylf"), format!("{stem}_plus_lo.cylf")]);
            write_field(&dir.join(&names[2]), lm)?;
            write_field(&dir.join(&names[3]), lp)?;
        }
        write_sidecar(dir, stem, "glued_pair", &self.gluing, names)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let car = read_sidecar(dir, stem, "glued_pair")?;
        if car.files.len() != 2 && car.files.len() != 4 {
            return Err(Error::Format("glued pair sidecar must list two or four files".into()));
        }
        let residual = match car.files.get(2..4) {
            Some([lm, lp]) => Some((read_field(&dir.join(lm))?, read_field(&dir.join(lp))?)),
            _ => None,
        };
        Ok(Self {
            v_minus: read_field(&dir.join(&car.files[0]))?,
            v_plus: read_field(&dir.join(&car.files[1]))?,
            gluing: car.gluing,
            residual,
        })
    }
}

impl ExtendedGluing {
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let names = vec![format!("{stem}_hat.cylf")];
        write_field(&dir.join(&names[0]), &self.v_hat_plus)?;
        write_sidecar(dir, stem, "extended_gluing", &self.gluing, names)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let car = read_sidecar(dir, stem, "extended_gluing")?;
        let file = car.files.first().ok_or_else(|| Error::Format("empty file list".into()))?;
        Ok(Self { v_hat_plus: read_field(&dir.join(file))?, gluing: car.gluing })
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::cutoffs::LengthVariant;

    const NS: usize = 16;
    const HT: f64 = 0.25;

    fn data(r: f64, theta_steps: i64) -> GluingData {
        let hs = 2.0 * PI / NS as f64;
        GluingData::new(r, theta_steps as f64 * hs, 1, LengthVariant::Desk, HT, hs).unwrap()
    }

    fn pair(g: &GluingData, seed: f64) -> (Field, Field) {
        let len = g.default_half_length();
        let gm = CylinderGrid::with_step(-len, 0.0, HT, NS).unwrap();
        let gp = CylinderGrid::with_step(0.0, len, HT, NS).unwrap();
        let um = Field::sample(gm, 1, |t, s, o| {
            o[0] = (0.7 * t).exp() * (s + seed).cos();
            o[1] = (0.9 * t).exp() * (2.0 * s - seed).sin();
        })
        .unwrap();
        let up = Field::sample(gp, 1, |t, s, o| {
            o[0] = (-0.8 * t).exp() * (s * seed).sin();
            o[1] = (-0.6 * t).exp() * (3.0 * s).cos() * seed;
        })
        .unwrap();
        (um, up)
    }

    #[test]
    fn roundtrip_is_exact() {
        let g = data(36.0, 3);
        let (um, up) = pair(&g, 0.4);
        let glued = total_glue(&um, &up, &g).unwrap();
        assert_eq!(glued.v_plus.grid().t_min(), -36.0);
        assert_eq!(glued.v_plus.grid().t_max(), 36.0);
        let (bm, bp) = total_unglue(&glued).unwrap();
        assert!(bm.max_abs_diff(&um).unwrap() < 1e-10);
        assert!(bp.max_abs_diff(&up).unwrap() < 1e-10);
        let again = total_glue(&bm, &bp, &g).unwrap();
        assert!(again.v_minus.max_abs_diff(&glued.v_minus).unwrap() < 1e-10);
        assert!(again.v_plus.max_abs_diff(&glued.v_plus).unwrap() < 1e-10);
    }

    #[test]
    fn roundtrip_recovers_small_tail_under_weights() {
        let g = data(49.0, 3);
        let (um, up) = pair(&g, 0.4);
        let glued = total_glue(&um, &up, &g).unwrap();
        let (_, bp) = total_unglue(&glued).unwrap();
        let params = crate::norms::WeightedNormParams::default();
        assert!(crate::norms::weighted_norm(&bp.sub(&up).unwrap(), &params).unwrap() < 1e-15);
        let plain = GluedPair { residual: None, ..glued };
        let (_, cp) = total_unglue(&plain).unwrap();
        assert!(crate::norms::weighted_norm(&cp.sub(&up).unwrap(), &params).unwrap() > 1e-12);
    }

    #[test]
    fn constant_regions() {
        let g = data(36.0, 2);
        let (um, up) = pair(&g, 1.1);
        let glued = total_glue(&um, &up, &g).unwrap();
        let vm = &glued.v_minus;
        let vp = glued.v_plus.reframe(vm.grid()).unwrap();
        let line = *vm.grid();
        let (l, d) = (g.l, g.d);
        let jt = 5;
        let sh = 2;
        for i in 0..line.nt() {
            let t = line.t(i);
            let mut um_at = [0.0; 2];
            let mut up_at = [0.0; 2];
            if t - g.r <= 1e-9 && t - g.r >= um.grid().t_min() - 1e-9 {
                um_at.copy_from_slice(um.at(um.grid().index_of(t - g.r).unwrap(), (jt + NS - sh) % NS));
            }
            if t + g.r >= -1e-9 && t + g.r <= up.grid().t_max() + 1e-9 {
                up_at.copy_from_slice(up.at(up.grid().index_of(t + g.r).unwrap(), (jt + sh) % NS));
            }
            if t < -d - l {
                assert!((vm.at(i, jt)[0] - um_at[0]).abs() < 1e-14);
                if t.abs() <= g.r {
                    assert!((vp.at(i, jt)[1] - up_at[1]).abs() < 1e-14);
                }
            } else if t > d + l {
                assert!((vm.at(i, jt)[0] + up_at[0]).abs() < 1e-14);
                if t <= g.r {
                    assert!((vp.at(i, jt)[1] - um_at[1]).abs() < 1e-14);
                }
            } else if t > -d + l && t < d - l {
                assert!((vm.at(i, jt)[0] - (um_at[0] - up_at[0])).abs() < 1e-14);
                assert!((vp.at(i, jt)[0] - (um_at[0] + up_at[0])).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn plateau_inverse_and_zero_input() {
        let g = data(36.0, 0);
        let line = CylinderGrid::with_step(-60.0, 60.0, HT, NS).unwrap();
        let eta_m = Field::sample(line, 1, |t, s, o| {
            o[0] = (-0.05 * t * t).exp() * s.cos();
            o[1] = 0.3;
        })
        .unwrap();
        let eta_p = Field::sample(line, 1, |_, s, o| {
            o[0] = s.sin();
            o[1] = -0.2;
        })
        .unwrap()
        .restrict(-36.0, 36.0)
        .unwrap();
        let pair = GluedPair { v_minus: eta_m.clone(), v_plus: eta_p.clone(), gluing: g, residual: None };
        let (um, up) = total_unglue(&pair).unwrap();
        // t = 0 on the plateau maps to t_- = -R and t_+ = R
        let i = line.index_of(0.0).unwrap();
        let ep = eta_p.at(eta_p.grid().index_of(0.0).unwrap(), 3);
        let em = eta_m.at(i, 3);
        let im = um.grid().index_of(-36.0).unwrap();
        let ip = up.grid().index_of(36.0).unwrap();
        for c in 0..2 {
            assert!((um.at(im, 3)[c] - 0.5 * (em[c] + ep[c])).abs() < 1e-14);
            assert!((up.at(ip, 3)[c] - 0.5 * (-em[c] + ep[c])).abs() < 1e-14);
        }
        let zero = GluedPair { v_minus: eta_m.scale(0.0), v_plus: eta_p.scale(0.0), gluing: g, residual: None };
        let (zm, zp) = total_unglue(&zero).unwrap();
        assert_eq!(zm.sup_norm() + zp.sup_norm(), 0.0);
    }

    #[test]
    fn extended_gluing_regions_and_forms() {
        let g = data(49.0, 1);
        let (um, up) = pair(&g, 0.8);
        let ext = extended_glue(&um, &up, &g).unwrap();
        let alt = extended_glue_cutoff_form(&um, &up, &g).unwrap();
        assert!(ext.v_hat_plus.max_abs_diff(&alt.v_hat_plus).unwrap() < 1e-12);
        let glued = total_glue(&um, &up, &g).unwrap();
        let (a, b, _) = shifted_inputs(&um, &up, &g).unwrap();
        let w = g.d + g.l;
        let inner = ext.v_hat_plus.restrict(-g.r, g.r).unwrap();
        let inside = |t: f64| t > -w - 1.0 && t < w + 1.0;
        assert!(inner.mask(inside).max_abs_diff(&glued.v_plus.mask(inside)).unwrap() < 1e-12);
        let right = |t: f64| t > w + 2.0;
        let left = |t: f64| t < -w - 2.0;
        assert!(ext.v_hat_plus.mask(right).max_abs_diff(&b.mask(right)).unwrap() < 1e-12);
        assert!(ext.v_hat_plus.mask(left).max_abs_diff(&a.mask(left)).unwrap() < 1e-12);
        // the pullback is the identity, then a shift by (-R, -theta)
        assert_eq!(transfer_pullback(&ext), ext.v_hat_plus);
        let pb = pullback_shifted(&ext).unwrap();
        let i = pb.grid().index_of(g.r + 1.0).unwrap();
        let k = ext.v_hat_plus.grid().index_of(1.0).unwrap();
        assert_eq!(pb.at(i, 4), ext.v_hat_plus.at(k, 3));
    }

    #[test]
    fn one_sided_agrees_where_cutoffs_are_trivial() {
        let g = data(36.0, 0);
        let fam = g.family();
        for k in 0..400 {
            let t = -50.0 + 0.25 * k as f64;
            let full = extended_coefficients(&fam, t);
            let close = |x: (f64, f64)| (x.0 - full.0).abs() < 1e-15 && (x.1 - full.1).abs() < 1e-15;
            if fam.gamma_minus(t) == 1.0 {
                assert!(close(one_sided_coefficients(&fam, t, Side::Plus)));
            }
            if fam.gamma_plus(t) == 1.0 {
                assert!(close(one_sided_coefficients(&fam, t, Side::Minus)));
            }
        }
    }

    #[test]
    fn linear_in_inputs() {
        let g = data(36.0, 1);
        let (a1, b1) = pair(&g, 0.3);
        let (a2, b2) = pair(&g, 1.7);
        let s = total_glue(&a1.add(&a2.scale(2.0)).unwrap(), &b1.add(&b2.scale(2.0)).unwrap(), &g).unwrap();
        let p1 = total_glue(&a1, &b1, &g).unwrap();
        let p2 = total_glue(&a2, &b2, &g).unwrap();
        let mut expect = p1.v_minus.clone();
        expect.axpy(2.0, &p2.v_minus).unwrap();
        assert!(s.v_minus.max_abs_diff(&expect).unwrap() < 1e-12);
        let zero = total_glue(&a1.scale(0.0), &b1.scale(0.0), &g).unwrap();
        assert_eq!(zero.v_minus.sup_norm() + zero.v_plus.sup_norm(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = data(36.0, 0);
        let (um, up) = pair(&g, 0.3);
        let short = up.restrict(0.0, 60.0).unwrap();
        assert!(total_glue(&um, &short, &g).is_err());
        let other = GluingData::new(36.0, 0.0, 1, LengthVariant::Desk, 0.5, 2.0 * PI / NS as f64).unwrap();
        assert!(total_glue(&um, &up, &other).is_err());
    }

    #[test]
    fn serialization_roundtrip() {
        let g = data(36.0, 1);
        let (um, up) = pair(&g, 0.3);
        let dir = tempfile::tempdir().unwrap();
        let glued = total_glue(&um, &up, &g).unwrap();
        glued.save(dir.path(), "pair").unwrap();
        assert_eq!(GluedPair::load(dir.path(), "pair").unwrap(), glued);
        let ext = extended_glue(&um, &up, &g).unwrap();
        ext.save(dir.path(), "ext").unwrap();
        assert_eq!(ExtendedGluing::load(dir.path(), "ext").unwrap(), ext);
        assert!(GluedPair::load(dir.path(), "ext").is_err());
    }
}
