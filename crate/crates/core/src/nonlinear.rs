//! The nonlinear part `N^R = (N_-, N_+)` of the glued section, its limit
//! `N^inf`, the error term `E^R = N^R - N^inf`, the operators `Phi_±` and the
//! block-commutation check.
//!
//! `N_-` is returned on `C_- = [-L, 0]` in `t_-`, `N_+` on `C_+ = [0, L]` in `t_+`.
//! Near `t_± = ±R` the piecewise form freezes `J` at the one-sided extended
//! gluing `w_+ = gamma_+ v_+ + (1 - gamma_+) tau_a u_+` (mirror for `w_-`),
//! which is the extended gluing wherever the two cut-off windows are apart and
//! reproduces the matrix form on the whole localization window.

use serde::{Deserialize, Serialize};

use crate::cutoffs::GluingData;
use crate::error::{Error, Result};
use crate::gluing::{self, combine, one_sided_glue, shifted_inputs, Side};
use crate::grid::{CylinderGrid, Field};
use crate::jstruct::AlmostComplexStructure;
use crate::linalg::{frobenius, matmul};

/// Absolute floor for overlap and form-equivalence tolerances.
const AGREE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Matrix,
    Piecewise,
    Infinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearResult {
    pub n_minus: Field,
    pub n_plus: Field,
    pub gluing: Option<GluingData>,
    pub form: Form,
    /// Derivative order guaranteed by the outputs when inputs carry `k`: `k - 1`.
    pub derivative_loss: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTerm {
    pub e_minus: Field,
    pub e_plus: Field,
    pub support_minus: (f64, f64),
    pub support_plus: (f64, f64),
}

/// `[R - d - l - 3, R + d + l + 3]` in `t_+`.
pub fn window_plus(g: &GluingData) -> (f64, f64) {
    let w = g.window_half_width();
    (g.r - w, g.r + w)
}

/// `[-R - d - l - 3, -R + d + l + 3]` in `t_-`.
pub fn window_minus(g: &GluingData) -> (f64, f64) {
    let w = g.window_half_width();
    (-g.r - w, -g.r + w)
}

fn half_grids(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<(CylinderGrid, CylinderGrid)> {
    let len = gluing::check_pair(u_minus, u_plus, g)?;
    if len < 2.0 * g.r {
        return Err(Error::InvalidParameter(format!(
            "half-length {len} must be at least 2R = {} so N is represented on all of C_±",
            2.0 * g.r
        )));
    }
    Ok((*u_minus.grid(), *u_plus.grid()))
}

/// `(w_- o tau_a, w_+ o tau_{-a})` on `C_-` and `C_+`: in `t_+`,
/// `w_+ o tau_{-a}(t, s) = A_+(t - R) u_-(t - 2R, s - 2 theta) + B_+(t - R) u_+(t, s)`.
pub fn one_sided_pullbacks(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<(Field, Field)> {
    let (cm, cp) = half_grids(u_minus, u_plus, g)?;
    let wm = one_sided_glue(u_minus, u_plus, g, Side::Minus)?.translate_ts(g.r, g.theta)?.reframe(&cm)?;
    let wp = one_sided_glue(u_minus, u_plus, g, Side::Plus)?.translate_ts(-g.r, -g.theta)?.reframe(&cp)?;
    Ok((wm, wp))
}

/// `N^inf = (J(u_-) d_s u_-, J(u_+) d_s u_+)`.
pub fn n_infinity(u_minus: &Field, u_plus: &Field, j: &AlmostComplexStructure) -> Result<NonlinearResult> {
    Ok(NonlinearResult {
        n_minus: j.apply_along(u_minus, &u_minus.d_s())?,
        n_plus: j.apply_along(u_plus, &u_plus.d_s())?,
        gluing: None,
        form: Form::Infinity,
        derivative_loss: 1,
    })
}

/// The four-matrix product
/// `diag(tau_a, tau_{-a}) T_beta^{-1} diag(J(v_hat), J(v_+)) T_beta (tau_{-a} d_s u_-, tau_a d_s u_+)`
/// evaluated on the `a`-line, `v_+` zero beyond `[-R, R]`.
pub fn n_matrix_form(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<NonlinearResult> {
    let (cm, cp) = half_grids(u_minus, u_plus, g)?;
    let (a, b, line) = shifted_inputs(&u_minus.d_s(), &u_plus.d_s(), g)?;
    let v_hat = gluing::extended_glue(u_minus, u_plus, g)?.v_hat_plus;
    let v_plus = gluing::total_glue(u_minus, u_plus, g)?.v_plus.reframe(&line)?;
    let fam = g.family();
    let sm = fam.splicing();
    let p1 = combine(&a, &b, |t| (fam.beta_minus(t), -fam.beta_plus(t)))?;
    let p2 = combine(&a, &b, |t| (fam.beta_plus(t), fam.beta_minus(t)))?;
    let q1 = j.apply_along(&v_hat, &p1)?;
    let q2 = j.apply_along(&v_plus, &p2)?;
    let r1 = combine(&q1, &q2, |t| {
        let m = sm.inverse(t);
        (m[0][0], m[0][1])
    })?;
    let r2 = combine(&q1, &q2, |t| {
        let m = sm.inverse(t);
        (m[1][0], m[1][1])
    })?;
    Ok(NonlinearResult {
        n_minus: r1.translate_ts(g.r, g.theta)?.reframe(&cm)?,
        n_plus: r2.translate_ts(-g.r, -g.theta)?.reframe(&cp)?,
        gluing: Some(*g),
        form: Form::Matrix,
        derivative_loss: 1,
    })
}

/// Merges the outer and window formulas row by row; rows in both open ranges
/// must agree to within the tolerance.
pub(crate) fn merge_regions(outer: &Field, inner: &Field, in_outer: impl Fn(f64) -> bool, in_inner: impl Fn(f64) -> bool) -> Result<Field> {
    let scale = outer.sup_norm().max(inner.sup_norm()).max(1.0);
    let tol = AGREE_TOL * scale;
    let grid = *outer.grid();
    let mut out = Field::zeros(grid, outer.dim());
    for i in 0..grid.nt() {
        let t = grid.t(i);
        let (o, n) = (in_outer(t), in_inner(t));
        if o && n {
            let diff = outer.row(i).iter().zip(inner.row(i)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if diff > tol {
                return Err(Error::OverlapDisagreement { t, diff, tol });
            }
        }
        let src = if n { inner } else { outer };
        if !(o || n) {
            return Err(Error::Inconsistent(format!("t = {t} is covered by no region formula")));
        }
        out.row_mut(i).copy_from_slice(src.row(i));
    }
    Ok(out)
}

/// The piecewise form: `J(u_±) d_s u_±` away from `t_± = ±R`, `J(w_±) d_s u_±`
/// on the localization windows, with both formulas checked on the overlaps.
pub fn n_piecewise(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<NonlinearResult> {
    let (wm, wp) = one_sided_pullbacks(u_minus, u_plus, g)?;
    let (dm, dp) = (u_minus.d_s(), u_plus.d_s());
    let w = g.d + g.l;
    let r = g.r;
    let n_plus = merge_regions(
        &j.apply_along(u_plus, &dp)?,
        &j.apply_along(&wp, &dp)?,
        |t| t < r - w - 2.0 || t > r + w + 2.0,
        |t| t > r - w - 3.0 && t < r + w + 3.0,
    )?;
    let n_minus = merge_regions(
        &j.apply_along(u_minus, &dm)?,
        &j.apply_along(&wm, &dm)?,
        |t| t < -r - w - 2.0 || t > -r + w + 2.0,
        |t| t > -r - w - 3.0 && t < -r + w + 3.0,
    )?;
    Ok(NonlinearResult { n_minus, n_plus, gluing: Some(*g), form: Form::Piecewise, derivative_loss: 1 })
}

/// `E^R` in both the subtraction form and the product form
/// `{J(w_+ o tau_{-a}) - J(u_+)} d_s u_+` (mirror for `E_-`), verified equal
/// and supported in the windows.
pub fn error_term(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<ErrorTerm> {
    let pw = n_piecewise(u_minus, u_plus, g, j)?;
    let inf = n_infinity(u_minus, u_plus, j)?;
    let sub_minus = pw.n_minus.sub(&inf.n_minus)?;
    let sub_plus = pw.n_plus.sub(&inf.n_plus)?;
    let (prod_minus, prod_plus) = error_term_product(u_minus, u_plus, g, j)?;
    let scale = inf.n_minus.sup_norm().max(inf.n_plus.sup_norm()).max(1.0);
    let dev = sub_minus.max_abs_diff(&prod_minus)?.max(sub_plus.max_abs_diff(&prod_plus)?);
    if dev > AGREE_TOL * scale {
        return Err(Error::Inconsistent(format!("subtraction and product forms of E differ by {dev:e}")));
    }
    let (sm, sp) = (window_minus(g), window_plus(g));
    let leak = sub_minus
        .mask(|t| t <= sm.0 || t >= sm.1)
        .sup_norm()
        .max(sub_plus.mask(|t| t <= sp.0 || t >= sp.1).sup_norm());
    if leak > 1e-12 * scale {
        return Err(Error::Inconsistent(format!("error term leaks {leak:e} outside its window")));
    }
    Ok(ErrorTerm { e_minus: sub_minus, e_plus: sub_plus, support_minus: sm, support_plus: sp })
}

/// Product form of `E^R` alone, zero outside the windows by construction.
pub fn error_term_product(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<(Field, Field)> {
    let (wm, wp) = one_sided_pullbacks(u_minus, u_plus, g)?;
    let (dm, dp) = (u_minus.d_s(), u_plus.d_s());
    let (sm, sp) = (window_minus(g), window_plus(g));
    let em = j.apply_along(&wm, &dm)?.sub(&j.apply_along(u_minus, &dm)?)?.mask(|t| t > sm.0 && t < sm.1);
    let ep = j.apply_along(&wp, &dp)?.sub(&j.apply_along(u_plus, &dp)?)?.mask(|t| t > sp.0 && t < sp.1);
    Ok((em, ep))
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// Nodes where `|w - u|` exceeds this use the subtraction form.
const RESOLVE_BELOW: f64 = 1e-4;

/// `E^R` without cancellation, for when it falls below the rounding level of
/// `J`. Where `|w - u|` is small, `J(w) - J(u) = int_0^1 DJ_{u + s(w - u)}(w - u) ds`
/// by 4-point Gauss-Legendre (error of order `|w - u|^8`); elsewhere the
/// plain product form.
pub fn error_term_resolved(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<(Field, Field)> {
    let (wm, wp) = one_sided_pullbacks(u_minus, u_plus, g)?;
    let (direct_minus, direct_plus) = error_term_product(u_minus, u_plus, g, j)?;
    let one = |u: &Field, w: &Field, direct: &Field, win: (f64, f64)| -> Result<Field> {
        let gap = w.sub(u)?;
        let du = u.d_s();
        let mut acc = Field::zeros(*u.grid(), u.dim());
        for (node, weight) in GAUSS4 {
            let mut x = u.clone();
            x.axpy(node, &gap)?;
            acc.axpy(weight, &j.deriv_apply_along(&x, &gap, &du)?)?;
        }
        let grid = *u.grid();
        for i in 0..grid.nt() {
            for jj in 0..grid.ns() {
                if gap.magnitude(i, jj) > RESOLVE_BELOW {
                    acc.at_mut(i, jj).copy_from_slice(direct.at(i, jj));
                }
            }
        }
        Ok(acc.mask(|t| t > win.0 && t < win.1))
    };
    Ok((
        one(u_minus, &wm, &direct_minus, window_minus(g))?,
        one(u_plus, &wp, &direct_plus, window_plus(g))?,
    ))
}

/// `Phi_+(v_+) = d_t v_+ + J(v_+) d_s v_+` and
/// `Phi_-(v_-) = d_t v_- + J(v_hat) d_s v_-` with the connection term set to zero.
pub fn phi_pair(v_minus: &Field, v_plus: &Field, v_hat: &Field, j: &AlmostComplexStructure) -> Result<(Field, Field)> {
    let phi_minus = v_minus.d_t()?.add(&j.apply_along(v_hat, &v_minus.d_s())?)?;
    let phi_plus = v_plus.d_t()?.add(&j.apply_along(v_plus, &v_plus.d_s())?)?;
    Ok((phi_minus, phi_plus))
}

/// Largest Frobenius norm over nodes with `|t| < d + l` of the commutator
/// `[diag(J(w_1), J(w_2)), T_beta (x) I]`.
pub fn commutator_check_blocks(w1: &Field, w2: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<f64> {
    if !w1.grid().same_window(w2.grid()) {
        return Err(Error::GridMismatch("commutator blocks on different grids".into()));
    }
    let m = j.m();
    let big = 2 * m;
    let fam = g.family();
    let reach = g.d + g.l;
    let grid = *w1.grid();
    let mut ws = j.scratch();
    let (mut j1, mut j2) = (vec![0.0; m * m], vec![0.0; m * m]);
    let (mut x, mut t_mat) = (vec![0.0; big * big], vec![0.0; big * big]);
    let (mut xt, mut tx) = (vec![0.0; big * big], vec![0.0; big * big]);
    let mut worst = 0.0f64;
    for i in 0..grid.nt() {
        let t = grid.t(i);
        if t <= -reach || t >= reach {
            continue;
        }
        let tb = fam.splicing().at(t);
        t_mat.iter_mut().for_each(|v| *v = 0.0);
        for (bi, row) in tb.iter().enumerate() {
            for (bj, c) in row.iter().enumerate() {
                for k in 0..m {
                    t_mat[(bi * m + k) * big + bj * m + k] = *c;
                }
            }
        }
        for jj in 0..grid.ns() {
            j.eval(w1.at(i, jj), &mut j1, &mut ws)?;
            j.eval(w2.at(i, jj), &mut j2, &mut ws)?;
            x.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..m {
                for c in 0..m {
                    x[r * big + c] = j1[r * m + c];
                    x[(m + r) * big + m + c] = j2[r * m + c];
                }
            }
            matmul(&x, &t_mat, &mut xt, big);
            matmul(&t_mat, &x, &mut tx, big);
            xt.iter_mut().zip(&tx).for_each(|(a, b)| *a -= b);
            worst = worst.max(frobenius(&xt));
        }
    }
    Ok(worst)
}

/// The commutator with equal blocks `diag(J(w), J(w))`.
pub fn commutator_check(w: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<f64> {
    commutator_check_blocks(w, w, g, j)
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

    /// Slowly decaying pair so the maps are visible near `t = ±R`.
    fn pair(g: &GluingData, amp: f64, phase: f64) -> (Field, Field) {
        let len = g.default_half_length();
        let gm = CylinderGrid::with_step(-len, 0.0, HT, NS).unwrap();
        let gp = CylinderGrid::with_step(0.0, len, HT, NS).unwrap();
        let um = Field::sample(gm, 1, |t, s, o| {
            o[0] = amp * (0.04 * t).exp() * (s + phase).cos();
            o[1] = amp * (0.05 * t).exp() * (2.0 * s).sin();
        })
        .unwrap();
        let up = Field::sample(gp, 1, |t, s, o| {
            o[0] = amp * (-0.05 * t).exp() * (s - phase).sin();
            o[1] = amp * (-0.03 * t).exp() * (s + 2.0 * phase).cos();
        })
        .unwrap();
        (um, up)
    }

    #[test]
    fn standard_structure_closed_form() {
        let g = data(36.0, 2);
        let (um, up) = pair(&g, 1.0, 0.3);
        let j = AlmostComplexStructure::standard(1);
        let mf = n_matrix_form(&um, &up, &g, &j).unwrap();
        let inf = n_infinity(&um, &up, &j).unwrap();
        assert!(mf.n_minus.max_abs_diff(&inf.n_minus).unwrap() < 1e-12);
        assert!(mf.n_plus.max_abs_diff(&inf.n_plus).unwrap() < 1e-12);
        let e = error_term(&um, &up, &g, &j).unwrap();
        assert_eq!(e.e_plus.sup_norm() + e.e_minus.sup_norm(), 0.0);
    }

    #[test]
    fn zero_and_s_independent_inputs() {
        let g = data(36.0, 0);
        let j = AlmostComplexStructure::conjugated(1, 0.3, 2).unwrap();
        let (um, up) = pair(&g, 1.0, 0.0);
        let zm = um.scale(0.0);
        let zp = up.scale(0.0);
        let n = n_matrix_form(&zm, &zp, &g, &j).unwrap();
        assert_eq!(n.n_minus.sup_norm() + n.n_plus.sup_norm(), 0.0);
        let fm = Field::sample(*um.grid(), 1, |t, _, o| {
            o[0] = (0.1 * t).exp();
            o[1] = 0.5 * (0.1 * t).exp();
        })
        .unwrap();
        let fp = Field::sample(*up.grid(), 1, |t, _, o| {
            o[0] = (-0.1 * t).exp();
            o[1] = 0.0;
        })
        .unwrap();
        let n = n_piecewise(&fm, &fp, &g, &j).unwrap();
        assert!(n.n_minus.sup_norm() + n.n_plus.sup_norm() < 1e-12);
    }

    #[test]
    fn piecewise_equals_matrix_form() {
        let j = AlmostComplexStructure::conjugated(1, 0.3, 7).unwrap();
        for (r, th, amp) in [(36.0, 0, 1.2), (49.0, 3, 1.0), (36.0, 5, 0.8)] {
            let g = data(r, th);
            let (um, up) = pair(&g, amp, 0.7);
            let mf = n_matrix_form(&um, &up, &g, &j).unwrap();
            let pw = n_piecewise(&um, &up, &g, &j).unwrap();
            assert!(mf.n_minus.max_abs_diff(&pw.n_minus).unwrap() < 1e-10);
            assert!(mf.n_plus.max_abs_diff(&pw.n_plus).unwrap() < 1e-10);
            let inf = n_infinity(&um, &up, &j).unwrap();
            // the window actually matters for this data
            assert!(pw.n_plus.max_abs_diff(&inf.n_plus).unwrap() > 1e-6);
        }
    }

    #[test]
    fn two_sided_formula_on_the_ramp() {
        let j = AlmostComplexStructure::conjugated(1, 0.3, 7).unwrap();
        let g = data(36.0, 1);
        let (um, up) = pair(&g, 1.2, 0.2);
        let pw = n_piecewise(&um, &up, &g, &j).unwrap();
        let glued = gluing::total_glue(&um, &up, &g).unwrap();
        // tau_{-R} J(v_+) d_s u_+ and tau_R J(v_+) d_s u_- on |t| < d + l
        let vp_plus = glued.v_plus.translate_ts(-g.r, -g.theta).unwrap().reframe(up.grid()).unwrap();
        let vp_minus = glued.v_plus.translate_ts(g.r, g.theta).unwrap().reframe(um.grid()).unwrap();
        let two_plus = j.apply_along(&vp_plus, &up.d_s()).unwrap();
        let two_minus = j.apply_along(&vp_minus, &um.d_s()).unwrap();
        let w = g.d + g.l;
        let keep_p = |t: f64| t > g.r - w && t < g.r + w;
        let keep_m = |t: f64| t > -g.r - w && t < -g.r + w;
        assert!(pw.n_plus.mask(keep_p).max_abs_diff(&two_plus.mask(keep_p)).unwrap() < 1e-12);
        assert!(pw.n_minus.mask(keep_m).max_abs_diff(&two_minus.mask(keep_m)).unwrap() < 1e-12);
        // plain region
        let inf = n_infinity(&um, &up, &j).unwrap();
        let early = |t: f64| t < g.r - w - 2.0;
        assert_eq!(pw.n_plus.mask(early), inf.n_plus.mask(early));
    }

    #[test]
    fn full_extended_gluing_misses_the_left_strip() {
        let j = AlmostComplexStructure::conjugated(1, 0.3, 7).unwrap();
        let g = data(36.0, 0);
        let (um, up) = pair(&g, 1.2, 0.7);
        let ext = gluing::extended_glue(&um, &up, &g).unwrap();
        let v = gluing::pullback_shifted(&ext).unwrap().reframe(up.grid()).unwrap();
        let alt = j.apply_along(&v, &up.d_s()).unwrap();
        let mf = n_matrix_form(&um, &up, &g, &j).unwrap();
        let w = g.d + g.l;
        let strip = |t: f64| t > g.r - w - 3.0 && t < g.r - w - 1.0;
        let rest = |t: f64| t >= g.r - w - 1.0 && t < g.r + w + 3.0;
        assert!(alt.mask(strip).max_abs_diff(&mf.n_plus.mask(strip)).unwrap() > 1e-6);
        assert!(alt.mask(rest).max_abs_diff(&mf.n_plus.mask(rest)).unwrap() < 1e-12);
    }

    #[test]
    fn error_term_is_localized() {
        let j = AlmostComplexStructure::conjugated(1, 0.3, 7).unwrap();
        let g = data(36.0, 2);
        let (um, up) = pair(&g, 1.2, 0.4);
        let e = error_term(&um, &up, &g, &j).unwrap();
        let (a, b) = e.support_plus;
        assert!(e.e_plus.mask(|t| t <= a || t >= b).sup_norm() <= 1e-12);
        assert!(e.e_plus.sup_norm() > 1e-6);
        let (a, b) = e.support_minus;
        assert!(e.e_minus.mask(|t| t <= a || t >= b).sup_norm() <= 1e-12);
    }

    #[test]
    fn resolved_error_term() {
        let g = data(36.0, 2);
        let (um, up) = pair(&g, 0.8, 0.4);
        let j = AlmostComplexStructure::conjugated(1, 0.3, 11).unwrap();
        let e = error_term(&um, &up, &g, &j).unwrap();
        let (rm, rp) = error_term_resolved(&um, &up, &g, &j).unwrap();
        assert!(rm.max_abs_diff(&e.e_minus).unwrap() < 1e-13);
        assert!(rp.max_abs_diff(&e.e_plus).unwrap() < 1e-13);
        // far below the rounding level of J the subtraction form is lost
        let tiny = (um.scale(1e-20), up.scale(1e-20));
        let (rm, rp) = error_term_resolved(&tiny.0, &tiny.1, &g, &j).unwrap();
        let (em, ep) = error_term_product(&tiny.0, &tiny.1, &g, &j).unwrap();
        assert!(em.sup_norm() + ep.sup_norm() < 1e-30);
        assert!(rm.sup_norm() > 1e-42 && rp.sup_norm() > 1e-42);
        let scaled = error_term_resolved(&um.scale(1e-5), &up.scale(1e-5), &g, &j).unwrap();
        let ratio = scaled.1.sup_norm() / rp.sup_norm();
        assert!((ratio / 1e30 - 1.0).abs() < 1e-6, "{ratio:e}");
    }

    #[test]
    fn theta_covariance() {
        let j = AlmostComplexStructure::conjugated(1, 0.3, 3).unwrap();
        let g = data(36.0, 3);
        let g0 = data(36.0, 0);
        let (um, up) = pair(&g, 1.1, 0.9);
        let n = n_piecewise(&um, &up, &g, &j).unwrap();
        let rotated = um.rotate_s(-2.0 * g.theta).unwrap();
        let n0 = n_piecewise(&rotated, &up, &g0, &j).unwrap();
        assert!(n.n_plus.max_abs_diff(&n0.n_plus).unwrap() < 1e-12);
        let back = n0.n_minus.rotate_s(2.0 * g.theta).unwrap();
        assert!(n.n_minus.max_abs_diff(&back).unwrap() < 1e-12);
    }

    #[test]
    fn n_infinity_closed_form() {
        let grid = CylinderGrid::with_step(0.0, 5.0, 0.25, 64).unwrap();
        let up = Field::sample(grid, 1, |t, s, o| {
            o[0] = (-t).exp() * s.cos();
            o[1] = (-t).exp() * s.sin();
        })
        .unwrap();
        let j = AlmostComplexStructure::standard(1);
        let n = n_infinity(&up, &up, &j).unwrap();
        let expect = Field::sample(grid, 1, |t, s, o| {
            o[0] = -(-t).exp() * s.cos();
            o[1] = -(-t).exp() * s.sin();
        })
        .unwrap();
        assert!(n.n_plus.max_abs_diff(&expect).unwrap() < 1e-5);
    }

    #[test]
    fn phi_vanishes_on_holomorphic_maps() {
        let grid = CylinderGrid::with_step(-4.0, 4.0, 0.01, 64).unwrap();
        // e^{-(t + i s)}
        let v = Field::sample(grid, 1, |t, s, o| {
            o[0] = (-t).exp() * s.cos();
            o[1] = -(-t).exp() * s.sin();
        })
        .unwrap();
        let j = AlmostComplexStructure::standard(1);
        let (pm, pp) = phi_pair(&v, &v, &v, &j).unwrap();
        assert!(pp.sup_norm() < 1e-5 * v.sup_norm());
        assert!(pm.sup_norm() < 1e-5 * v.sup_norm());
        let zero = v.scale(0.0);
        let (zm, zp) = phi_pair(&zero, &zero, &zero, &j).unwrap();
        assert_eq!(zm.sup_norm() + zp.sup_norm(), 0.0);
        // nonlinear remainder for a non-constant structure
        let jc = AlmostComplexStructure::conjugated(1, 0.3, 1).unwrap();
        let small = v.scale(0.05);
        let (_, full) = phi_pair(&small, &small, &small, &jc).unwrap();
        let lin = small.d_t().unwrap().add(&j.apply_along(&small, &small.d_s()).unwrap()).unwrap();
        let expect = jc.apply_along(&small, &small.d_s()).unwrap().sub(&j.apply_along(&small, &small.d_s()).unwrap()).unwrap();
        assert!(full.sub(&lin).unwrap().max_abs_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn block_commutation() {
        let g = data(36.0, 0);
        let grid = CylinderGrid::with_step(-40.0, 40.0, HT, NS).unwrap();
        let w = Field::sample(grid, 1, |t, s, o| {
            o[0] = (0.1 * t).cos() * s.sin();
            o[1] = 0.8 * s.cos();
        })
        .unwrap();
        let std = AlmostComplexStructure::standard(1);
        assert_eq!(commutator_check(&w, &g, &std).unwrap(), 0.0);
        let j = AlmostComplexStructure::conjugated(1, 0.3, 5).unwrap();
        assert!(commutator_check(&w, &g, &j).unwrap() <= 1e-12);
        let w2 = w.scale(-0.5);
        assert!(commutator_check_blocks(&w, &w2, &g, &j).unwrap() >= 1e-3);
    }
}
