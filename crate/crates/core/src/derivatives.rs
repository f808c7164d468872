//! Derivatives of `N^R` in the maps (`D_W`), the neck length (`D_R`) and the
//! twist (`D_theta`), with finite-difference oracles.
//!
//! Near `t_+ = R` the piecewise form is `J(w_+ o tau_{-a}) d_s u_+` with
//! `w_+ o tau_{-a}(t, s) = A_+(t - R) u_-(t - 2R, s - 2 theta) + B_+(t - R) u_+(t, s)`.
//! The coefficients depend on `R` through the translation and through
//! `l(R)`, `d(R) = 3 l(R)`, so `D_R` carries the full chain rule.

use crate::cutoffs::{alpha_minus_deriv, gamma_hat_plus_deriv, CutoffFamily, GluingData};
use crate::error::{Error, Result};
use crate::gluing::{one_sided_coefficients, Side};
use crate::grid::{CylinderGrid, Field};
use crate::jstruct::AlmostComplexStructure;
use crate::nonlinear::{merge_regions, n_piecewise, one_sided_pullbacks};
use crate::norms::{weighted_norm, WeightedNormParams};

/// A pair of fields `(minus, plus)` on `C_-` and `C_+`.
pub type FieldPair = (Field, Field);

fn pair_sub(a: &FieldPair, b: &FieldPair) -> Result<FieldPair> {
    Ok((a.0.sub(&b.0)?, a.1.sub(&b.1)?))
}

fn pair_norm_of(a: &FieldPair, params: &WeightedNormParams) -> Result<f64> {
    Ok(weighted_norm(&a.0, params)? + weighted_norm(&a.1, params)?)
}

/// `f(t - 2R, s - 2 theta)` for `f` on `C_-`, seen on `grid_plus`.
pub fn minus_on_plus(f: &Field, g: &GluingData, grid_plus: &CylinderGrid) -> Result<Field> {
    f.translate_ts(-2.0 * g.r, -2.0 * g.theta)?.reframe(grid_plus)
}

/// `f(t + 2R, s + 2 theta)` for `f` on `C_+`, seen on `grid_minus`.
pub fn plus_on_minus(f: &Field, g: &GluingData, grid_minus: &CylinderGrid) -> Result<Field> {
    f.translate_ts(2.0 * g.r, 2.0 * g.theta)?.reframe(grid_minus)
}

/// Values and `R`-derivatives of the one-sided coefficients `(A, B)` at the
/// gluing coordinate `tau`, where `d tau / dR = dtau` and `dl = l'(R)`.
pub fn coefficient_r_derivatives(fam: &CutoffFamily, tau: f64, dtau: f64, dl: f64, side: Side) -> ((f64, f64), (f64, f64)) {
    let (l, d) = (fam.l, fam.d);
    let dd = 3.0 * dl;
    let ym = (tau - d) / l;
    let yp = (tau + d) / l;
    let dbm = alpha_minus_deriv(ym) * (dtau - dd - ym * dl) / l;
    let dbp = -alpha_minus_deriv(yp) * (dtau + dd - yp * dl) / l;
    let (bm, bp) = (fam.beta_minus(tau), fam.beta_plus(tau));
    let value = one_sided_coefficients(fam, tau, side);
    let deriv = match side {
        Side::Plus => {
            let gp = fam.gamma_plus(tau);
            let dgp = gamma_hat_plus_deriv(tau - d - l) * (dtau - dd - dl);
            (dgp * bp + gp * dbp, dgp * bm + gp * dbm - dgp)
        }
        Side::Minus => {
            let gm = fam.gamma_minus(tau);
            let dgm = gamma_hat_plus_deriv(-tau - d - l) * (-dtau - dd - dl);
            (dgm * bp + gm * dbp - dgm, dgm * bm + gm * dbm)
        }
    };
    (value, deriv)
}

/// `D_W N (xi)`: `DJ_w(D_W w(xi)) d_s u + J(w) d_s xi` on the windows and
/// `DJ_u(xi) d_s u + J(u) d_s xi` elsewhere, overlaps checked.
pub fn dw_n_analytic(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure, xi_minus: &Field, xi_plus: &Field) -> Result<FieldPair> {
    let (wm, wp) = one_sided_pullbacks(u_minus, u_plus, g)?;
    let (dwm, dwp) = one_sided_pullbacks(xi_minus, xi_plus, g)?;
    let (dum, dup) = (u_minus.d_s(), u_plus.d_s());
    let (dxm, dxp) = (xi_minus.d_s(), xi_plus.d_s());
    let inner_p = j.deriv_apply_along(&wp, &dwp, &dup)?.add(&j.apply_along(&wp, &dxp)?)?;
    let inner_m = j.deriv_apply_along(&wm, &dwm, &dum)?.add(&j.apply_along(&wm, &dxm)?)?;
    let (outer_m, outer_p) = dw_n_infinity(u_minus, u_plus, j, xi_minus, xi_plus)?;
    let w = g.d + g.l;
    let r = g.r;
    let plus = merge_regions(&outer_p, &inner_p, |t| t < r - w - 2.0 || t > r + w + 2.0, |t| t > r - w - 3.0 && t < r + w + 3.0)?;
    let minus = merge_regions(&outer_m, &inner_m, |t| t < -r - w - 2.0 || t > -r + w + 2.0, |t| t > -r - w - 3.0 && t < -r + w + 3.0)?;
    Ok((minus, plus))
}

/// `D_W N^inf (xi) = (DJ_{u_-}(xi_-) d_s u_- + J(u_-) d_s xi_-, ...)`.
pub fn dw_n_infinity(u_minus: &Field, u_plus: &Field, j: &AlmostComplexStructure, xi_minus: &Field, xi_plus: &Field) -> Result<FieldPair> {
    let one = |u: &Field, xi: &Field| -> Result<Field> { j.deriv_apply_along(u, xi, &u.d_s())?.add(&j.apply_along(u, &xi.d_s())?) };
    Ok((one(u_minus, xi_minus)?, one(u_plus, xi_plus)?))
}

/// `D_W E (xi)` in the product form
/// `{DJ_w(D_W w(xi)) - DJ_u(xi)} d_s u + {J(w) - J(u)} d_s xi` on the windows,
/// checked against `D_W N - D_W N^inf`.
pub fn dw_e_analytic(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure, xi_minus: &Field, xi_plus: &Field) -> Result<FieldPair> {
    let product = dw_e_product(u_minus, u_plus, g, j, xi_minus, xi_plus)?;
    let sub = pair_sub(
        &dw_n_analytic(u_minus, u_plus, g, j, xi_minus, xi_plus)?,
        &dw_n_infinity(u_minus, u_plus, j, xi_minus, xi_plus)?,
    )?;
    let scale = product.0.sup_norm().max(product.1.sup_norm()).max(sub.0.sup_norm()).max(sub.1.sup_norm()).max(1.0);
    let dev = sub.0.max_abs_diff(&product.0)?.max(sub.1.max_abs_diff(&product.1)?);
    if dev > 1e-10 * scale {
        return Err(Error::Inconsistent(format!("product and subtraction forms of D_W E differ by {dev:e}")));
    }
    Ok(product)
}

fn dw_e_product(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure, xi_minus: &Field, xi_plus: &Field) -> Result<FieldPair> {
    let (wm, wp) = one_sided_pullbacks(u_minus, u_plus, g)?;
    let (dwm, dwp) = one_sided_pullbacks(xi_minus, xi_plus, g)?;
    let one = |w: &Field, dw: &Field, u: &Field, xi: &Field| -> Result<Field> {
        let du = u.d_s();
        let dx = xi.d_s();
        let first = j.deriv_apply_along(w, dw, &du)?.sub(&j.deriv_apply_along(u, xi, &du)?)?;
        first.add(&j.apply_along(w, &dx)?.sub(&j.apply_along(u, &dx)?)?)
    };
    let hw = g.window_half_width();
    let r = g.r;
    let em = one(&wm, &dwm, u_minus, xi_minus)?.mask(|t| t > -r - hw && t < -r + hw);
    let ep = one(&wp, &dwp, u_plus, xi_plus)?.mask(|t| t > r - hw && t < r + hw);
    Ok((em, ep))
}

/// `D_R w_+ o tau_{-a}` split into the part carried by `u_-` and the part
/// carried by `u_+`, on `C_+`.
pub fn dr_w_plus_parts(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<FieldPair> {
    let gp = *u_plus.grid();
    let fam = g.family();
    let r = g.r;
    let um = minus_on_plus(u_minus, g, &gp)?;
    let dtum = minus_on_plus(&u_minus.d_t()?, g, &gp)?;
    let coeffs = |t: f64| coefficient_r_derivatives(&fam, t - r, -1.0, g.dl_dr, Side::Plus);
    let mut from_minus = um.mul_profile(|t| coeffs(t).1 .0);
    from_minus.axpy(1.0, &dtum.mul_profile(|t| -2.0 * coeffs(t).0 .0))?;
    let from_plus = u_plus.mul_profile(|t| coeffs(t).1 .1);
    Ok((from_minus, from_plus))
}

/// `D_R w_- o tau_a` split as `(part carried by u_-, part carried by u_+)`, on `C_-`.
pub fn dr_w_minus_parts(u_minus: &Field, u_plus: &Field, g: &GluingData) -> Result<FieldPair> {
    let gm = *u_minus.grid();
    let fam = g.family();
    let r = g.r;
    let up = plus_on_minus(u_plus, g, &gm)?;
    let dtup = plus_on_minus(&u_plus.d_t()?, g, &gm)?;
    let coeffs = |t: f64| coefficient_r_derivatives(&fam, t + r, 1.0, g.dl_dr, Side::Minus);
    let from_minus = u_minus.mul_profile(|t| coeffs(t).1 .0);
    let mut from_plus = up.mul_profile(|t| coeffs(t).1 .1);
    from_plus.axpy(1.0, &dtup.mul_profile(|t| 2.0 * coeffs(t).0 .1))?;
    Ok((from_minus, from_plus))
}

/// `D_R N = (DJ_{w_-}(D_R w_-) d_s u_-, DJ_{w_+}(D_R w_+) d_s u_+)`.
pub fn dr_n_analytic(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<FieldPair> {
    let (wm, wp) = one_sided_pullbacks(u_minus, u_plus, g)?;
    let (pm, pp) = (dr_w_minus_parts(u_minus, u_plus, g)?, dr_w_plus_parts(u_minus, u_plus, g)?);
    let minus = j.deriv_apply_along(&wm, &pm.0.add(&pm.1)?, &u_minus.d_s())?;
    let plus = j.deriv_apply_along(&wp, &pp.0.add(&pp.1)?, &u_plus.d_s())?;
    Ok((minus, plus))
}

/// `D_R N_+` split into the terms driven by `u_-` (first) and by `u_+` (second).
pub fn dr_n_plus_parts(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<FieldPair> {
    let (_, wp) = one_sided_pullbacks(u_minus, u_plus, g)?;
    let (a, b) = dr_w_plus_parts(u_minus, u_plus, g)?;
    let dup = u_plus.d_s();
    Ok((j.deriv_apply_along(&wp, &a, &dup)?, j.deriv_apply_along(&wp, &b, &dup)?))
}

/// `D_theta N`: `DJ_{w_+}(-2 A_+ d_s u_-(t - 2R, s - 2 theta)) d_s u_+` and the
/// mirror `DJ_{w_-}(2 B_- d_s u_+(t + 2R, s + 2 theta)) d_s u_-`.
pub fn dtheta_n_analytic(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure) -> Result<FieldPair> {
    let (wm, wp) = one_sided_pullbacks(u_minus, u_plus, g)?;
    let fam = g.family();
    let r = g.r;
    let (dum, dup) = (u_minus.d_s(), u_plus.d_s());
    let vp = minus_on_plus(&dum, g, u_plus.grid())?.mul_profile(|t| -2.0 * one_sided_coefficients(&fam, t - r, Side::Plus).0);
    let vm = plus_on_minus(&dup, g, u_minus.grid())?.mul_profile(|t| 2.0 * one_sided_coefficients(&fam, t + r, Side::Minus).1);
    Ok((j.deriv_apply_along(&wm, &vm, &dum)?, j.deriv_apply_along(&wp, &vp, &dup)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub analytic: FieldPair,
    pub finite_difference: FieldPair,
    pub h: f64,
    /// Weighted `(k-1)` norm of `analytic - finite_difference` at step `h`.
    pub discrepancy: f64,
    /// Same at step `h/2`.
    pub discrepancy_half: f64,
    /// `discrepancy / discrepancy_half`; about 4 for a second-order difference.
    pub refinement_ratio: f64,
    /// Discrepancy against the Richardson combination `(4 fd(h/2) - fd(h)) / 3`.
    pub extrapolated: f64,
    /// Weighted `(k-1)` norm of the analytic derivative.
    pub scale: f64,
}

/// Central differences `(N(u + h xi) - N(u - h xi)) / 2h` at `h` and `h/2`
/// against [`dw_n_analytic`].
pub fn dw_n_report(
    u_minus: &Field,
    u_plus: &Field,
    g: &GluingData,
    j: &AlmostComplexStructure,
    xi_minus: &Field,
    xi_plus: &Field,
    h: f64,
    params: &WeightedNormParams,
) -> Result<DerivativeReport> {
    let analytic = dw_n_analytic(u_minus, u_plus, g, j, xi_minus, xi_plus)?;
    let fd = |h: f64| -> Result<FieldPair> {
        let plus = n_piecewise(&u_minus.add(&xi_minus.scale(h))?, &u_plus.add(&xi_plus.scale(h))?, g, j)?;
        let minus = n_piecewise(&u_minus.sub(&xi_minus.scale(h))?, &u_plus.sub(&xi_plus.scale(h))?, g, j)?;
        Ok((
            plus.n_minus.sub(&minus.n_minus)?.scale(0.5 / h),
            plus.n_plus.sub(&minus.n_plus)?.scale(0.5 / h),
        ))
    };
    report(analytic, fd(h)?, fd(h / 2.0)?, h, params)
}

fn report(analytic: FieldPair, fd: FieldPair, fd_half: FieldPair, h: f64, params: &WeightedNormParams) -> Result<DerivativeReport> {
    let target = params.lower();
    let discrepancy = pair_norm_of(&pair_sub(&analytic, &fd)?, &target)?;
    let discrepancy_half = pair_norm_of(&pair_sub(&analytic, &fd_half)?, &target)?;
    let scale = pair_norm_of(&analytic, &target)?;
    let rich = (
        fd_half.0.scale(4.0 / 3.0).sub(&fd.0.scale(1.0 / 3.0))?,
        fd_half.1.scale(4.0 / 3.0).sub(&fd.1.scale(1.0 / 3.0))?,
    );
    let extrapolated = pair_norm_of(&pair_sub(&analytic, &rich)?, &target)?;
    Ok(DerivativeReport {
        analytic,
        finite_difference: fd,
        h,
        discrepancy,
        discrepancy_half,
        refinement_ratio: discrepancy / discrepancy_half,
        extrapolated,
        scale,
    })
}

/// Gluing data at `r` with the exact (unsnapped) length, so the cut-offs move
/// smoothly with `R`.
pub fn smooth_data(like: &GluingData, r: f64) -> Result<GluingData> {
    GluingData::exact_length(r, like.theta, like.m, like.variant, like.h_t, like.h_s)
}

/// Central differences of `N` in `R` at the aligned steps `2 h_t` and `h_t`
/// against [`dr_n_analytic`]; both sides use exact lengths.
pub fn dr_n_report(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure, params: &WeightedNormParams) -> Result<DerivativeReport> {
    let g0 = smooth_data(g, g.r)?;
    let analytic = dr_n_analytic(u_minus, u_plus, &g0, j)?;
    let fd = |dr: f64| -> Result<FieldPair> {
        let hi = n_piecewise(u_minus, u_plus, &smooth_data(g, g.r + dr)?, j)?;
        let lo = n_piecewise(u_minus, u_plus, &smooth_data(g, g.r - dr)?, j)?;
        Ok((hi.n_minus.sub(&lo.n_minus)?.scale(0.5 / dr), hi.n_plus.sub(&lo.n_plus)?.scale(0.5 / dr)))
    };
    let h = 2.0 * g.h_t;
    report(analytic, fd(h)?, fd(g.h_t)?, h, params)
}

/// Central differences of `N` in `theta` at steps `2 h_s` and `h_s`.
pub fn dtheta_n_report(u_minus: &Field, u_plus: &Field, g: &GluingData, j: &AlmostComplexStructure, params: &WeightedNormParams) -> Result<DerivativeReport> {
    let analytic = dtheta_n_analytic(u_minus, u_plus, g, j)?;
    let at = |theta: f64| GluingData::new(g.r, theta, g.m, g.variant, g.h_t, g.h_s);
    let fd = |dth: f64| -> Result<FieldPair> {
        let hi = n_piecewise(u_minus, u_plus, &at(g.theta + dth)?, j)?;
        let lo = n_piecewise(u_minus, u_plus, &at(g.theta - dth)?, j)?;
        Ok((hi.n_minus.sub(&lo.n_minus)?.scale(0.5 / dth), hi.n_plus.sub(&lo.n_plus)?.scale(0.5 / dth)))
    };
    let h = 2.0 * g.h_s;
    report(analytic, fd(h)?, fd(g.h_s)?, h, params)
}
