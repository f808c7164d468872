//! Cut-off functions, the splicing matrix, and the length/center/profile
//! functions that tie the neck length `R` to the cut-off scales.
//!
//! All cut-offs are built from one smooth step
//! `alpha_-(y) = f(1 - y) / (f(1 - y) + f(1 + y))`, `f(x) = exp(-1/x)` for
//! `x > 0` and `0` otherwise. It equals `1` for `y <= -1`, `0` for `y >= 1`
//! (exactly, in floating point) and is non-increasing.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lattice_steps, snap};

/// Lower bound on the length parameter `l`.
pub const L0: f64 = 2.0;
/// Lower bound on the center parameter `d`.
pub const D0: f64 = 6.0;

fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn bump_deriv(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// The base step `alpha_-`.
pub fn alpha_minus(y: f64) -> f64 {
    if y <= -1.0 {
        return 1.0;
    }
    if y >= 1.0 {
        return 0.0;
    }
    let p = bump(1.0 - y);
    let q = bump(1.0 + y);
    p / (p + q)
}

/// `alpha_+ = 1 - alpha_-`.
pub fn alpha_plus(y: f64) -> f64 {
    1.0 - alpha_minus(y)
}

/// `alpha_-'(y)`, analytic.
pub fn alpha_minus_deriv(y: f64) -> f64 {
    if y <= -1.0 || y >= 1.0 {
        return 0.0;
    }
    let p = bump(1.0 - y);
    let q = bump(1.0 + y);
    let dp = -bump_deriv(1.0 - y);
    let dq = bump_deriv(1.0 + y);
    (dp * q - p * dq) / ((p + q) * (p + q))
}

/// The pair `(alpha_-, alpha_+)` as plain function pointers.
pub fn base_cutoff_alpha() -> (fn(f64) -> f64, fn(f64) -> f64) {
    (alpha_minus, alpha_plus)
}

/// `hat gamma_+`: `1` for `t <= 1`, `0` for `t >= 2`.
pub fn gamma_hat_plus(t: f64) -> f64 {
    alpha_minus(2.0 * t - 3.0)
}

pub fn gamma_hat_plus_deriv(t: f64) -> f64 {
    2.0 * alpha_minus_deriv(2.0 * t - 3.0)
}

/// The `beta` and `gamma` cut-offs for fixed `(l, d)`, in gluing coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub l: f64,
    pub d: f64,
}

impl CutoffFamily {
    /// Builds the family; `d >= 3l` is what makes the two ramps disjoint.
    pub fn new(l: f64, d: f64) -> Result<Self> {
        if !(l >= L0) {
            return Err(Error::InvalidParameter(format!("l = {l} is below l0 = {L0}")));
        }
        if d < 3.0 * l * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!("d = {d} < 3l = {}", 3.0 * l)));
        }
        Ok(Self { l, d })
    }

    /// `beta_-(t) = alpha_-((t - d)/l)`: one up to `d - l`, zero from `d + l`.
    pub fn beta_minus(&self, t: f64) -> f64 {
        alpha_minus((t - self.d) / self.l)
    }

    /// `beta_+(t) = alpha_+((t + d)/l)`: zero up to `-d - l`, one from `-d + l`.
    pub fn beta_plus(&self, t: f64) -> f64 {
        alpha_plus((t + self.d) / self.l)
    }

    pub fn beta_minus_deriv(&self, t: f64) -> f64 {
        alpha_minus_deriv((t - self.d) / self.l) / self.l
    }

    pub fn beta_plus_deriv(&self, t: f64) -> f64 {
        -alpha_minus_deriv((t + self.d) / self.l) / self.l
    }

    /// `gamma_+(t) = hat gamma_+(t - d - l)`.
    pub fn gamma_plus(&self, t: f64) -> f64 {
        gamma_hat_plus(t - self.d - self.l)
    }

    /// `gamma_-(t) = hat gamma_-(t + d + l) = hat gamma_+(-t - d - l)`.
    pub fn gamma_minus(&self, t: f64) -> f64 {
        gamma_hat_plus(-t - self.d - self.l)
    }

    pub fn gamma_plus_deriv(&self, t: f64) -> f64 {
        gamma_hat_plus_deriv(t - self.d - self.l)
    }

    pub fn gamma_minus_deriv(&self, t: f64) -> f64 {
        -gamma_hat_plus_deriv(-t - self.d - self.l)
    }

    pub fn splicing(&self) -> SplicingMatrix {
        SplicingMatrix { family: *self }
    }
}

/// Constant regions of the splicing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplicingRegion {
    /// `t < -d - l`: identity.
    M1,
    /// `-d + l < t < d - l`: `[[1, -1], [1, 1]]`.
    M2,
    /// `t > d + l`: rotation `[[0, -1], [1, 0]]`.
    M3,
    /// One of the two ramps.
    Ramp,
}

/// `T_beta(t) = [[beta_-, -beta_+], [beta_+, beta_-]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplicingMatrix {
    pub family: CutoffFamily,
}

impl SplicingMatrix {
    pub fn at(&self, t: f64) -> [[f64; 2]; 2] {
        let bm = self.family.beta_minus(t);
        let bp = self.family.beta_plus(t);
        [[bm, -bp], [bp, bm]]
    }

    /// `D(t) = beta_-^2 + beta_+^2`.
    pub fn det(&self, t: f64) -> f64 {
        let bm = self.family.beta_minus(t);
        let bp = self.family.beta_plus(t);
        bm * bm + bp * bp
    }

    /// `(1/D) [[beta_-, beta_+], [-beta_+, beta_-]]`.
    pub fn inverse(&self, t: f64) -> [[f64; 2]; 2] {
        let bm = self.family.beta_minus(t);
        let bp = self.family.beta_plus(t);
        let dinv = 1.0 / (bm * bm + bp * bp);
        [[bm * dinv, bp * dinv], [-bp * dinv, bm * dinv]]
    }

    pub fn region(&self, t: f64) -> SplicingRegion {
        let CutoffFamily { l, d } = self.family;
        if t < -d - l {
            SplicingRegion::M1
        } else if t > -d + l && t < d - l {
            SplicingRegion::M2
        } else if t > d + l {
            SplicingRegion::M3
        } else {
            SplicingRegion::Ramp
        }
    }

    pub fn constant_matrix(region: SplicingRegion) -> Option<[[f64; 2]; 2]> {
        match region {
            SplicingRegion::M1 => Some([[1.0, 0.0], [0.0, 1.0]]),
            SplicingRegion::M2 => Some([[1.0, -1.0], [1.0, 1.0]]),
            SplicingRegion::M3 => Some([[0.0, -1.0], [1.0, 0.0]]),
            SplicingRegion::Ramp => None,
        }
    }
}

/// Smooth window: one on `[a, b]`, zero outside `[a - 1, b + 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho {
    pub a: f64,
    pub b: f64,
}

impl Rho {
    /// Window around the neck at `t = R` (in `t_+` coordinates):
    /// plateau `[R - d - l - 3, R + d + l + 3]`, support `[R - d - l - 4, R + d + l + 4]`.
    pub fn new(r: f64, d: f64, l: f64) -> Self {
        Self { a: r - d - l - 3.0, b: r + d + l + 3.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        alpha_plus(2.0 * (t - self.a) + 1.0) * alpha_minus(2.0 * (t - self.b) - 1.0)
    }
}

pub fn make_rho(r: f64, d: f64, l: f64) -> Rho {
    Rho::new(r, d, l)
}

/// Which length function `l = L(R)` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthVariant {
    /// `l = R^{m/(m+1)} ln^2 R`.
    Paper,
    /// `l = R^{m/(m+1)}`.
    Desk,
}

impl LengthVariant {
    /// Smallest admissible neck length.
    pub fn r0(self) -> f64 {
        match self {
            LengthVariant::Paper => 1e6,
            LengthVariant::Desk => 25.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "paper" => Some(LengthVariant::Paper),
            "desk" => Some(LengthVariant::Desk),
            _ => None,
        }
    }
}

fn length_exact(r: f64, m: u32, variant: LengthVariant) -> f64 {
    let q = m as f64 / (m as f64 + 1.0);
    match variant {
        LengthVariant::Desk => r.powf(q),
        LengthVariant::Paper => r.powf(q) * r.ln().powi(2),
    }
}

fn length_exact_deriv(r: f64, m: u32, variant: LengthVariant) -> f64 {
    let q = m as f64 / (m as f64 + 1.0);
    match variant {
        LengthVariant::Desk => q * r.powf(q - 1.0),
        LengthVariant::Paper => {
            let ln = r.ln();
            r.powf(q - 1.0) * (q * ln * ln + 2.0 * ln)
        }
    }
}

fn check_order(r: f64, l: f64, d: f64) -> Result<()> {
    let gap = r - d - l - 3.0;
    if !(gap > 0.0) {
        return Err(Error::RegionOrdering { r, l, d, gap });
    }
    Ok(())
}

/// `(l, d)` with `d = 3l`, unsnapped.
pub fn length_center(r: f64, m: u32, variant: LengthVariant) -> Result<(f64, f64)> {
    if m == 0 || !(r > 1.0) {
        return Err(Error::InvalidParameter(format!("need m >= 1 and R > 1, got m = {m}, R = {r}")));
    }
    let l = length_exact(r, m, variant);
    let d = 3.0 * l;
    check_order(r, l, d)?;
    Ok((l, d))
}

/// `a_± = d(l + d)/dR = 4 dl/dR` for the chosen variant.
pub fn length_center_derivative(r: f64, m: u32, variant: LengthVariant) -> f64 {
    4.0 * length_exact_deriv(r, m, variant)
}

/// Gluing profile relating the chart coordinate `r` to the neck length `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GluingProfile {
    pub r0: f64,
    /// `R = e^{1/r} - e^{1/r0}` when true, `R = e^{1/r}` otherwise.
    pub offset: bool,
}

impl Default for GluingProfile {
    fn default() -> Self {
        Self { r0: 1.0, offset: true }
    }
}

impl GluingProfile {
    fn shift(&self) -> f64 {
        if self.offset {
            (1.0 / self.r0).exp()
        } else {
            0.0
        }
    }

    pub fn radius_to_length(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < self.r0) {
            return Err(Error::InvalidParameter(format!("r = {r} outside (0, {})", self.r0)));
        }
        Ok((1.0 / r).exp() - self.shift())
    }

    pub fn length_to_radius(&self, big_r: f64) -> Result<f64> {
        let x = big_r + self.shift();
        if !(x > 1.0) || !(big_r > 0.0) {
            return Err(Error::InvalidParameter(format!("R = {big_r} has no preimage under the profile")));
        }
        let r = 1.0 / x.ln();
        if !(r < self.r0) {
            return Err(Error::InvalidParameter(format!("R = {big_r} maps to r = {r} >= r0")));
        }
        Ok(r)
    }

    /// `dR/dr = -e^{1/r} / r^2`.
    pub fn dlength_dradius(&self, r: f64) -> f64 {
        -(1.0 / r).exp() / (r * r)
    }
}

/// `R = e^{1/r} - e^{1/r0}`.
pub fn gluing_profile(r: f64, r0: f64) -> Result<f64> {
    GluingProfile { r0, offset: true }.radius_to_length(r)
}

pub fn inverse_profile(big_r: f64, r0: f64) -> Result<f64> {
    GluingProfile { r0, offset: true }.length_to_radius(big_r)
}

/// The gluing parameter `a = (R, theta)` with everything derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GluingData {
    pub r: f64,
    pub theta: f64,
    /// Chart coordinate under the profile.
    pub radius: f64,
    pub l: f64,
    pub d: f64,
    /// `a_± = d(l + d)/dR` of the unsnapped length function.
    pub a_pm: f64,
    /// Derivative of `l` with respect to `R` (unsnapped).
    pub dl_dr: f64,
    pub m: u32,
    pub variant: LengthVariant,
    pub profile: GluingProfile,
    pub h_t: f64,
    pub h_s: f64,
    pub shift_r: i64,
    pub shift_theta: i64,
    pub shift_2r: i64,
    pub snapped: bool,
}

impl GluingData {
    /// Gluing data on a lattice with steps `(h_t, h_s)`. `R` and `theta` must be
    /// lattice multiples; `l` is snapped to the lattice and `d = 3l`.
    pub fn new(r: f64, theta: f64, m: u32, variant: LengthVariant, h_t: f64, h_s: f64) -> Result<Self> {
        Self::build(r, theta, m, variant, h_t, h_s, true)
    }

    /// As [`GluingData::new`] but keeps the exact `l = L(R)`; the cut-offs do
    /// not need lattice alignment, only the translations do.
    pub fn exact_length(r: f64, theta: f64, m: u32, variant: LengthVariant, h_t: f64, h_s: f64) -> Result<Self> {
        Self::build(r, theta, m, variant, h_t, h_s, false)
    }

    fn build(r: f64, theta: f64, m: u32, variant: LengthVariant, h_t: f64, h_s: f64, snapped: bool) -> Result<Self> {
        if r < variant.r0() * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!("R = {r} below R0 = {}", variant.r0())));
        }
        let shift_r = lattice_steps("R", r, h_t)?;
        let shift_theta = lattice_steps("theta", theta, h_s)?;
        let (l_exact, _) = length_center(r, m, variant)?;
        let l = if snapped { snap(l_exact, h_t).max(snap(L0, h_t)) } else { l_exact };
        let d = 3.0 * l;
        check_order(r, l, d)?;
        CutoffFamily::new(l, d)?;
        let profile = GluingProfile::default();
        Ok(Self {
            r,
            theta,
            radius: profile.length_to_radius(r)?,
            l,
            d,
            a_pm: length_center_derivative(r, m, variant),
            dl_dr: length_exact_deriv(r, m, variant),
            m,
            variant,
            profile,
            h_t,
            h_s,
            shift_r,
            shift_theta,
            shift_2r: 2 * shift_r,
            snapped,
        })
    }

    pub fn family(&self) -> CutoffFamily {
        CutoffFamily { l: self.l, d: self.d }
    }

    pub fn rho(&self) -> Rho {
        Rho::new(self.r, self.d, self.l)
    }

    /// Half-width `d + l + 3` of the localization window around `t = ±R`.
    pub fn window_half_width(&self) -> f64 {
        self.d + self.l + 3.0
    }

    /// Default truncation of the bi-infinite cylinder: `2R + d + l + 8`.
    pub fn default_t_max(&self) -> f64 {
        2.0 * self.r + self.d + self.l + 8.0
    }

    /// Default half-cylinder length for the inputs `u_±`: `T_max + R`.
    pub fn default_half_length(&self) -> f64 {
        snap(self.default_t_max() + self.r, self.h_t)
    }
}

/// Renders `(t, beta_-, beta_+, gamma_-, gamma_+, rho)` as CSV.
pub fn render_csv(family: &CutoffFamily, rho: Option<&Rho>, ts: impl IntoIterator<Item = f64>) -> String {
    let mut out = String::from("t,beta_minus,beta_plus,gamma_minus,gamma_plus,rho\n");
    for t in ts {
        let rv = rho.map(|r| r.eval(t)).unwrap_or(0.0);
        let _ = writeln!(
            out,
            "{t},{},{},{},{},{rv}",
            family.beta_minus(t),
            family.beta_plus(t),
            family.gamma_minus(t),
            family.gamma_plus(t)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_support_and_symmetry() {
        assert_eq!(alpha_minus(-2.0), 1.0);
        assert_eq!(alpha_minus(2.0), 0.0);
        assert!((alpha_minus(0.0) - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let y: f64 = rng.random_range(-3.0..3.0);
            assert!((alpha_minus(y) + alpha_plus(y) - 1.0).abs() < 1e-15);
        }
        let mut prev = 1.0;
        for k in 0..=400 {
            let y = -2.0 + k as f64 * 0.01;
            let a = alpha_minus(y);
            assert!(a <= prev + 1e-15);
            assert!(alpha_minus_deriv(y) <= 0.0);
            prev = a;
        }
    }

    #[test]
    fn alpha_derivative_matches_differences() {
        for k in 1..40 {
            let y = -0.975 + k as f64 * 0.05;
            let h = 1e-5;
            let fd = (alpha_minus(y + h) - alpha_minus(y - h)) / (2.0 * h);
            assert!((fd - alpha_minus_deriv(y)).abs() < 1e-7, "y = {y}");
        }
    }

    #[test]
    fn beta_plateaus() {
        let f = CutoffFamily::new(4.0, 12.0).unwrap();
        for k in 0..=280 {
            let t = -20.0 + k as f64 * 0.1;
            if t <= 8.0 {
                assert_eq!(f.beta_minus(t), 1.0);
            }
        }
        assert_eq!(f.beta_plus(-20.0), 0.0);
        assert!(CutoffFamily::new(4.0, 11.0).is_err());
        assert!(CutoffFamily::new(1.0, 3.0).is_err());
    }

    #[test]
    fn beta_derivative_bound_scales_with_l() {
        let sup_alpha = (0..=20000).map(|k| alpha_minus_deriv(-1.0 + k as f64 * 1e-4).abs()).fold(0.0, f64::max);
        let measure = |l: f64| {
            let f = CutoffFamily::new(l, 3.0 * l).unwrap();
            let h = 1e-3;
            (0..20000)
                .map(|k| {
                    let t = 2.0 * l + k as f64 * (2.0 * l / 20000.0);
                    ((f.beta_minus(t + h) - f.beta_minus(t - h)) / (2.0 * h)).abs()
                })
                .fold(0.0, f64::max)
        };
        let s4 = measure(4.0);
        assert!(s4 <= sup_alpha / 4.0 * 1.001);
        let s8 = measure(8.0);
        assert!((s4 / s8 - 2.0).abs() < 0.1, "ratio {}", s4 / s8);
    }

    #[test]
    fn gamma_plateaus() {
        let f = CutoffFamily::new(4.0, 12.0).unwrap();
        let dl = 16.0;
        for k in 0..=800 {
            let t = -40.0 + k as f64 * 0.1;
            if t < dl + 1.0 {
                assert_eq!(f.gamma_plus(t), 1.0);
            }
            if t > dl + 2.0 {
                assert_eq!(f.gamma_plus(t), 0.0);
            }
            if t.abs() <= dl + 1.0 {
                assert_eq!(f.gamma_minus(t) * f.gamma_plus(t), 1.0);
            }
        }
    }

    #[test]
    fn splicing_constant_regions() {
        let f = CutoffFamily::new(4.0, 12.0).unwrap();
        let s = f.splicing();
        let (l, d) = (f.l, f.d);
        assert_eq!(s.at(-(d + l + 5.0)), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(s.det(-(d + l + 5.0)), 1.0);
        assert_eq!(s.at(0.0), [[1.0, -1.0], [1.0, 1.0]]);
        assert_eq!(s.det(0.0), 2.0);
        assert_eq!(s.at(d + l + 5.0), [[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!(s.det(d + l + 5.0), 1.0);
        for k in 0..=4000 {
            let t = -25.0 + k as f64 * 0.0125;
            let det = s.det(t);
            assert!((1.0..=2.0).contains(&det));
            let m = s.at(t);
            let inv = s.inverse(t);
            for i in 0..2 {
                for j in 0..2 {
                    let e: f64 = (0..2).map(|k| inv[i][k] * m[k][j]).sum();
                    assert!((e - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
            let (bm, bp) = (f.beta_minus(t), f.beta_plus(t));
            if bm.max(bp) < 1.0 {
                panic!("both cut-offs below one at t = {t}");
            }
            if let Some(c) = SplicingMatrix::constant_matrix(s.region(t)) {
                assert_eq!(c, m);
            }
            if t.abs() > 0.0 && (t < d - l || t > d + l) {
                assert!(f.beta_minus_deriv(t).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn length_center_values() {
        let (l, d) = length_center(100.0, 1, LengthVariant::Desk).unwrap();
        assert!((l - 10.0).abs() < 1e-12 && (d - 30.0).abs() < 1e-12);
        assert!((100.0 - d - l - 3.0 - 57.0).abs() < 1e-12);
        let (l, d) = length_center(1e6, 1, LengthVariant::Paper).unwrap();
        let oracle = 1000.0 * (1e6f64).ln().powi(2);
        assert!((l - oracle).abs() < 1e-6 && (l - 1.9086e5).abs() < 10.0);
        assert_eq!(d, 3.0 * l);
        assert!(matches!(length_center(100.0, 1, LengthVariant::Paper), Err(Error::RegionOrdering { .. })));
    }

    #[test]
    fn length_center_derivatives() {
        assert!((length_center_derivative(100.0, 1, LengthVariant::Desk) - 0.2).abs() < 1e-15);
        let r = 1e6f64;
        let oracle = 4.0 * (r.ln().powi(2) / (2.0 * r.sqrt()) + 2.0 * r.ln() / r.sqrt());
        let a = length_center_derivative(r, 1, LengthVariant::Paper);
        assert!((a - oracle).abs() < 1e-12);
        assert!((a - 0.4923).abs() < 1e-3);
        // finite-difference check of the symbolic derivative
        let h = 1.0;
        let fd = 4.0 * (length_exact(r + h, 1, LengthVariant::Paper) - length_exact(r - h, 1, LengthVariant::Paper)) / (2.0 * h);
        assert!((fd - a).abs() < 1e-6);
        let a8 = length_center_derivative(1e8, 1, LengthVariant::Paper);
        let a10 = length_center_derivative(1e10, 1, LengthVariant::Paper);
        assert!(a > a8 && a8 > a10 && a10 > 0.0);
    }

    #[test]
    fn profile_values() {
        let r = gluing_profile(0.2, 1.0).unwrap();
        assert!((r - (5f64.exp() - 1f64.exp())).abs() < 1e-12);
        assert!((r - 145.69).abs() < 0.01);
        assert!(gluing_profile(0.999999, 1.0).unwrap() < 1e-4);
        assert!(gluing_profile(1.5, 1.0).is_err());
        assert!(gluing_profile(0.0, 1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r: f64 = rng.random_range(0.05..0.95);
            let back = inverse_profile(gluing_profile(r, 1.0).unwrap(), 1.0).unwrap();
            assert!((back - r).abs() < 1e-12);
        }
        let plain = GluingProfile { r0: 1.0, offset: false };
        assert!((plain.radius_to_length(0.5).unwrap() - 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn rho_plateau_and_support() {
        let rho = make_rho(36.0, 18.0, 6.0);
        assert_eq!(rho.eval(36.0), 1.0);
        assert_eq!(rho.eval(0.0), 0.0);
        assert_eq!(rho.eval(36.0 - 27.0), 1.0);
        assert_eq!(rho.eval(36.0 + 27.0), 1.0);
        assert_eq!(rho.eval(36.0 - 28.0), 0.0);
        assert_eq!(rho.eval(36.0 + 28.0), 0.0);
        assert!(rho.eval(36.0 - 27.5) > 0.0 && rho.eval(36.0 - 27.5) < 1.0);
    }

    #[test]
    fn gluing_data_alignment() {
        let g = GluingData::new(36.0, 0.0, 1, LengthVariant::Desk, 0.25, std::f64::consts::PI / 16.0).unwrap();
        assert_eq!((g.l, g.d, g.shift_r, g.shift_2r), (6.0, 18.0, 144, 288));
        assert!(GluingData::new(36.1, 0.0, 1, LengthVariant::Desk, 0.25, 0.1).is_err());
        assert!(GluingData::new(16.0, 0.0, 1, LengthVariant::Desk, 0.25, 0.1).is_err());
        let g = GluingData::new(50.0, 0.0, 1, LengthVariant::Desk, 0.25, 0.1).unwrap();
        assert_eq!(g.l, 7.0);
        let e = GluingData::exact_length(50.0, 0.0, 1, LengthVariant::Desk, 0.25, 0.1).unwrap();
        assert!((e.l - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let f = CutoffFamily::new(4.0, 12.0).unwrap();
        let csv = render_csv(&f, Some(&make_rho(40.0, 12.0, 4.0)), [0.0, 1.0]);
        assert!(csv.starts_with("t,beta_minus,beta_plus,gamma_minus,gamma_plus,rho\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
