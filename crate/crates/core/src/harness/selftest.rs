//! `splice-lab selftest`: quick identities that hold by construction.

use std::f64::consts::PI;

use crate::cutoffs::{alpha_minus, alpha_plus, gluing_profile, inverse_profile, CutoffFamily, GluingData, LengthVariant};
use crate::error::Result;
use crate::gluing::{total_glue, total_unglue};
use crate::grid::{CylinderGrid, Field};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiments::roundtrip;
use crate::harness::fit::fit_decay;
use crate::jstruct::{eval_j_along, AlmostComplexStructure};
use crate::nonlinear::{commutator_check, error_term, n_matrix_form};
use crate::norms::{weighted_norm, WeightedNormParams};
use crate::testmaps::{generate_test_pair, TestMapSpec};

pub struct SelfCheck {
    pub name: &'static str,
    pub result: Result<bool>,
}

fn grids() -> Result<(CylinderGrid, CylinderGrid, GluingData)> {
    let g = GluingData::new(36.0, PI / 4.0, 1, LengthVariant::Desk, 0.25, 2.0 * PI / 16.0)?;
    let half = g.default_half_length();
    Ok((CylinderGrid::with_step(-half, 0.0, 0.25, 16)?, CylinderGrid::with_step(0.0, half, 0.25, 16)?, g))
}

fn grid_arithmetic() -> Result<bool> {
    let g = CylinderGrid::new(0.0, 10.0, 11, 16)?;
    Ok(g.h_t() == 1.0 && (g.h_s() - PI / 8.0).abs() < 1e-15 && CylinderGrid::new(0.0, 10.0, 1, 16).is_err())
}

fn shift_identities() -> Result<bool> {
    let g = CylinderGrid::new(0.0, 10.0, 41, 16)?;
    let u = Field::sample(g, 1, |t, s, out| {
        out[0] = (-t).exp() * s.cos();
        out[1] = (-t).exp() * s.sin();
    })?;
    let same = u.shift_t(0.0)?.max_abs_diff(&u)? == 0.0;
    let full = u.rotate_s(2.0 * PI)?.max_abs_diff(&u)? < 1e-15;
    Ok(same && full)
}

fn alpha_symmetry() -> Result<bool> {
    let mid = (alpha_minus(0.0) - 0.5).abs() < 1e-15;
    let sum = (0..1000).map(|i| -3.0 + 6.0 * i as f64 / 999.0).all(|y| (alpha_minus(y) + alpha_plus(y) - 1.0).abs() < 1e-15);
    Ok(mid && sum)
}

fn gamma_plateaus() -> Result<bool> {
    let fam = CutoffFamily::new(10.0, 30.0)?;
    let reach = fam.d + fam.l + 1.0;
    Ok((0..=400).map(|i| -reach + 2.0 * reach * i as f64 / 400.0).all(|t| (fam.gamma_minus(t) * fam.gamma_plus(t) - 1.0).abs() < 1e-15))
}

fn desk_arithmetic() -> Result<bool> {
    let g = GluingData::new(100.0, 0.0, 1, LengthVariant::Desk, 0.25, 2.0 * PI / 16.0)?;
    Ok(g.l == 10.0 && g.d == 30.0 && g.r - g.d - g.l - 3.0 == 57.0 && (g.a_pm - 0.2).abs() < 1e-12)
}

fn profile_roundtrip() -> Result<bool> {
    let r0 = 0.3;
    let mut ok = true;
    for i in 0..20 {
        let r = 0.05 + 0.2 * i as f64 / 19.0;
        ok &= (inverse_profile(gluing_profile(r, r0)?, r0)? - r).abs() < 1e-12;
    }
    Ok(ok)
}

fn glue_roundtrip() -> Result<bool> {
    let (gm, gp, g) = grids()?;
    let (um, up) = generate_test_pair(&TestMapSpec::default(), &gm, &gp, 1, &WeightedNormParams::default(), 7)?;
    let (bm, bp) = total_unglue(&total_glue(&um, &up, &g)?)?;
    Ok(bm.reframe(&gm)?.max_abs_diff(&um)? < 1e-10 && bp.reframe(&gp)?.max_abs_diff(&up)? < 1e-10)
}

fn standard_j_is_constant() -> Result<bool> {
    let (_, gp, g) = grids()?;
    let j = AlmostComplexStructure::standard(1);
    let u = Field::sample(gp, 1, |t, s, out| {
        out[0] = (-0.8 * t).exp() * s.cos();
        out[1] = (-0.8 * t).exp() * s.sin();
    })?;
    let zero = Field::zeros(*u.grid(), 1);
    let constant = eval_j_along(&j, &u)?.max_abs_diff(&eval_j_along(&j, &zero)?)? == 0.0;
    let (gm, gp2, _) = grids()?;
    let (um, up) = generate_test_pair(&TestMapSpec::default(), &gm, &gp2, 1, &WeightedNormParams::default(), 11)?;
    let e = error_term(&um, &up, &g, &j)?;
    let commutes = commutator_check(&up, &g, &j)? == 0.0;
    Ok(constant && e.e_minus.sup_norm() == 0.0 && e.e_plus.sup_norm() == 0.0 && commutes)
}

fn zero_pair() -> Result<bool> {
    let (gm, gp, g) = grids()?;
    let j = AlmostComplexStructure::conjugated(1, 0.3, 3)?;
    let res = n_matrix_form(&Field::zeros(gm, 1), &Field::zeros(gp, 1), &g, &j)?;
    Ok(res.n_minus.sup_norm() == 0.0 && res.n_plus.sup_norm() == 0.0)
}

fn conjugated_squares() -> Result<bool> {
    let j = AlmostComplexStructure::conjugated(1, 0.3, 5)?;
    let mut ws = j.scratch();
    let mut m = vec![0.0; 4];
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let x = [(i as f64 * 0.37).sin() * 2.0, (i as f64 * 0.11).cos() * 2.0];
        j.eval(&x, &mut m, &mut ws)?;
        let sq = [
            m[0] * m[0] + m[1] * m[2] + 1.0,
            m[0] * m[1] + m[1] * m[3],
            m[2] * m[0] + m[3] * m[2],
            m[2] * m[1] + m[3] * m[3] + 1.0,
        ];
        worst = sq.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    Ok(worst < 1e-12)
}

fn normalization_and_determinism() -> Result<bool> {
    let (gm, gp, _) = grids()?;
    let params = WeightedNormParams::default();
    let a = generate_test_pair(&TestMapSpec::default(), &gm, &gp, 1, &params, 42)?;
    let b = generate_test_pair(&TestMapSpec::default(), &gm, &gp, 1, &params, 42)?;
    let norm = weighted_norm(&a.0, &params)? + weighted_norm(&a.1, &params)?;
    Ok(a == b && (norm - 1.0).abs() < 1e-9)
}

fn exact_fits() -> Result<bool> {
    let rs = [36.0, 49.0, 64.0, 81.0, 100.0];
    let exp: Vec<(f64, f64)> = rs.iter().map(|&r: &f64| (r, (-r / 2.0).exp())).collect();
    let flat: Vec<(f64, f64)> = rs.iter().map(|&r| (r, 3.0)).collect();
    Ok((fit_decay(&exp)?.slope + 0.5).abs() < 1e-12 && fit_decay(&flat)?.slope.abs() < 1e-12)
}

fn roundtrip_experiment() -> Result<bool> {
    let cfg = ExperimentConfig { pairs: 2, ns: 16, r_list: vec![36.0, 49.0], ..ExperimentConfig::default() };
    Ok(roundtrip(&cfg)?.pass())
}

pub fn run_selftest() -> Vec<SelfCheck> {
    let checks: [(&'static str, fn() -> Result<bool>); 13] = [
        ("grid step arithmetic", grid_arithmetic),
        ("shift and rotation identities", shift_identities),
        ("alpha symmetry and complement", alpha_symmetry),
        ("gamma plateaus overlap", gamma_plateaus),
        ("desk length arithmetic at R = 100", desk_arithmetic),
        ("profile inverse roundtrip", profile_roundtrip),
        ("glue then unglue is the identity", glue_roundtrip),
        ("standard J: constant, E = 0, commutes", standard_j_is_constant),
        ("zero pair gives N = 0", zero_pair),
        ("conjugated J squares to -1", conjugated_squares),
        ("test maps normalized and seeded", normalization_and_determinism),
        ("exact decay fits", exact_fits),
        ("roundtrip experiment passes", roundtrip_experiment),
    ];
    checks.into_iter().map(|(name, f)| SelfCheck { name, result: f() }).collect()
}
