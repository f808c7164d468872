//! Weighted Sobolev norms `L^p_{k, delta}`, windowed `C^m` norms and
//! randomized operator-norm probes.
//!
//! `||u||_{k,p,delta}^p = sum_{i + j <= k} int int |d_t^i d_s^j u|^p e^{p delta |t|} dt ds`
//! with trapezoidal quadrature in `t` and the periodic rule in `s`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{CylinderGrid, Field};
use crate::testmaps::{generate_test_pair, TestMapSpec};

/// Highest derivative order the stencils support.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNormParams {
    pub k: usize,
    pub p: f64,
    pub delta: f64,
}

impl Default for WeightedNormParams {
    fn default() -> Self {
        Self { k: 3, p: 3.0, delta: 0.5 }
    }
}

impl WeightedNormParams {
    /// Admissible parameters: `p > 2`, `k - 2/p > 1`, `0 < delta < 1`, `k <= 4`.
    pub fn new(k: usize, p: f64, delta: f64) -> Result<Self> {
        if !(p > 2.0) {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 2")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must lie in (0, 1)")));
        }
        if k > MAX_ORDER {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds the supported order {MAX_ORDER}")));
        }
        if !(k as f64 - 2.0 / p > 1.0) {
            return Err(Error::InvalidParameter(format!("k - 2/p = {} must exceed 1", k as f64 - 2.0 / p)));
        }
        Ok(Self { k, p, delta })
    }

    /// The stronger hypothesis `k - 2/p > 2` needed for the parameter derivatives.
    pub fn check_parameter_derivatives(&self) -> Result<()> {
        if self.k as f64 - 2.0 / self.p > 2.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("k - 2/p = {} must exceed 2", self.k as f64 - 2.0 / self.p)))
        }
    }

    /// Same `p` and `delta` at another derivative order (no admissibility check).
    pub fn order(&self, k: usize) -> Self {
        Self { k, ..*self }
    }

    /// The target order `k - 1`.
    pub fn lower(&self) -> Self {
        self.order(self.k.saturating_sub(1))
    }
}

/// All `d_t^i d_s^j u` with `i + j <= k`, `t`-derivatives applied first.
pub fn derivative_family(u: &Field, k: usize) -> Result<Vec<Field>> {
    if k > MAX_ORDER {
        return Err(Error::InvalidParameter(format!("derivative order {k} exceeds {MAX_ORDER}")));
    }
    let mut out = Vec::new();
    let mut dt = u.clone();
    for i in 0..=k {
        if i > 0 {
            dt = dt.d_t()?;
        }
        let mut ds = dt.clone();
        for j in 0..=(k - i) {
            if j > 0 {
                ds = ds.d_s();
            }
            out.push(ds.clone());
        }
    }
    Ok(out)
}

/// `int int |f|^p e^{p delta |t|}` for one field, weights applied in log space.
fn weighted_integral(f: &Field, p: f64, delta: f64) -> f64 {
    let g = f.grid();
    let nt = g.nt();
    let rows: Vec<f64> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let t = g.t(i);
            let end = if nt > 1 && (i == 0 || i == nt - 1) { 0.5 } else { 1.0 };
            let mut acc = 0.0;
            for j in 0..g.ns() {
                let m = f.magnitude(i, j);
                if m > 0.0 {
                    acc += (p * (m.ln() + delta * t.abs())).exp();
                }
            }
            acc * end
        })
        .collect();
    rows.iter().sum::<f64>() * g.h_t() * g.h_s()
}

/// `||u||_{k,p,delta}`; `k <= 4`, `p >= 1`, `delta >= 0`.
pub fn weighted_norm(u: &Field, params: &WeightedNormParams) -> Result<f64> {
    if !(params.p >= 1.0) || !(params.delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("p = {}, delta = {}", params.p, params.delta)));
    }
    if params.k > 0 && u.grid().nt() < 5 {
        return Err(Error::InvalidGrid(format!("{} t-nodes are too few for derivative stencils", u.grid().nt())));
    }
    let total: f64 = derivative_family(u, params.k)?.iter().map(|f| weighted_integral(f, params.p, params.delta)).sum();
    let norm = total.powf(1.0 / params.p);
    if !norm.is_finite() {
        return Err(Error::NonFinite(format!(
            "weighted norm overflows: the field does not decay faster than delta = {}",
            params.delta
        )));
    }
    Ok(norm)
}

/// `||u_-|| + ||u_+||`.
pub fn pair_norm(u_minus: &Field, u_plus: &Field, params: &WeightedNormParams) -> Result<f64> {
    Ok(weighted_norm(u_minus, params)? + weighted_norm(u_plus, params)?)
}

/// Largest node magnitude of every `d_t^i d_s^j u`, `i + j <= m`, over `[a, b] x S^1`.
pub fn cm_window_norm(u: &Field, m: usize, a: f64, b: f64) -> Result<f64> {
    let g = u.grid();
    let slack = 1e-9 * g.h_t();
    if a > b || a < g.t_min() - slack || b > g.t_max() + slack {
        return Err(Error::WindowOutOfRange { a, b, t_min: g.t_min(), t_max: g.t_max() });
    }
    Ok(derivative_family(u, m)?.iter().map(|f| f.sup_on(a, b)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    /// Largest `||A xi||_{k-1,p,delta}` seen; a lower bound for the operator norm.
    pub value: f64,
    pub probes: usize,
}

/// Lower bound for `sup_{||xi||_{k,p,delta} = 1} ||A xi||_{k-1,p,delta}` from
/// `n_probes` random unit probe pairs on `(grid_minus, grid_plus)`. Every
/// output field of `A` contributes to the target norm. Probe `i` uses seed
/// `seed + i`, so the result does not depend on the thread count.
pub fn operator_norm_probe<A>(
    a: A,
    grid_minus: &CylinderGrid,
    grid_plus: &CylinderGrid,
    dim: usize,
    params: &WeightedNormParams,
    spec: &TestMapSpec,
    n_probes: usize,
    seed: u64,
) -> Result<ProbeResult>
where
    A: Fn(&Field, &Field) -> Result<Vec<Field>> + Sync,
{
    let target = params.lower();
    let values: Vec<f64> = (0..n_probes)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let (xm, xp) = generate_test_pair(spec, grid_minus, grid_plus, dim, params, seed.wrapping_add(i as u64))?;
            let mut total = 0.0;
            for f in a(&xm, &xp)? {
                total += weighted_norm(&f, &target)?;
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;
    Ok(ProbeResult { value: values.into_iter().fold(0.0, f64::max), probes: n_probes })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn exp_field(t0: f64, t1: f64, h: f64, ns: usize) -> Field {
        let g = CylinderGrid::with_step(t0, t1, h, ns).unwrap();
        Field::sample(g, 1, |t, _, o| {
            o[0] = (-t).exp();
            o[1] = 0.0;
        })
        .unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(WeightedNormParams::new(3, 3.0, 0.5).is_ok());
        assert!(WeightedNormParams::new(3, 2.0, 0.5).is_err());
        assert!(WeightedNormParams::new(3, 3.0, 1.0).is_err());
        assert!(WeightedNormParams::new(1, 3.0, 0.5).is_err());
        assert!(WeightedNormParams::new(5, 3.0, 0.5).is_err());
        assert!(WeightedNormParams::new(3, 3.0, 0.5).unwrap().check_parameter_derivatives().is_ok());
        assert!(WeightedNormParams::new(2, 2.5, 0.5).unwrap().check_parameter_derivatives().is_err());
    }

    #[test]
    fn exponential_closed_form() {
        let u = exp_field(0.0, 60.0, 0.005, 16);
        let n = weighted_norm(&u, &WeightedNormParams::default().order(0)).unwrap();
        let exact = (4.0 * PI / 3.0).powf(1.0 / 3.0);
        assert!((n - exact).abs() < 1e-5, "{n} vs {exact}");
        let zero = u.scale(0.0);
        assert_eq!(weighted_norm(&zero, &WeightedNormParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_enter_the_norm() {
        // e^{-t}: every t-derivative has the same modulus, s-derivatives vanish
        let u = exp_field(0.0, 60.0, 0.01, 16);
        let p = WeightedNormParams::default();
        let n = weighted_norm(&u, &p).unwrap();
        let exact = (4.0 * (4.0 * PI / 3.0)).powf(1.0 / 3.0);
        assert!((n - exact).abs() < 1e-3 * exact, "{n} vs {exact}");
    }

    #[test]
    fn norm_axioms_and_nesting() {
        let g = CylinderGrid::with_step(-20.0, 20.0, 0.125, 32).unwrap();
        let u = Field::sample(g, 1, |t, s, o| {
            o[0] = (-0.9 * t.abs()).exp() * (s.cos() + 0.1 * t.sin());
            o[1] = (-0.8 * t * t / (1.0 + t.abs())).exp() * (2.0 * s).sin();
        })
        .unwrap();
        let v = Field::sample(g, 1, |t, s, o| {
            o[0] = (-t * t).exp() * s.sin();
            o[1] = (-t * t).exp();
        })
        .unwrap();
        let p = WeightedNormParams::default();
        let nu = weighted_norm(&u, &p).unwrap();
        let nv = weighted_norm(&v, &p).unwrap();
        assert!((weighted_norm(&u.scale(-2.5), &p).unwrap() - 2.5 * nu).abs() < 1e-12 * nu);
        assert!(weighted_norm(&u.add(&v).unwrap(), &p).unwrap() <= nu + nv);
        assert!(weighted_norm(&u, &p.lower()).unwrap() <= nu);
        let lo = weighted_norm(&u, &WeightedNormParams { delta: 0.2, ..p }).unwrap();
        assert!(lo <= nu);
    }

    #[test]
    fn quadrature_converges() {
        let f = |h: f64| {
            let g = CylinderGrid::with_step(0.0, 40.0, h, 32).unwrap();
            let u = Field::sample(g, 1, |t, s, o| {
                o[0] = (-0.8 * t).exp() * s.cos();
                o[1] = (-0.8 * t).exp() * (2.0 * s).sin();
            })
            .unwrap();
            weighted_norm(&u, &WeightedNormParams::default()).unwrap()
        };
        let (a, b) = (f(0.25), f(0.125));
        assert!((a - b).abs() <= 0.01 * b);
    }

    #[test]
    fn window_norm() {
        let u = exp_field(0.0, 10.0, 0.25, 16);
        assert!((cm_window_norm(&u, 0, 2.0, 3.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!((cm_window_norm(&u, 2, 2.0, 3.0).unwrap() - (-2.0f64).exp()).abs() < 1e-6);
        assert_eq!(cm_window_norm(&u.scale(0.0), 2, 2.0, 3.0).unwrap(), 0.0);
        assert!(cm_window_norm(&u, 0, 2.0, 11.0).is_err());
    }

    #[test]
    fn non_decaying_field_overflows() {
        let g = CylinderGrid::with_step(0.0, 3000.0, 1.0, 16).unwrap();
        let u = Field::sample(g, 1, |_, _, o| {
            o[0] = 1.0;
            o[1] = 0.0;
        })
        .unwrap();
        assert!(matches!(weighted_norm(&u, &WeightedNormParams::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn probes_of_simple_operators() {
        let gm = CylinderGrid::with_step(-40.0, 0.0, 0.25, 16).unwrap();
        let gp = CylinderGrid::with_step(0.0, 40.0, 0.25, 16).unwrap();
        let p = WeightedNormParams::default();
        let spec = TestMapSpec::default();
        let zero = operator_norm_probe(|a, b| Ok(vec![a.scale(0.0), b.scale(0.0)]), &gm, &gp, 1, &p, &spec, 8, 1).unwrap();
        assert_eq!(zero.value, 0.0);
        let id = operator_norm_probe(|a, b| Ok(vec![a.clone(), b.clone()]), &gm, &gp, 1, &p, &spec, 8, 1).unwrap();
        assert!(id.value > 0.0 && id.value <= 1.0 + 1e-9);
        let c = (-0.5f64 * 0.5 * 36.0).exp();
        let sc = operator_norm_probe(|a, b| Ok(vec![a.scale(c), b.scale(c)]), &gm, &gp, 1, &p, &spec, 8, 1).unwrap();
        assert!(sc.value <= c * (1.0 + 1e-9));
        assert_eq!(sc.probes, 8);
    }
}
