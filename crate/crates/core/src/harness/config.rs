//! Flat `key = value` experiment configuration. Lists are comma-separated,
//! `#` starts a comment, unknown keys are rejected.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::cutoffs::{GluingData, LengthVariant};
use crate::error::{Error, Result};
use crate::grid::{lattice_steps, CylinderGrid};
use crate::jstruct::AlmostComplexStructure;
use crate::norms::WeightedNormParams;
use crate::testmaps::{Envelope, TestMapSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Roundtrip,
    Regions,
    Decay,
    DerivativeCheck,
    C1Limit,
    Commutativity,
    Estimates,
    All,
}

impl Experiment {
    pub const SUITE: [Experiment; 7] = [
        Experiment::Roundtrip,
        Experiment::Regions,
        Experiment::Decay,
        Experiment::DerivativeCheck,
        Experiment::C1Limit,
        Experiment::Commutativity,
        Experiment::Estimates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Roundtrip => "roundtrip",
            Experiment::Regions => "regions",
            Experiment::Decay => "decay",
            Experiment::DerivativeCheck => "derivative_check",
            Experiment::C1Limit => "c1_limit",
            Experiment::Commutativity => "commutativity",
            Experiment::Estimates => "estimates",
            Experiment::All => "all",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::SUITE
            .into_iter()
            .chain([Experiment::All])
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JSpec {
    Standard,
    Conjugated(f64),
}

impl JSpec {
    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "standard" {
            return Ok(JSpec::Standard);
        }
        let eps = s
            .strip_prefix("conjugated(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("bad J spec '{s}', expected standard or conjugated(eps)")))?;
        Ok(JSpec::Conjugated(parse_f64("j", eps)?))
    }

    pub fn build(self, n: usize, seed: u64) -> Result<AlmostComplexStructure> {
        match self {
            JSpec::Standard => Ok(AlmostComplexStructure::standard(n)),
            JSpec::Conjugated(eps) => AlmostComplexStructure::conjugated(n, eps, seed),
        }
    }

    pub fn label(self) -> String {
        match self {
            JSpec::Standard => "standard".into(),
            JSpec::Conjugated(eps) => format!("conjugated({eps})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Complex dimension.
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub delta: f64,
    pub variant: LengthVariant,
    pub m: u32,
    pub r_list: Vec<f64>,
    /// Twist angles; snapped to multiples of `h_s`.
    pub theta_list: Vec<f64>,
    pub h_t: f64,
    pub ns: usize,
    pub seed: u64,
    pub j: Vec<JSpec>,
    pub output_dir: PathBuf,
    /// Decay `delta'` of the test maps.
    pub decay: f64,
    pub envelope: Envelope,
    pub modes: Vec<(i32, f64)>,
    /// Seeded test pairs per sweep point.
    pub pairs: usize,
    /// Probes per operator-norm estimate.
    pub probes: usize,
    /// Amplitude step for `D_W` finite differences (halved once).
    pub fd_h: f64,
    /// Lattice step for the finite differences in `R`.
    pub fd_h_t: f64,
    /// `eps` of the unequal-blocks commutator probe.
    pub probe_eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let spec = TestMapSpec::default();
        Self {
            experiment: Experiment::All,
            n: 1,
            k: 3,
            p: 3.0,
            delta: 0.5,
            variant: LengthVariant::Desk,
            m: 1,
            r_list: vec![36.0, 49.0, 64.0, 81.0, 100.0],
            theta_list: vec![0.0],
            h_t: 0.25,
            ns: 32,
            seed: 20240601,
            j: vec![JSpec::Standard, JSpec::Conjugated(0.3)],
            output_dir: PathBuf::from("splice-out"),
            decay: spec.decay,
            envelope: spec.envelope,
            modes: spec.modes,
            pairs: 50,
            probes: 64,
            fd_h: 0.1,
            fd_h_t: 1.0 / 64.0,
            probe_eps: 0.3,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: '{v}' is not a non-negative integer")))
}

fn parse_list<T>(key: &str, v: &str, one: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    items.into_iter().map(|s| one(key, s)).collect()
}

fn parse_mode(key: &str, v: &str) -> Result<(i32, f64)> {
    let (m, a) = v.split_once(':').ok_or_else(|| Error::Config(format!("{key}: mode '{v}' must be m:amplitude")))?;
    let m = m.trim().parse().map_err(|_| Error::Config(format!("{key}: bad mode number '{m}'")))?;
    Ok((m, parse_f64(key, a)?))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "experiment" => c.experiment = value.parse()?,
                "n" => c.n = parse_usize(key, value)?,
                "k" => c.k = parse_usize(key, value)?,
                "p" => c.p = parse_f64(key, value)?,
                "delta" => c.delta = parse_f64(key, value)?,
                "variant" => {
                    c.variant = LengthVariant::parse(value).ok_or_else(|| Error::Config(format!("unknown variant '{value}'")))?
                }
                "m" => c.m = parse_usize(key, value)? as u32,
                "r_list" => c.r_list = parse_list(key, value, parse_f64)?,
                "theta_list" => c.theta_list = parse_list(key, value, parse_f64)?,
                "h_t" => c.h_t = parse_f64(key, value)?,
                "ns" => c.ns = parse_usize(key, value)?,
                "seed" => c.seed = value.parse().map_err(|_| Error::Config(format!("seed: '{value}' is not an integer")))?,
                "j" => c.j = parse_list(key, value, |_, s| JSpec::parse(s))?,
                "output_dir" => c.output_dir = PathBuf::from(value),
                "decay" => c.decay = parse_f64(key, value)?,
                "envelope" => {
                    c.envelope = match value {
                        "exp" => Envelope::Exp,
                        "exp_poly" => Envelope::ExpPoly,
                        _ => return Err(Error::Config(format!("unknown envelope '{value}'"))),
                    }
                }
                "modes" => c.modes = parse_list(key, value, parse_mode)?,
                "pairs" => c.pairs = parse_usize(key, value)?,
                "probes" => c.probes = parse_usize(key, value)?,
                "fd_h" => c.fd_h = parse_f64(key, value)?,
                "fd_h_t" => c.fd_h_t = parse_f64(key, value)?,
                "probe_eps" => c.probe_eps = parse_f64(key, value)?,
                _ => return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.pairs == 0 || self.probes == 0 {
            return bad("pairs and probes must be positive".into());
        }
        if !(self.h_t > 0.0) || !(self.fd_h_t > 0.0) || !(self.fd_h > 0.0) {
            return bad("h_t, fd_h_t and fd_h must be positive".into());
        }
        if self.ns < 16 || self.ns % 2 != 0 {
            return bad(format!("ns = {} must be even and at least 16", self.ns));
        }
        if !(self.decay > self.delta) {
            return bad(format!("test map decay {} must exceed delta {}", self.decay, self.delta));
        }
        if self.modes.is_empty() || self.r_list.is_empty() || self.theta_list.is_empty() || self.j.is_empty() {
            return bad("modes, r_list, theta_list and j must be non-empty".into());
        }
        WeightedNormParams::new(self.k, self.p, self.delta).map_err(|e| Error::Config(e.to_string()))?;
        self.gluings().map_err(|e| Error::Config(e.to_string()))?;
        for j in &self.j {
            j.build(self.n, self.seed).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn params(&self) -> WeightedNormParams {
        WeightedNormParams { k: self.k, p: self.p, delta: self.delta }
    }

    pub fn spec(&self) -> TestMapSpec {
        TestMapSpec { decay: self.decay, modes: self.modes.clone(), envelope: self.envelope }
    }

    pub fn h_s(&self) -> f64 {
        TAU / self.ns as f64
    }

    /// `R` rounded up to the lattice.
    pub fn snap_r(&self, r: f64) -> f64 {
        (r / self.h_t - 1e-9).ceil() * self.h_t
    }

    /// `theta` rounded to the nearest multiple of `h_s`.
    pub fn snap_theta(&self, theta: f64) -> f64 {
        let hs = self.h_s();
        (theta / hs).round() * hs
    }

    /// Snapped, ascending `R` values.
    pub fn snapped_r_list(&self) -> Vec<f64> {
        let mut rs: Vec<f64> = self.r_list.iter().map(|&r| self.snap_r(r)).collect();
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        rs
    }

    /// Gluing data for every `(R, theta)`, ordered by `R` then `theta`.
    pub fn gluings(&self) -> Result<Vec<GluingData>> {
        let hs = self.h_s();
        let mut out = Vec::new();
        for r in self.snapped_r_list() {
            lattice_steps("R", r, self.h_t)?;
            for &theta in &self.theta_list {
                out.push(GluingData::new(r, self.snap_theta(theta), self.m, self.variant, self.h_t, hs)?);
            }
        }
        Ok(out)
    }

    /// Half-cylinder grids long enough for every sweep point.
    pub fn grids(&self) -> Result<(CylinderGrid, CylinderGrid)> {
        self.grids_with(self.h_t)
    }

    pub fn grids_with(&self, h_t: f64) -> Result<(CylinderGrid, CylinderGrid)> {
        let gs = self.gluings()?;
        let len = gs.iter().map(|g| g.default_half_length()).fold(0.0, f64::max);
        let len = (len / h_t).ceil() * h_t;
        Ok((CylinderGrid::with_step(-len, 0.0, h_t, self.ns)?, CylinderGrid::with_step(0.0, len, h_t, self.ns)?))
    }

    /// Every `(key, value)` in the canonical text form, for `summary.json`.
    pub fn render(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let variant = match self.variant {
            LengthVariant::Desk => "desk",
            LengthVariant::Paper => "paper",
        };
        let envelope = match self.envelope {
            Envelope::Exp => "exp",
            Envelope::ExpPoly => "exp_poly",
        };
        let modes = self.modes.iter().map(|(m, a)| format!("{m}:{a}")).collect::<Vec<_>>().join(", ");
        let js = self.j.iter().map(|j| j.label()).collect::<Vec<_>>().join(", ");
        format!(
            "experiment = {}\nn = {}\nk = {}\np = {}\ndelta = {}\nvariant = {variant}\nm = {}\nr_list = {}\ntheta_list = {}\nh_t = {}\nns = {}\nseed = {}\nj = {js}\noutput_dir = {}\ndecay = {}\nenvelope = {envelope}\nmodes = {modes}\npairs = {}\nprobes = {}\nfd_h = {}\nfd_h_t = {}\nprobe_eps = {}\n",
            self.experiment,
            self.n,
            self.k,
            self.p,
            self.delta,
            self.m,
            list(&self.r_list),
            list(&self.theta_list),
            self.h_t,
            self.ns,
            self.seed,
            self.output_dir.display(),
            self.decay,
            self.pairs,
            self.probes,
            self.fd_h,
            self.fd_h_t,
            self.probe_eps,
        )
    }
}
