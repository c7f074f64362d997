//! TOML run configuration.
//!
//! Every block is optional and falls back to the defaults below, so an empty
//! file containing only `schema_version = 1` is a valid configuration.
//! Validation errors point at the offending line when the key is present in
//! the file.

use std::f64::consts::PI;
use std::path::PathBuf;

use cfe_core::hermite::HermiteBasis;
use cfe_core::operator::ModelParams;
use cfe_core::{Complex64, ModeLattice};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub overlaps: OverlapsConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub scan: ScanConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub d: usize,
    pub box_len: f64,
    pub m_per_dim: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { d: 1, box_len: 2.0 * PI, m_per_dim: 5 }
    }
}

/// Physical parameters in units with `ħ²/2m = hbar2_over_2m`.
///
/// `u_k` and `gamma_k`, when given, list one entry per lattice mode in
/// lattice order (labels row-major from `-(m-1)/2`); `u_k` entries are
/// `[re, im]` pairs and override `u0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: f64,
    pub gamma_k: Option<Vec<f64>>,
    pub u0: f64,
    pub u_k: Option<Vec<[f64; 2]>>,
    pub n_particles: u32,
    pub epsilon: f64,
    pub kappa: f64,
    pub p_exp: f64,
    pub q_exp: f64,
    pub r: f64,
    pub hbar2_over_2m: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            gamma_k: None,
            u0: 0.0,
            u_k: None,
            n_particles: 2,
            epsilon: 0.5,
            kappa: 1.0,
            p_exp: 0.5,
            q_exp: 0.5,
            r: 1.0,
            hbar2_over_2m: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub n_max: usize,
    /// Multiplies the variance-matched Hermite widths.
    pub width_factor: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { n_max: 3, width_factor: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Eigenpairs reported by `spectrum`.
    pub eigen_count: usize,
    /// Pass threshold for the identity checks.
    pub tolerance: f64,
    pub threads: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: SolverMethod::Dense, eigen_count: 10, tolerance: 1e-10, threads: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
    /// Also dump the assembled operator as a triplet file (`spectrum`).
    pub write_matrix: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("cfe-out"), format: Format::Csv, write_matrix: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapsConfig {
    pub grid_points: usize,
    pub n_fields: usize,
    pub mq: usize,
    pub max_n: u32,
    pub seed: u64,
}

impl Default for OverlapsConfig {
    fn default() -> Self {
        Self { grid_points: 16, n_fields: 8, mq: 64, max_n: 8, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    Weak,
    Full,
    Scaled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub variant: VariantChoice,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { variant: VariantChoice::Full }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub couplings: Vec<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { couplings: vec![1.0, 0.3, 0.1, 0.03, 0.01] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub max_order: usize,
    pub epsilons: Vec<f64>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { max_order: 4, epsilons: vec![0.05, 0.1, 0.2, 0.3, 0.4] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub epsilons: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { epsilons: vec![0.1, 0.5, 1.0] }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            lattice: LatticeConfig::default(),
            params: ParamsConfig::default(),
            basis: BasisConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            overlaps: OverlapsConfig::default(),
            spectrum: SpectrumConfig::default(),
            compare: CompareConfig::default(),
            perturb: PerturbConfig::default(),
            scan: ScanConfig::default(),
        }
    }
}

/// Line (1-based) of `key` inside `[section]`, if the file sets it.
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some(rest) = l.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, section: &str, key: &str, msg: String) -> CliError {
        let name = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        match line_of(self.text, section, key) {
            Some(line) => CliError::Config(format!("line {line}: {name}: {msg}")),
            None => CliError::Config(format!("{name}: {msg}")),
        }
    }

    fn positive(&self, section: &str, key: &str, v: f64) -> Result<(), CliError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(self.fail(section, key, format!("must be positive and finite, got {v}")))
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration file's contents.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    /// Checks every physical parameter; `text` is the source used for line numbers.
    pub fn validate(&self, text: &str) -> Result<(), CliError> {
        let ck = Checker { text };
        if self.schema_version != SCHEMA_VERSION {
            return Err(ck.fail(
                "",
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let l = &self.lattice;
        if !(1..=3).contains(&l.d) {
            return Err(ck.fail("lattice", "d", format!("must be 1, 2 or 3, got {}", l.d)));
        }
        ck.positive("lattice", "box_len", l.box_len)?;
        if l.m_per_dim % 2 == 0 {
            return Err(ck.fail("lattice", "m_per_dim", format!("must be odd, got {}", l.m_per_dim)));
        }
        let lattice = self.lattice()?;
        let n_modes = lattice.len();

        let p = &self.params;
        ck.positive("params", "gamma", p.gamma)?;
        ck.positive("params", "kappa", p.kappa)?;
        ck.positive("params", "r", p.r)?;
        ck.positive("params", "hbar2_over_2m", p.hbar2_over_2m)?;
        for (key, v) in [("u0", p.u0), ("epsilon", p.epsilon), ("p_exp", p.p_exp), ("q_exp", p.q_exp)] {
            if !v.is_finite() {
                return Err(ck.fail("params", key, format!("must be finite, got {v}")));
            }
        }
        if let Some(u) = &p.u_k {
            if u.len() != n_modes {
                return Err(ck.fail(
                    "params",
                    "u_k",
                    format!("has {} entries but the lattice has {n_modes} modes", u.len()),
                ));
            }
            for (i, [re, im]) in u.iter().enumerate() {
                let [pre, pim] = u[lattice.negate(i)];
                if !(re.is_finite() && im.is_finite()) {
                    return Err(ck.fail("params", "u_k", format!("entry {i} is not finite")));
                }
                if (re - pre).abs() > 1e-12 * re.abs().max(1.0) || (im + pim).abs() > 1e-12 * im.abs().max(1.0) {
                    return Err(ck.fail("params", "u_k", format!("entry {i} breaks u(-k) = conj(u(k))")));
                }
            }
        }
        if let Some(g) = &p.gamma_k {
            if g.len() != n_modes {
                return Err(ck.fail(
                    "params",
                    "gamma_k",
                    format!("has {} entries but the lattice has {n_modes} modes", g.len()),
                ));
            }
            for (i, v) in g.iter().enumerate() {
                if !(v.is_finite() && *v > 0.0) || *v != g[lattice.negate(i)] {
                    return Err(ck.fail("params", "gamma_k", format!("entry {i} must be positive and even in k")));
                }
            }
        }
        ck.positive("basis", "width_factor", self.basis.width_factor)?;

        let s = &self.solver;
        if s.method == SolverMethod::Iterative {
            return Err(ck.fail(
                "solver",
                "method",
                format!(
                    "the iterative eigensolver is not available; use \"dense\" (matrices up to {} states)",
                    cfe_core::spectral::DENSE_LIMIT
                ),
            ));
        }
        ck.positive("solver", "tolerance", s.tolerance)?;
        if s.eigen_count == 0 {
            return Err(ck.fail("solver", "eigen_count", "must be at least 1".into()));
        }
        if s.threads == Some(0) {
            return Err(ck.fail("solver", "threads", "must be at least 1".into()));
        }

        let o = &self.overlaps;
        if o.grid_points == 0 {
            return Err(ck.fail("overlaps", "grid_points", "must be at least 1".into()));
        }
        if o.n_fields == 0 {
            return Err(ck.fail("overlaps", "n_fields", "must be at least 1".into()));
        }
        if o.mq < 2 {
            return Err(ck.fail("overlaps", "mq", format!("must be at least 2, got {}", o.mq)));
        }
        if self.compare.couplings.is_empty() || self.compare.couplings.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
            return Err(ck.fail("compare", "couplings", "must be a non-empty list of positive couplings".into()));
        }
        for (section, list) in [("perturb", &self.perturb.epsilons), ("scan", &self.scan.epsilons)] {
            if list.is_empty() || list.iter().any(|e| !e.is_finite()) {
                return Err(ck.fail(section, "epsilons", "must be a non-empty list of finite values".into()));
            }
        }
        if self.perturb.epsilons.iter().any(|&e| e == 0.0) {
            return Err(ck.fail("perturb", "epsilons", "must not contain 0".into()));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<ModeLattice, CliError> {
        Ok(ModeLattice::new(self.lattice.d, self.lattice.box_len, self.lattice.m_per_dim)?)
    }

    /// Model parameters with `epsilon` taken from the config.
    pub fn model_params(&self, lattice: &ModeLattice) -> ModelParams {
        let p = &self.params;
        let mut m = ModelParams::new(lattice, p.gamma, p.n_particles as u64)
            .with_u0(p.u0)
            .with_epsilon(p.epsilon)
            .with_scaling(p.kappa, p.p_exp, p.q_exp);
        if let Some(u) = &p.u_k {
            m = m.with_u_k(u.iter().map(|&[re, im]| Complex64::new(re, im)).collect());
        }
        if let Some(g) = &p.gamma_k {
            m = m.with_gamma_k(g.clone());
        }
        m
    }

    pub fn hermite_basis(&self, lattice: &ModeLattice) -> Result<HermiteBasis, CliError> {
        Ok(HermiteBasis::with_width_factor(lattice, self.params.gamma, self.basis.n_max, self.basis.width_factor)?)
    }
}
