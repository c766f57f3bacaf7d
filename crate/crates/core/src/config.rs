//! Experiment configuration: TOML schema, shift definitions and validation.
//!
//! A config names its scenario and carries one flat table of parameters for
//! it. Shifts are given inline or as paths (relative to the config file) to
//! shift-definition files with the same schema.

use std::path::{Path, PathBuf};

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::TTSystem;
use crate::error::{Error, Result};
use crate::limit::{LimitGrid, ZParams};
use crate::moments::MomentSpec;
use crate::symbolic::{
    ball_generation, boundary_radius, parry_measure, MarkovMeasure, MarkovShift, Sided,
    Symbol, TransitionMatrix,
};

/// Relative slack when checking that a radius is a cylinder boundary.
const BOUNDARY_TOL: f64 = 1e-9;

/// Lyapunov exponent, either literal or as `{ log = L }` meaning `ln L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lyapunov {
    Value(f64),
    Log { log: f64 },
}

impl Lyapunov {
    pub fn value(&self) -> f64 {
        match *self {
            Lyapunov::Value(v) => v,
            Lyapunov::Log { log } => log.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureDef {
    Parry,
    Markov {
        kernel: Vec<Vec<f64>>,
        #[serde(default)]
        initial: Option<Vec<f64>>,
    },
}

/// Schema of a shift definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftDef {
    pub alphabet_size: usize,
    /// Allowed transitions; omitted means the full shift.
    #[serde(default)]
    pub transitions: Option<Vec<Vec<u8>>>,
    pub lyapunov: Lyapunov,
    pub sided: Sided,
    #[serde(default = "parry")]
    pub measure: MeasureDef,
}

fn parry() -> MeasureDef {
    MeasureDef::Parry
}

impl ShiftDef {
    pub fn build(&self) -> Result<MarkovShift> {
        let n = self.alphabet_size;
        if n == 0 || n > Symbol::MAX as usize {
            return Err(Error::Config(format!("alphabet_size must be in 1..=255, got {n}")));
        }
        let t = match &self.transitions {
            Some(rows) => {
                if rows.len() != n {
                    return Err(Error::Config(format!(
                        "transitions has {} rows, alphabet_size is {n}",
                        rows.len()
                    )));
                }
                TransitionMatrix::new(rows)?
            }
            None => TransitionMatrix::full(n),
        };
        let m = match &self.measure {
            MeasureDef::Parry => parry_measure(&t)?,
            MeasureDef::Markov { kernel, initial } => MarkovMeasure::markov(&t, kernel, initial.as_deref())?,
        };
        MarkovShift::new(t, m, self.lyapunov.value(), self.sided)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read shift file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("shift file {}: {e}", path.display())))
    }
}

/// A shift given inline or by file path.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ShiftSource {
    File(PathBuf),
    Inline(ShiftDef),
}

impl<'de> Deserialize<'de> for ShiftSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match toml::Value::deserialize(d)? {
            toml::Value::String(s) => Ok(ShiftSource::File(s.into())),
            other => ShiftDef::deserialize(other).map(ShiftSource::Inline).map_err(D::Error::custom),
        }
    }
}

impl ShiftSource {
    pub fn resolve(&self, base: &Path) -> Result<ShiftDef> {
        match self {
            ShiftSource::File(p) => ShiftDef::load(&base.join(p)),
            ShiftSource::Inline(d) => Ok(d.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDef {
    pub x: ShiftSource,
    pub y: ShiftSource,
    pub cocycle: Vec<i64>,
}

impl SystemDef {
    pub fn build(&self, base: &Path) -> Result<TTSystem> {
        let x = self.x.resolve(base)?.build()?;
        let y = self.y.resolve(base)?.build()?;
        TTSystem::new(x, y, self.cocycle.clone())
    }
}

/// Base shift with a cocycle, for scenarios that never touch `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseDef {
    pub x: ShiftSource,
    pub cocycle: Vec<i64>,
}

/// Initial points: fresh per trial, or all inside one ball.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StartDef {
    #[default]
    Annealed,
    Conditional { x_word: Vec<Symbol>, y_word: Vec<Symbol> },
}

fn d_cap() -> f64 {
    100.0
}
fn d_rate_tol() -> f64 {
    0.15
}
fn d_ks_tol() -> f64 {
    0.05
}
fn d_reference() -> usize {
    1_000_000
}
fn d_horizon() -> f64 {
    1.0
}
fn d_mean_tol() -> f64 {
    0.10
}
fn d_var_tol() -> f64 {
    0.15
}
fn d_z() -> f64 {
    3.0
}
fn d_llt_rel() -> f64 {
    0.02
}
fn d_growth() -> f64 {
    2.0
}
fn d_exact_tol() -> f64 {
    1e-12
}
fn d_limit_tol() -> f64 {
    0.1
}
fn d_moment_paths() -> usize {
    10_000
}
fn d_direct() -> usize {
    100_000
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceRateConfig {
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub system: SystemDef,
    pub radii: Vec<f64>,
    pub trials: usize,
    #[serde(default = "d_cap")]
    pub cap_factor: f64,
    /// Relative tolerance on the slope.
    #[serde(default = "d_rate_tol")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstReturnConfig {
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub system: SystemDef,
    pub radii: Vec<f64>,
    pub trials: usize,
    #[serde(default = "d_cap")]
    pub cap_factor: f64,
    #[serde(default = "d_reference")]
    pub reference_samples: usize,
    #[serde(default = "d_ks_tol")]
    pub ks_tolerance: f64,
    /// Whether "KS distance decreases as r decreases" is a hard check.
    #[serde(default = "d_true")]
    pub require_decreasing: bool,
    #[serde(default)]
    pub start: StartDef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointProcessConfig {
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub system: SystemDef,
    pub radius: f64,
    pub trials: usize,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_mean_tol")]
    pub mean_tolerance: f64,
    #[serde(default = "d_var_tol")]
    pub variance_tolerance: f64,
    #[serde(default)]
    pub start: StartDef,
    /// Paths for the limit-variance estimate when it is not exact.
    #[serde(default = "d_moment_paths")]
    pub moment_paths: usize,
    #[serde(default)]
    pub grid: LimitGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZExtensionConfig {
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub system: BaseDef,
    pub radius: f64,
    pub trials: usize,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_z")]
    pub z_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LltConfig {
    pub seed: u64,
    pub system: BaseDef,
    #[serde(default)]
    pub a_word: Vec<Symbol>,
    #[serde(default)]
    pub b_word: Vec<Symbol>,
    pub n: Vec<usize>,
    #[serde(default)]
    pub k: i64,
    /// Bound on the raw relative error at the largest `n`.
    #[serde(default = "d_llt_rel")]
    pub relative_tolerance: f64,
    /// Allowed growth of the normalised error over the `n` range.
    #[serde(default = "d_growth")]
    pub growth_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitMomentsConfig {
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub specs: Vec<MomentSpec>,
    #[serde(default = "d_moment_paths")]
    pub formula_paths: usize,
    #[serde(default = "d_direct")]
    pub direct_samples: usize,
    #[serde(default)]
    pub grid: LimitGrid,
    #[serde(default = "d_z")]
    pub z_tolerance: f64,
}

impl LimitMomentsConfig {
    pub fn params(&self) -> Result<ZParams> {
        ZParams::new(self.alpha, self.beta, self.sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorollaryConfig {
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub system: SystemDef,
    pub radii: Vec<f64>,
    /// Balls sampled per radius.
    pub trials: usize,
    #[serde(default = "d_exact_tol")]
    pub exact_tolerance: f64,
    /// Tolerance on `(α_r, β_r)` at the smallest radius for cases (a), (b).
    #[serde(default = "d_limit_tol")]
    pub limit_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum Scenario {
    RecurrenceRate(RecurrenceRateConfig),
    FirstReturn(FirstReturnConfig),
    PointProcess(PointProcessConfig),
    ZExtension(ZExtensionConfig),
    Llt(LltConfig),
    LimitMoments(LimitMomentsConfig),
    CorollaryCase(CorollaryConfig),
}

pub const SCENARIOS: [&str; 7] = [
    "recurrence-rate",
    "first-return",
    "point-process",
    "z-extension",
    "llt",
    "limit-moments",
    "corollary-case",
];

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::RecurrenceRate(_) => SCENARIOS[0],
            Scenario::FirstReturn(_) => SCENARIOS[1],
            Scenario::PointProcess(_) => SCENARIOS[2],
            Scenario::ZExtension(_) => SCENARIOS[3],
            Scenario::Llt(_) => SCENARIOS[4],
            Scenario::LimitMoments(_) => SCENARIOS[5],
            Scenario::CorollaryCase(_) => SCENARIOS[6],
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Scenario::RecurrenceRate(c) => c.seed,
            Scenario::FirstReturn(c) => c.seed,
            Scenario::PointProcess(c) => c.seed,
            Scenario::ZExtension(c) => c.seed,
            Scenario::Llt(c) => c.seed,
            Scenario::LimitMoments(c) => c.seed,
            Scenario::CorollaryCase(c) => c.seed,
        }
    }

    pub fn workers(&self) -> Option<usize> {
        match self {
            Scenario::RecurrenceRate(c) => c.workers,
            Scenario::FirstReturn(c) => c.workers,
            Scenario::PointProcess(c) => c.workers,
            Scenario::ZExtension(c) => c.workers,
            Scenario::Llt(_) => None,
            Scenario::LimitMoments(c) => c.workers,
            Scenario::CorollaryCase(c) => c.workers,
        }
    }
}

/// A parsed, validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Directory that relative shift paths are resolved against.
    pub base_dir: PathBuf,
    /// SHA-256 of the config text, lowercase hex.
    pub hash: String,
}

fn parse_table<T: DeserializeOwned>(table: toml::Table, scenario: &str) -> Result<T> {
    T::deserialize(toml::Value::Table(table))
        .map_err(|e| Error::Config(format!("scenario {scenario}: {}", e.to_string().trim_end())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        let name = match table.remove("scenario") {
            Some(toml::Value::String(s)) => s,
            Some(_) => return Err(Error::Config("`scenario` must be a string".into())),
            None => {
                return Err(Error::Config(format!(
                    "missing `scenario`; expected one of {}",
                    SCENARIOS.join(", ")
                )))
            }
        };
        let scenario = match name.as_str() {
            "recurrence-rate" => Scenario::RecurrenceRate(parse_table(table, &name)?),
            "first-return" => Scenario::FirstReturn(parse_table(table, &name)?),
            "point-process" => Scenario::PointProcess(parse_table(table, &name)?),
            "z-extension" => Scenario::ZExtension(parse_table(table, &name)?),
            "llt" => Scenario::Llt(parse_table(table, &name)?),
            "limit-moments" => Scenario::LimitMoments(parse_table(table, &name)?),
            "corollary-case" => Scenario::CorollaryCase(parse_table(table, &name)?),
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario `{other}`; expected one of {}",
                    SCENARIOS.join(", ")
                )))
            }
        };
        let cfg = Self {
            scenario,
            base_dir: base_dir.to_path_buf(),
            hash: sha256_hex(text.as_bytes()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Self::from_str(&text, &base)
    }

    /// Semantic checks beyond the schema; also resolves every shift.
    pub fn validate(&self) -> Result<()> {
        let base = &self.base_dir;
        match &self.scenario {
            Scenario::RecurrenceRate(c) => {
                positive("trials", c.trials)?;
                let sys = c.system.build(base)?;
                check_radii(&c.radii, &[sys.x().lyapunov(), sys.y().lyapunov()])?;
                if c.radii.len() < 4 {
                    return Err(Error::Config("recurrence-rate needs at least four radii".into()));
                }
                positive_f("cap_factor", c.cap_factor)
            }
            Scenario::FirstReturn(c) => {
                positive("trials", c.trials)?;
                positive("reference_samples", c.reference_samples)?;
                let sys = c.system.build(base)?;
                check_radii(&c.radii, &[sys.x().lyapunov(), sys.y().lyapunov()])?;
                if c.system.cocycle.iter().all(|&v| v == 0) {
                    return Err(Error::Config("first-return needs a nonzero cocycle".into()));
                }
                positive_f("cap_factor", c.cap_factor)
            }
            Scenario::PointProcess(c) => {
                positive("trials", c.trials)?;
                let sys = c.system.build(base)?;
                check_radii(&[c.radius], &[sys.x().lyapunov(), sys.y().lyapunov()])?;
                positive_f("horizon", c.horizon)
            }
            Scenario::ZExtension(c) => {
                positive("trials", c.trials)?;
                let x = c.system.x.resolve(base)?.build()?;
                crate::cocycle::Cocycle::new(&x, c.system.cocycle.clone())?;
                check_radii(&[c.radius], &[x.lyapunov()])?;
                positive_f("horizon", c.horizon)
            }
            Scenario::Llt(c) => {
                let x = c.system.x.resolve(base)?.build()?;
                crate::cocycle::Cocycle::new(&x, c.system.cocycle.clone())?;
                if c.n.is_empty() || c.n.windows(2).any(|w| w[0] >= w[1]) || c.n[0] == 0 {
                    return Err(Error::Config("llt `n` must be a nonempty increasing list of positive integers".into()));
                }
                Ok(())
            }
            Scenario::LimitMoments(c) => {
                c.params()?;
                if c.specs.is_empty() {
                    return Err(Error::Config("limit-moments needs at least one spec".into()));
                }
                for s in &c.specs {
                    s.validate()?;
                }
                positive("formula_paths", c.formula_paths.saturating_sub(1))?;
                positive("direct_samples", c.direct_samples.saturating_sub(1))
            }
            Scenario::CorollaryCase(c) => {
                positive("trials", c.trials)?;
                let sys = c.system.build(base)?;
                check_radii(&c.radii, &[sys.x().lyapunov(), sys.y().lyapunov()])
            }
        }
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("`{name}` must be positive")));
    }
    Ok(())
}

fn positive_f(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("`{name}` must be positive, got {v}")));
    }
    Ok(())
}

/// Whether `r` sits on `e^{-mλ}` for some `m` and one of the exponents.
pub fn is_boundary_radius(r: f64, lyapunovs: &[f64]) -> bool {
    lyapunovs.iter().any(|&lam| {
        ball_generation(r, lam).is_ok_and(|m| {
            let b = boundary_radius(m, lam);
            (r - b).abs() <= BOUNDARY_TOL * b
        })
    })
}

fn check_radii(radii: &[f64], lyapunovs: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Config("at least one radius is required".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("radii must be strictly decreasing".into()));
    }
    for &r in radii {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Config(format!("radius {r} is not in (0, 1)")));
        }
        if !is_boundary_radius(r, lyapunovs) {
            return Err(Error::Config(format!(
                "radius {r} is not a cylinder boundary e^(-mλ) for λ in {lyapunovs:?}"
            )));
        }
    }
    Ok(())
}
