//! Run configuration: a TOML file with `[system]`, `[[bath]]`, `[grid]`,
//! `[counting]` and `[run]` tables. Complex entries are `[re, im]` pairs and
//! operators are row-major lists of them.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use fvheat_core::bath::{BathSpec, Mode, Ramp};
use fvheat_core::influence::{PathGrid, DEFAULT_GAUSS_ORDER, DEFAULT_PATH_BUDGET};
use fvheat_core::linalg::{self, CMatrix};
use fvheat_core::oracle::{FockPolicy, SystemModel, DEFAULT_DIMENSION_CAP, DEFAULT_LEAKAGE_TARGET};
use serde::{Deserialize, Deserializer, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error in `{}` at line {}: {}", self.field, line, self.message),
            None => write!(f, "config error in `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn positive<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let x = f64::deserialize(d)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(serde::de::Error::custom(format!("must be a finite number > 0, got {x}")))
    }
}

fn non_negative<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let x = f64::deserialize(d)?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(serde::de::Error::custom(format!("must be a finite number >= 0, got {x}")))
    }
}

fn finite<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let x = f64::deserialize(d)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(serde::de::Error::custom(format!("must be finite, got {x}")))
    }
}

fn at_least_one<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    let n = usize::deserialize(d)?;
    if n >= 1 {
        Ok(n)
    } else {
        Err(serde::de::Error::custom("must be >= 1"))
    }
}

fn truncation_order<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    let n = usize::deserialize(d)?;
    if (2..=4).contains(&n) {
        Ok(n)
    } else {
        Err(serde::de::Error::custom(format!("truncation order must be 2, 3 or 4, got {n}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub dim: usize,
    pub h: Spanned<Vec<[f64; 2]>>,
    pub x: Spanned<Vec<[f64; 2]>>,
    pub rho0: Spanned<Vec<[f64; 2]>>,
    /// Adds `X² Σ c²/(2 m ω²)` to `H_S` for every bath.
    #[serde(default)]
    pub counter_term: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    #[serde(deserialize_with = "positive")]
    pub omega: f64,
    #[serde(default = "one", deserialize_with = "positive")]
    pub mass: f64,
    #[serde(deserialize_with = "finite")]
    pub coupling: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSection {
    #[serde(deserialize_with = "finite")]
    pub t_on: f64,
    #[serde(deserialize_with = "finite")]
    pub t_off: f64,
    #[serde(default, deserialize_with = "non_negative")]
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NFock {
    Fixed(usize),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    #[serde(deserialize_with = "positive")]
    pub beta: f64,
    #[serde(default, deserialize_with = "non_negative")]
    pub kerr: f64,
    pub modes: Spanned<Vec<ModeSection>>,
    #[serde(default)]
    pub ramp: Option<Spanned<RampSection>>,
    #[serde(default)]
    pub n_fock: Option<Spanned<NFock>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, deserialize_with = "finite")]
    pub t_i: f64,
    pub t_f: Spanned<f64>,
    #[serde(deserialize_with = "at_least_one")]
    pub n_slices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingSection {
    #[serde(default)]
    pub bath: Option<Spanned<usize>>,
    #[serde(default)]
    pub nu: Vec<f64>,
    #[serde(default = "default_fd_step", deserialize_with = "positive")]
    pub fd_step: f64,
}

fn default_fd_step() -> f64 {
    1e-4
}

impl Default for CountingSection {
    fn default() -> Self {
        CountingSection {
            bath: None,
            nu: Vec::new(),
            fd_step: default_fd_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_order", deserialize_with = "truncation_order")]
    pub order: usize,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_gauss", deserialize_with = "at_least_one")]
    pub gauss_order: usize,
    /// Allowed max-abs difference between the two engines' densities.
    #[serde(default = "default_tolerance", deserialize_with = "positive")]
    pub tolerance: f64,
    /// Midpoint steps for the oracle when a coupling ramp is present.
    #[serde(default = "default_oracle_steps", deserialize_with = "at_least_one")]
    pub oracle_steps: usize,
    #[serde(default = "default_cap", deserialize_with = "at_least_one")]
    pub dimension_cap: usize,
    #[serde(default = "default_leakage", deserialize_with = "positive")]
    pub leakage_target: f64,
    #[serde(default = "default_samples")]
    pub kernel_samples: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_order() -> usize {
    2
}
fn default_budget() -> u64 {
    DEFAULT_PATH_BUDGET as u64
}
fn default_gauss() -> usize {
    DEFAULT_GAUSS_ORDER
}
fn default_tolerance() -> f64 {
    5e-3
}
fn default_oracle_steps() -> usize {
    400
}
fn default_cap() -> usize {
    DEFAULT_DIMENSION_CAP
}
fn default_leakage() -> f64 {
    DEFAULT_LEAKAGE_TARGET
}
fn default_samples() -> usize {
    201
}
fn default_seed() -> u64 {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            order: default_order(),
            budget: default_budget(),
            gauss_order: default_gauss(),
            tolerance: default_tolerance(),
            oracle_steps: default_oracle_steps(),
            dimension_cap: default_cap(),
            leakage_target: default_leakage(),
            kernel_samples: default_samples(),
            out: None,
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(rename = "bath")]
    pub baths: Vec<BathSection>,
    pub grid: GridSection,
    #[serde(default)]
    pub counting: CountingSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Validated configuration turned into engine inputs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: SystemModel,
    pub rho0: CMatrix,
    pub baths: Vec<BathSpec>,
    pub kerr: Vec<f64>,
    pub fock: Vec<FockPolicy>,
    pub grid: PathGrid,
    pub counted: usize,
    pub nus: Vec<f64>,
    pub fd_step: f64,
    pub order: usize,
    pub budget: u128,
    pub gauss_order: usize,
    pub tolerance: f64,
    pub oracle_steps: usize,
    pub dimension_cap: usize,
    pub kernel_samples: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Scenario {
    pub fn has_ramp(&self) -> bool {
        self.baths.iter().any(|b| b.ramp.is_some())
    }

    /// Steps for the oracle propagator: exact when couplings are constant.
    pub fn oracle_steps(&self) -> usize {
        if self.has_ramp() {
            self.oracle_steps
        } else {
            1
        }
    }
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

fn err(field: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        line,
        message: message.into(),
    }
}

/// Field path for a TOML error: table header, the key on the offending line
/// and, inside inline tables, the innermost key before the error position.
fn field_from_span(text: &str, span: &Range<usize>) -> Option<String> {
    let start = span.start.min(text.len());
    let line_start = text[..start].rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[start..].find('\n').map_or(text.len(), |i| start + i);
    let line = &text[line_start..line_end];
    let is_key = |k: &str| !k.is_empty() && k.chars().all(|ch| ch.is_alphanumeric() || ch == '_' || ch == '.');
    let header = text[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|ch| ch == '[' || ch == ']').to_string());
    let outer = line.split('=').next().map(str::trim).filter(|k| is_key(k));
    let before = &text[line_start..start];
    let end = span.end.min(text.len()).max(start);
    let spanned = text[start..end].trim();
    let names_key = is_key(spanned) && text[end..].trim_start().starts_with('=');
    let inner = if names_key { Some(spanned) } else { None }.or_else(|| before.rfind('=').and_then(|eq| {
        before[..eq]
            .rsplit(['{', ',', '['])
            .next()
            .map(str::trim)
            .filter(|k| is_key(k))
    }));
    let mut parts: Vec<&str> = Vec::new();
    if let Some(h) = header.as_deref() {
        parts.push(h);
    }
    if let Some(o) = outer {
        parts.push(o);
    }
    if let Some(i) = inner.filter(|i| Some(*i) != outer) {
        parts.push(i);
    }
    if parts.is_empty() {
        None
    } else {
        Some(parts.join("."))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s));
            let field = e
                .span()
                .and_then(|s| field_from_span(text, &s))
                .unwrap_or_else(|| "<document>".to_string());
            err(field, line, e.message().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("<file>", None, format!("cannot read {}: {e}", path.display())))?;
        Ok((RunConfig::parse(&text)?, text))
    }

    /// Cross-field validation and construction of engine inputs.
    pub fn resolve(&self, text: &str) -> Result<Scenario, ConfigError> {
        let line = |span: Range<usize>| Some(line_of(text, span));
        let sys = &self.system;
        if sys.dim == 0 {
            return Err(err("system.dim", None, "must be >= 1"));
        }
        let op = |name: &str, v: &Spanned<Vec<[f64; 2]>>| {
            linalg::from_pairs(sys.dim, v.get_ref()).map_err(|e| err(format!("system.{name}"), line(v.span()), e.to_string()))
        };
        let mut h = op("h", &sys.h)?;
        let x = op("x", &sys.x)?;
        let rho0 = op("rho0", &sys.rho0)?;

        if self.baths.is_empty() {
            return Err(err("bath", None, "at least one [[bath]] table is required"));
        }
        let mut baths = Vec::new();
        let mut kerr = Vec::new();
        let mut fock = Vec::new();
        for (i, b) in self.baths.iter().enumerate() {
            let modes: Vec<Mode> = b
                .modes
                .get_ref()
                .iter()
                .map(|m| Mode::new(m.omega, m.mass, m.coupling))
                .collect();
            if modes.is_empty() {
                return Err(err(format!("bath[{i}].modes"), line(b.modes.span()), "at least one mode is required"));
            }
            let mut spec = BathSpec::new(modes, b.beta).map_err(|e| err(format!("bath[{i}]"), None, e.to_string()))?;
            if let Some(r) = &b.ramp {
                let ramp = Ramp {
                    t_on: r.get_ref().t_on,
                    t_off: r.get_ref().t_off,
                    width: r.get_ref().width,
                };
                spec = spec
                    .with_ramp(ramp)
                    .map_err(|e| err(format!("bath[{i}].ramp"), line(r.span()), e.to_string()))?;
            }
            let policy = match &b.n_fock {
                None => FockPolicy::Auto {
                    leakage_target: self.run.leakage_target,
                },
                Some(s) => match s.get_ref() {
                    NFock::Fixed(n) if *n >= 2 => FockPolicy::Fixed(*n),
                    NFock::Named(name) if name == "auto" => FockPolicy::Auto {
                        leakage_target: self.run.leakage_target,
                    },
                    other => {
                        return Err(err(
                            format!("bath[{i}].n_fock"),
                            line(s.span()),
                            format!("expected \"auto\" or an integer >= 2, got {other:?}"),
                        ))
                    }
                },
            };
            if sys.counter_term {
                let shift: f64 = spec.modes.iter().map(|m| m.coupling * m.coupling / (2.0 * m.mass * m.omega * m.omega)).sum();
                h += &x * &x * linalg::c(shift);
            }
            baths.push(spec);
            kerr.push(b.kerr);
            fock.push(policy);
        }
        let system = SystemModel::new(h, x).map_err(|e| err("system", None, e.to_string()))?;
        system
            .validate_density(&rho0)
            .map_err(|e| err("system.rho0", line(sys.rho0.span()), e.to_string()))?;

        let g = &self.grid;
        let grid = PathGrid::new(g.t_i, *g.t_f.get_ref(), g.n_slices)
            .map_err(|e| err("grid.t_f", line(g.t_f.span()), e.to_string()))?;

        let counted = match &self.counting.bath {
            None => 0,
            Some(s) => {
                if *s.get_ref() >= baths.len() {
                    return Err(err(
                        "counting.bath",
                        line(s.span()),
                        format!("index {} out of range, {} bath(s) configured", s.get_ref(), baths.len()),
                    ));
                }
                *s.get_ref()
            }
        };
        if let Some(bad) = self.counting.nu.iter().find(|v| !v.is_finite()) {
            return Err(err("counting.nu", None, format!("values must be finite, got {bad}")));
        }
        if self.run.kernel_samples < 2 {
            return Err(err("run.kernel_samples", None, "must be >= 2"));
        }
        Ok(Scenario {
            system,
            rho0,
            baths,
            kerr,
            fock,
            grid,
            counted,
            nus: self.counting.nu.clone(),
            fd_step: self.counting.fd_step,
            order: self.run.order,
            budget: self.run.budget as u128,
            gauss_order: self.run.gauss_order,
            tolerance: self.run.tolerance,
            oracle_steps: self.run.oracle_steps,
            dimension_cap: self.run.dimension_cap,
            kernel_samples: self.run.kernel_samples,
            out: self.run.out.clone(),
            seed: self.run.seed,
        })
    }
}
