//! Problem configuration files (TOML).
//!
//! ```toml
//! [domain]
//! kind = "interval"        # or "rectangle" with lx, ly
//! a = 0
//! b = "pi"                 # numbers or constant expressions
//!
//! [problem]
//! k = 2
//! n_trunc = 32             # default 8(k + m)
//!
//! [nonlinearity]
//! builtin = "paper_example(1)"   # or builtin = "arctan_cos" with c = 1
//! # expr = "atan(s)"             # alternatively, with optional
//! # antiderivative = "..."       # closed-form G and declared
//! # bound = 1.5708               # sup|g|
//!
//! [forcing]
//! coeffs = [0.0, 0.5]      # on φ₁, φ₂, …
//! # expr = "sin(x)"        # projected onto the basis, added to coeffs
//!
//! [quadrature]             # order, cells, summation = "ordered" | "compensated"
//! [solver]                 # tol, max_iter, ..., geometry = "auto" | "newton" | "sc+" | "sc-"
//! [conditions]             # t_min, t_max, t_points, directions, profile_tol
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use resonance_core::conditions::ConditionSettings;
use resonance_core::expr::{self, Env};
use resonance_core::nonlinearity::{Builtin, DeclaredBound, Nonlinearity, NonlinearityError};
use resonance_core::quadrature::{QuadratureGrid, QuadratureSettings};
use resonance_core::solver::{GalerkinProblem, SolverSettings};
use resonance_core::spectral::{decompose, eigenpairs, max_modes, Domain, SpectralError, DEFAULT_TIE_TOLERANCE};

/// Validation failure tied to a config field.
#[derive(Debug, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl ToString) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

/// A number, or a constant expression such as `"pi/2"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    pub fn resolve(&self, path: &str) -> Result<f64, ConfigError> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(t) => {
                let e = expr::parse_constant(t).map_err(|e| ConfigError::new(path, e))?;
                let v = e.eval::<f64>(0.0);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ConfigError::new(path, format!("'{t}' is not finite")))
                }
            }
        }
    }
}

impl From<f64> for Number {
    fn from(v: f64) -> Self {
        Number::Value(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval { a: Number, b: Number },
    Rectangle { lx: Number, ly: Number },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trunc: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antiderivative: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<Number>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeffs: Vec<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// From the (SC) verdicts; both saddle geometries when undecided.
    #[default]
    #[serde(rename = "auto")]
    Auto,
    #[serde(rename = "newton")]
    Newton,
    #[serde(rename = "sc+")]
    ScPlus,
    #[serde(rename = "sc-")]
    ScMinus,
}

/// Solver geometry plus optional overrides of `SolverSettings`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saddle_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polish_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    pub problem: ProblemSection,
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub forcing: ForcingSection,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub conditions: ConditionSettings,
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let at = inner.span().map(|s| format!(" (at {})", locate(text, s.start))).unwrap_or_default();
            let path = if path == "." { "config".to_string() } else { path };
            ConfigError::new(path, format!("{}{at}", inner.message()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// "line L, column C" for a byte offset.
fn locate(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    format!("line {line}, column {col}")
}

/// Fully resolved inputs for the commands.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub domain: Domain<f64>,
    pub k: usize,
    pub n: usize,
    pub nonlinearity: Nonlinearity<f64>,
    pub forcing: Vec<f64>,
    /// L² distance between the forcing expression and its projection.
    pub projection_residual: Option<f64>,
    pub quadrature: QuadratureSettings,
    pub solver: SolverSettings,
    pub geometry: Geometry,
    pub conditions: ConditionSettings,
}

impl Resolved {
    pub fn problem(&self) -> Result<GalerkinProblem<f64>, ConfigError> {
        GalerkinProblem::new(self.domain.clone(), self.k, self.n, self.nonlinearity.clone(), self.forcing.clone(), self.quadrature)
            .map_err(|e| ConfigError::new("problem", e))
    }
}

pub fn resolve(cfg: &ProblemConfig, n_override: Option<usize>) -> Result<Resolved, ConfigError> {
    let domain = match &cfg.domain {
        DomainConfig::Interval { a, b } => {
            Domain::interval(a.resolve("domain.a")?, b.resolve("domain.b")?).map_err(|e| ConfigError::new("domain", e))?
        }
        DomainConfig::Rectangle { lx, ly } => {
            Domain::rectangle(lx.resolve("domain.lx")?, ly.resolve("domain.ly")?).map_err(|e| ConfigError::new("domain", e))?
        }
    };
    let k = cfg.problem.k;
    if k == 0 {
        return Err(ConfigError::new("problem.k", "resonant rank must be at least 1"));
    }
    let n = match n_override.or(cfg.problem.n_trunc) {
        Some(n) => n,
        None => {
            let m = multiplicity(&domain, k)?;
            8 * (k + m)
        }
    };
    let n_path = if n_override.is_some() { "--n-trunc" } else { "problem.n_trunc" };
    let pairs = eigenpairs(&domain, n).map_err(|e| ConfigError::new(n_path, e))?;
    decompose(&pairs, k, DEFAULT_TIE_TOLERANCE).map_err(|e| match e {
        SpectralError::TruncationTooSmall { .. } => {
            ConfigError::new(n_path, e)
        }
        other => ConfigError::new("problem.k", other),
    })?;

    let nonlinearity = resolve_nonlinearity(&cfg.nonlinearity)?;

    if cfg.quadrature.order == 0 || cfg.quadrature.order > resonance_core::quadrature::MAX_ORDER {
        return Err(ConfigError::new(
            "quadrature.order",
            format!("must be in 1..={}", resonance_core::quadrature::MAX_ORDER),
        ));
    }

    let mut forcing = vec![0.0; n];
    for (i, c) in cfg.forcing.coeffs.iter().enumerate() {
        let path = format!("forcing.coeffs[{i}]");
        let v = c.resolve(&path)?;
        if i >= n {
            if v != 0.0 {
                return Err(ConfigError::new(path, format!("rank {} exceeds the truncation N = {n}", i + 1)));
            }
            continue;
        }
        forcing[i] = v;
    }
    let mut projection_residual = None;
    if let Some(text) = &cfg.forcing.expr {
        let e = expr::parse_field(text).map_err(|err| ConfigError::new("forcing.expr", err))?;
        let grid = QuadratureGrid::for_modes(&domain, max_modes(&pairs), &cfg.quadrature).map_err(|err| ConfigError::new("quadrature", err))?;
        let values: Vec<f64> = grid.points().iter().map(|p| e.eval_env(&Env { s: 0.0, x: p[0], y: p[1] })).collect();
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            let p = grid.points()[bad];
            return Err(ConfigError::new("forcing.expr", format!("not finite at ({}, {})", p[0], p[1])));
        }
        let mut captured = 0.0;
        for (i, pair) in pairs.iter().enumerate() {
            let prod: Vec<f64> = grid.points().iter().zip(&values).map(|(&p, &v)| v * pair.value(p)).collect();
            let c = grid.weighted_sum(&prod);
            forcing[i] += c;
            captured += c * c;
        }
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        projection_residual = Some((grid.weighted_sum(&sq) - captured).max(0.0).sqrt());
    }

    let p = &cfg.solver;
    let mut solver = SolverSettings::default();
    if let Some(v) = p.tol {
        solver.tol = positive("solver.tol", v)?;
    }
    if let Some(v) = p.max_iter {
        solver.max_iter = v;
    }
    if let Some(v) = p.min_step {
        solver.min_step = positive("solver.min_step", v)?;
    }
    if let Some(v) = p.singular_cutoff {
        solver.singular_cutoff = positive("solver.singular_cutoff", v)?;
    }
    if let Some(v) = p.patience {
        solver.patience = v;
    }
    if let Some(v) = p.saddle_max_iter {
        solver.saddle_max_iter = v;
    }
    if let Some(v) = p.polish_threshold {
        solver.polish_threshold = positive("solver.polish_threshold", v)?;
    }
    if let Some(v) = p.n_test {
        if v != 0 && v < n {
            return Err(ConfigError::new("solver.n_test", format!("must be 0 (meaning 2N) or at least N = {n}")));
        }
        solver.n_test = v;
    }
    if let Some(v) = p.dedup_distance {
        solver.dedup_distance = positive("solver.dedup_distance", v)?;
    }

    resonance_core::conditions::geometric_t_grid::<f64>(cfg.conditions.t_min, cfg.conditions.t_max, cfg.conditions.t_points)
        .map_err(|e| ConfigError::new("conditions", e))?;
    if cfg.conditions.asymptotics.s_max < 1e4 {
        return Err(ConfigError::new("conditions.asymptotics.s_max", "must be at least 1e4"));
    }

    Ok(Resolved {
        domain,
        k,
        n,
        nonlinearity,
        forcing,
        projection_residual,
        quadrature: cfg.quadrature,
        solver,
        geometry: cfg.solver.geometry,
        conditions: cfg.conditions,
    })
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(path, "must be positive"))
    }
}

fn multiplicity(domain: &Domain<f64>, k: usize) -> Result<usize, ConfigError> {
    let mut count = k + 8;
    loop {
        let pairs = eigenpairs(domain, count).map_err(|e| ConfigError::new("domain", e))?;
        match decompose(&pairs, k, DEFAULT_TIE_TOLERANCE) {
            Ok(d) => return Ok(d.multiplicity),
            Err(SpectralError::TruncationTooSmall { .. }) if count < 10_000 => count *= 2,
            Err(e) => return Err(ConfigError::new("problem.k", e)),
        }
    }
}

pub fn resolve_nonlinearity(s: &NonlinearitySection) -> Result<Nonlinearity<f64>, ConfigError> {
    let n = match (&s.builtin, &s.expr) {
        (Some(_), Some(_)) => return Err(ConfigError::new("nonlinearity", "give exactly one of 'builtin' and 'expr'")),
        (None, None) => return Err(ConfigError::new("nonlinearity", "missing 'builtin' or 'expr'")),
        (Some(name), None) => {
            if s.antiderivative.is_some() || s.bound.is_some() {
                return Err(ConfigError::new("nonlinearity", "'antiderivative' and 'bound' apply to 'expr' only"));
            }
            let b = match &s.c {
                Some(c) => Builtin::new(name.trim(), &[c.resolve("nonlinearity.c")?]),
                None => name.parse::<Builtin>(),
            }
            .map_err(|e| ConfigError::new("nonlinearity.builtin", e))?;
            Nonlinearity::builtin(b)
        }
        (None, Some(text)) => {
            if s.c.is_some() {
                return Err(ConfigError::new("nonlinearity.c", "'c' applies to built-ins only"));
            }
            let g = expr::parse(text).map_err(|e| ConfigError::new("nonlinearity.expr", e))?;
            let big_g = s
                .antiderivative
                .as_deref()
                .map(expr::parse)
                .transpose()
                .map_err(|e| ConfigError::new("nonlinearity.antiderivative", e))?;
            let bound = s.bound.as_ref().map(|b| b.resolve("nonlinearity.bound")).transpose()?;
            Nonlinearity::from_expr(g, big_g, bound.map(|value| DeclaredBound { value, sharp: false })).map_err(|e| match e {
                NonlinearityError::AntiderivativeOffset(_) => ConfigError::new("nonlinearity.antiderivative", e),
                other => ConfigError::new("nonlinearity", other),
            })?
        }
    };
    Ok(n)
}
