//! The nonlinearity `g`: evaluation, symbolic derivative, antiderivative
//! `G(s) = ∫₀ˢ g`, boundedness certificate and asymptotic descriptors.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Expr, ParseError};
use crate::quadrature::{integrate_adaptive, QuadratureError, QuadratureRule, DEFAULT_ORDER};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlinearityError {
    #[error("unknown built-in nonlinearity '{0}' (expected one of: {names})", names = BUILTIN_NAMES.join(", "))]
    UnknownBuiltin(String),
    #[error("built-in '{name}' expects {expected} parameter(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("malformed built-in spec '{0}'")]
    MalformedSpec(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("closed-form antiderivative must vanish at 0, got G(0) = {0}")]
    AntiderivativeOffset(f64),
}

pub const BUILTIN_NAMES: [&str; 6] =
    ["arctan", "arctan_cos", "vanishing_log", "vanishing_log_negated", "cauchy_cos", "paper_example"];

/// Built-in nonlinearities with registered closed-form antiderivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    /// g = atan s.
    Arctan,
    /// g = atan s + c cos s.
    ArctanCos { c: f64 },
    /// g = sgn s / ((e+|s|) ln(e+|s|)), vanishing at ±∞ with G → +∞.
    VanishingLog,
    /// Sign-flipped `VanishingLog`, G → −∞.
    VanishingLogNegated,
    /// g = s/(1+s²) + c cos s.
    CauchyCos { c: f64 },
    /// g = s/((e+s²) ln √(e+s²)) + c cos s, G = ln ln(e+s²) + c sin s.
    PaperExample { c: f64 },
}

impl Builtin {
    pub fn new(name: &str, params: &[f64]) -> Result<Self, NonlinearityError> {
        let arity = |expected: usize| {
            if params.len() == expected {
                Ok(())
            } else {
                Err(NonlinearityError::Arity { name: name.to_string(), expected, got: params.len() })
            }
        };
        Ok(match name {
            "arctan" => arity(0).map(|_| Builtin::Arctan)?,
            "arctan_cos" => arity(1).map(|_| Builtin::ArctanCos { c: params[0] })?,
            "vanishing_log" => arity(0).map(|_| Builtin::VanishingLog)?,
            "vanishing_log_negated" => arity(0).map(|_| Builtin::VanishingLogNegated)?,
            "cauchy_cos" => arity(1).map(|_| Builtin::CauchyCos { c: params[0] })?,
            "paper_example" => arity(1).map(|_| Builtin::PaperExample { c: params[0] })?,
            other => return Err(NonlinearityError::UnknownBuiltin(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Arctan => "arctan",
            Builtin::ArctanCos { .. } => "arctan_cos",
            Builtin::VanishingLog => "vanishing_log",
            Builtin::VanishingLogNegated => "vanishing_log_negated",
            Builtin::CauchyCos { .. } => "cauchy_cos",
            Builtin::PaperExample { .. } => "paper_example",
        }
    }

    fn param(&self) -> Option<f64> {
        match *self {
            Builtin::ArctanCos { c } | Builtin::CauchyCos { c } | Builtin::PaperExample { c } => Some(c),
            _ => None,
        }
    }

    /// (g, G) source text.
    fn formulas(&self) -> (String, String) {
        let cos = |c: f64| format!(" + ({c})*cos(s)");
        let sin = |c: f64| format!(" + ({c})*sin(s)");
        match *self {
            Builtin::Arctan => ("atan(s)".into(), "s*atan(s) - ln(1+s^2)/2".into()),
            Builtin::ArctanCos { c } => {
                (format!("atan(s){}", cos(c)), format!("s*atan(s) - ln(1+s^2)/2{}", sin(c)))
            }
            Builtin::VanishingLog => ("sgn(s)/((e+abs(s))*ln(e+abs(s)))".into(), "ln(ln(e+abs(s)))".into()),
            Builtin::VanishingLogNegated => {
                ("-sgn(s)/((e+abs(s))*ln(e+abs(s)))".into(), "-ln(ln(e+abs(s)))".into())
            }
            Builtin::CauchyCos { c } => (format!("s/(1+s^2){}", cos(c)), format!("ln(1+s^2)/2{}", sin(c))),
            // ln √(e+s²) in the denominator; the antiderivative ln ln √(e+s²)
            // is shifted by ln 2 so that G(0) = 0.
            Builtin::PaperExample { c } => {
                (format!("s/((e+s^2)*ln(sqrt(e+s^2))){}", cos(c)), format!("ln(ln(e+s^2)){}", sin(c)))
            }
        }
    }

    /// Analytic bound on sup|g|; `sharp` when it equals the supremum.
    pub fn analytic_bound(&self) -> DeclaredBound {
        use std::f64::consts::{E, FRAC_PI_2};
        match *self {
            Builtin::Arctan => DeclaredBound { value: FRAC_PI_2, sharp: true },
            Builtin::ArctanCos { c } => DeclaredBound { value: FRAC_PI_2 + c.abs(), sharp: true },
            Builtin::VanishingLog | Builtin::VanishingLogNegated => DeclaredBound { value: 1.0 / E, sharp: true },
            // s/(1+s²) peaks at 1/2
            Builtin::CauchyCos { c } => DeclaredBound { value: 0.5 + c.abs(), sharp: c == 0.0 },
            // 2s/((e+s²) ln(e+s²)) ≤ 2 · 1/(2√e) · 1
            Builtin::PaperExample { c } => DeclaredBound { value: 1.0 / E.sqrt() + c.abs(), sharp: false },
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(c) => write!(f, "{}({c})", self.name()),
            None => write!(f, "{}", self.name()),
        }
    }
}

/// Accepts `name` or `name(p1, p2, ...)`.
impl FromStr for Builtin {
    type Err = NonlinearityError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let spec = spec.trim();
        let (name, params) = match spec.find('(') {
            None => (spec, Vec::new()),
            Some(open) => {
                let inner = spec[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| NonlinearityError::MalformedSpec(spec.to_string()))?;
                let params = inner
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| {
                        let e = expr::parse_constant(p.trim())?;
                        Ok(e.eval::<f64>(0.0))
                    })
                    .collect::<Result<Vec<f64>, NonlinearityError>>()?;
                (spec[..open].trim(), params)
            }
        };
        Builtin::new(name, &params)
    }
}

/// User-declared or analytic bound on sup|g|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclaredBound {
    pub value: f64,
    pub sharp: bool,
}

/// Sampled evidence for the standing hypothesis that g is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub sampled_sup: f64,
    pub argmax: f64,
    pub declared: Option<DeclaredBound>,
    /// Sampled sup exceeds the declared bound.
    pub violation: bool,
}

impl BoundCertificate {
    /// Constant to use in estimates: the declared bound when it holds,
    /// otherwise the sampled supremum.
    pub fn constant(&self) -> f64 {
        match self.declared {
            Some(d) => d.value.max(self.sampled_sup),
            None => self.sampled_sup,
        }
    }
}

/// Tolerances for [`Nonlinearity::asymptotics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticSettings {
    pub s_max: f64,
    pub points_per_decade: usize,
    /// A limit "exists" when the total variation of the samples over the
    /// last decade before `s_max` is below this.
    pub tolerance: f64,
}

impl Default for AsymptoticSettings {
    fn default() -> Self {
        Self { s_max: 1e8, points_per_decade: 256, tolerance: 1e-3 }
    }
}

/// Estimate of a limit at ±∞ from a geometric sample tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate<T> {
    /// Sample at |s| = s_max.
    pub value: T,
    pub exists: bool,
    /// Total variation of the samples over the last decade; doubles as the
    /// uncertainty of `value` when the limit exists.
    pub tail_variation: T,
    /// Half the sample range over the last decade.
    pub oscillation_amplitude: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport<T> {
    pub g_plus: LimitEstimate<T>,
    pub g_minus: LimitEstimate<T>,
    /// G(s)/s as s → +∞.
    pub slope_plus: LimitEstimate<T>,
    /// G(s)/s as s → −∞.
    pub slope_minus: LimitEstimate<T>,
    /// Largest residual oscillation of g over the last decade on either side.
    pub oscillation_amplitude: T,
    pub settings: AsymptoticSettings,
}

impl<T: Real> AsymptoticReport<T> {
    pub fn limits(&self) -> Option<(T, T)> {
        (self.g_plus.exists && self.g_minus.exists).then_some((self.g_plus.value, self.g_minus.value))
    }

    pub fn slopes(&self) -> Option<(T, T)> {
        (self.slope_plus.exists && self.slope_minus.exists).then_some((self.slope_plus.value, self.slope_minus.value))
    }
}

#[derive(Debug)]
enum Antiderivative<T> {
    Closed(Expr),
    Numeric(CheckpointCache<T>),
}

/// Cached values of G at the checkpoints 0, ±1, ±2, ±4, …
///
/// Readers may race with writers; concurrent misses may both integrate the
/// same segments, and since the computation is deterministic whichever push
/// wins stores identical values.
#[derive(Debug, Default)]
struct CheckpointCache<T> {
    positive: RwLock<Vec<T>>,
    negative: RwLock<Vec<T>>,
}

const MAX_CHECKPOINT: usize = 1100;
const SEGMENT_MAX_EVALS: usize = 400_000;

/// An evaluatable nonlinearity with derivative and antiderivative.
#[derive(Debug, Clone)]
pub struct Nonlinearity<T> {
    inner: Arc<Inner<T>>,
}

#[derive(Debug)]
struct Inner<T> {
    label: String,
    builtin: Option<Builtin>,
    g: Expr,
    g_prime: Expr,
    antiderivative: Antiderivative<T>,
    declared_bound: Option<DeclaredBound>,
    certificate: OnceLock<BoundCertificate>,
}

impl<T: Real> Nonlinearity<T> {
    /// From an expression, with an optional closed-form antiderivative.
    /// A closed form must satisfy G(0) = 0.
    pub fn from_expr(
        g: Expr,
        antiderivative: Option<Expr>,
        declared_bound: Option<DeclaredBound>,
    ) -> Result<Self, NonlinearityError> {
        let label = g.to_string();
        Self::build(label, None, g, antiderivative, declared_bound)
    }

    /// Parses `g` (and optionally `G`) from text.
    pub fn parse(g: &str, antiderivative: Option<&str>, bound: Option<f64>) -> Result<Self, NonlinearityError> {
        let ge = expr::parse(g)?;
        let ae = antiderivative.map(expr::parse).transpose()?;
        Self::build(g.trim().to_string(), None, ge, ae, bound.map(|value| DeclaredBound { value, sharp: false }))
    }

    pub fn builtin(b: Builtin) -> Self {
        let (g, big_g) = b.formulas();
        let g = expr::parse(&g).expect("built-in formula parses");
        let big_g = expr::parse(&big_g).expect("built-in formula parses");
        Self::build(b.to_string(), Some(b), g, Some(big_g), Some(b.analytic_bound()))
            .expect("built-in antiderivative vanishes at 0")
    }

    /// Looks up a built-in by name and parameters.
    pub fn from_builtin_name(name: &str, params: &[f64]) -> Result<Self, NonlinearityError> {
        Ok(Self::builtin(Builtin::new(name, params)?))
    }

    /// g ≡ 0.
    pub fn zero() -> Self {
        Self::build("0".into(), None, Expr::Num(0.0), Some(Expr::Num(0.0)), Some(DeclaredBound { value: 0.0, sharp: true }))
            .expect("zero antiderivative")
    }

    fn build(
        label: String,
        builtin: Option<Builtin>,
        g: Expr,
        antiderivative: Option<Expr>,
        declared_bound: Option<DeclaredBound>,
    ) -> Result<Self, NonlinearityError> {
        let g_prime = g.differentiate();
        let antiderivative = match antiderivative {
            Some(e) => {
                let at_zero = e.eval::<f64>(0.0);
                if at_zero.abs() > 1e-12 {
                    return Err(NonlinearityError::AntiderivativeOffset(at_zero));
                }
                Antiderivative::Closed(e)
            }
            None => Antiderivative::Numeric(CheckpointCache::default()),
        };
        Ok(Self {
            inner: Arc::new(Inner {
                label,
                builtin,
                g,
                g_prime,
                antiderivative,
                declared_bound,
                certificate: OnceLock::new(),
            }),
        })
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn as_builtin(&self) -> Option<Builtin> {
        self.inner.builtin
    }

    pub fn expr(&self) -> &Expr {
        &self.inner.g
    }

    pub fn derivative_expr(&self) -> &Expr {
        &self.inner.g_prime
    }

    pub fn closed_form_antiderivative(&self) -> Option<&Expr> {
        match &self.inner.antiderivative {
            Antiderivative::Closed(e) => Some(e),
            Antiderivative::Numeric(_) => None,
        }
    }

    pub fn declared_bound(&self) -> Option<DeclaredBound> {
        self.inner.declared_bound
    }

    #[inline]
    pub fn g(&self, s: T) -> T {
        self.inner.g.eval(s)
    }

    #[inline]
    pub fn g_prime(&self, s: T) -> T {
        self.inner.g_prime.eval(s)
    }

    /// G(s) = ∫₀ˢ g. Closed form when registered, otherwise the nearest
    /// cached checkpoint plus an adaptive remainder integral.
    pub fn antiderivative(&self, s: T) -> Result<T, QuadratureError> {
        match &self.inner.antiderivative {
            Antiderivative::Closed(e) => Ok(e.eval(s)),
            Antiderivative::Numeric(cache) => self.numeric_antiderivative(cache, s),
        }
    }

    /// G(s) by a single adaptive integral over [0, s], bypassing the cache.
    pub fn antiderivative_fresh(&self, s: T) -> Result<T, QuadratureError> {
        let tol = self.tolerance_for(T::zero(), s);
        integrate_adaptive(|x| self.g(x), T::zero(), s, tol, SEGMENT_MAX_EVALS * 8)
    }

    fn tolerance_for(&self, a: T, b: T) -> T {
        let base = T::lit(1e-13).max(T::epsilon() * T::lit(1e3));
        let rough = QuadratureRule::<T>::gauss_legendre(DEFAULT_ORDER)
            .map(|r| r.integrate_interval(a, b, |x| self.g(x).abs()))
            .unwrap_or(T::one());
        let rough = if rough.is_finite() { rough } else { T::one() };
        base * rough.max(T::one())
    }

    fn numeric_antiderivative(&self, cache: &CheckpointCache<T>, s: T) -> Result<T, QuadratureError> {
        if s == T::zero() {
            return Ok(T::zero());
        }
        if !s.is_finite() {
            return Err(crate::quadrature::non_finite([s, T::zero()], s));
        }
        let sign = if s > T::zero() { T::one() } else { -T::one() };
        let mag = s.abs();
        let mut j = 0usize;
        let mut c = T::zero();
        if mag >= T::one() {
            j = 1;
            c = T::one();
            let two = T::lit(2.0);
            while c * two <= mag && j < MAX_CHECKPOINT {
                c *= two;
                j += 1;
            }
        }
        let store = if sign > T::zero() { &cache.positive } else { &cache.negative };
        let base = self.checkpoint_value(store, sign, j)?;
        let start = sign * c;
        if start == s {
            return Ok(base);
        }
        let tol = self.tolerance_for(start, s);
        Ok(base + integrate_adaptive(|x| self.g(x), start, s, tol, SEGMENT_MAX_EVALS)?)
    }

    fn checkpoint_value(&self, store: &RwLock<Vec<T>>, sign: T, j: usize) -> Result<T, QuadratureError> {
        let have = {
            let r = store.read().expect("checkpoint cache poisoned");
            if let Some(&v) = r.get(j) {
                return Ok(v);
            }
            r.clone()
        };
        let mut values = have;
        if values.is_empty() {
            values.push(T::zero());
        }
        let position = |i: usize| if i == 0 { T::zero() } else { sign * T::lit(2.0).powi(i as i32 - 1) };
        while values.len() <= j {
            let i = values.len();
            let (a, b) = (position(i - 1), position(i));
            let tol = self.tolerance_for(a, b);
            let seg = integrate_adaptive(|x| self.g(x), a, b, tol, SEGMENT_MAX_EVALS)?;
            let prev = *values.last().expect("nonempty");
            values.push(prev + seg);
        }
        let mut w = store.write().expect("checkpoint cache poisoned");
        if w.len() < values.len() {
            *w = values.clone();
        }
        Ok(values[j])
    }

    /// Sampled sup|g| with local refinement, computed once and cached.
    pub fn bound_certificate(&self) -> BoundCertificate {
        *self.inner.certificate.get_or_init(|| self.compute_certificate())
    }

    fn compute_certificate(&self) -> BoundCertificate {
        let abs_g = |s: f64| {
            let v = self.g(T::lit(s)).to_f64_lossy().abs();
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        };
        const HALF_WIDTH: f64 = 16.0;
        const STEP: f64 = 1.0 / 64.0;
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut anchors = vec![0.0];
        for j in 0..=8 {
            let a = 10f64.powi(j);
            anchors.push(a);
            anchors.push(-a);
        }
        let per_window = (2.0 * HALF_WIDTH / STEP) as i64;
        for &a in &anchors {
            for i in 0..=per_window {
                let s = a - HALF_WIDTH + STEP * i as f64;
                samples.push((s, abs_g(s)));
            }
        }
        for i in -48..=128 {
            let s = 10f64.powf(i as f64 / 16.0);
            samples.push((s, abs_g(s)));
            samples.push((-s, abs_g(-s)));
        }
        samples.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.total_cmp(&y.0)));
        let mut best = samples[0];
        for &(s, _) in samples.iter().take(8) {
            let h = STEP * s.abs().max(1.0) * f64::EPSILON.sqrt().max(STEP);
            let h = h.max(STEP);
            let cand = golden_max(&abs_g, s - h, s + h);
            if cand.1 > best.1 {
                best = cand;
            }
        }
        let declared = self.inner.declared_bound;
        let violation = declared.is_some_and(|d| best.1 > d.value * (1.0 + 1e-9) + 1e-12);
        BoundCertificate { sampled_sup: best.1, argmax: best.0, declared, violation }
    }

    /// Limits g(±∞) and slopes G± = lim G(s)/s from geometric tails.
    pub fn asymptotics(&self, settings: &AsymptoticSettings) -> AsymptoticReport<T> {
        let ppd = settings.points_per_decade.max(4);
        let decades = settings.s_max.log10().max(1.0);
        let count = (decades * ppd as f64).round() as usize;
        let grid: Vec<f64> = (0..=count).map(|i| settings.s_max * 10f64.powf((i as f64 - count as f64) / ppd as f64)).collect();
        let tail_start = count.saturating_sub(ppd);
        let tol = T::lit(settings.tolerance);
        let estimate = |values: Result<Vec<T>, String>| -> LimitEstimate<T> {
            match values {
                Ok(v) => tail_estimate(&v[tail_start..], tol),
                Err(note) => LimitEstimate {
                    value: T::nan(),
                    exists: false,
                    tail_variation: T::infinity(),
                    oscillation_amplitude: T::nan(),
                    note: Some(note),
                },
            }
        };
        let g_side = |sign: f64| -> Result<Vec<T>, String> { Ok(grid.iter().map(|&s| self.g(T::lit(sign * s))).collect()) };
        let slope_side = |sign: f64| -> Result<Vec<T>, String> {
            grid.iter()
                .map(|&s| {
                    let st = T::lit(sign * s);
                    self.antiderivative(st).map(|v| v / st).map_err(|e| format!("antiderivative failed: {e}"))
                })
                .collect()
        };
        let g_plus = estimate(g_side(1.0));
        let g_minus = estimate(g_side(-1.0));
        let slope_plus = estimate(slope_side(1.0));
        let slope_minus = estimate(slope_side(-1.0));
        let oscillation_amplitude = g_plus.oscillation_amplitude.max(g_minus.oscillation_amplitude);
        AsymptoticReport { g_plus, g_minus, slope_plus, slope_minus, oscillation_amplitude, settings: *settings }
    }
}

fn tail_estimate<T: Real>(tail: &[T], tol: T) -> LimitEstimate<T> {
    let finite = tail.iter().all(|v| v.is_finite());
    let variation: T = tail.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let (lo, hi) = tail.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let value = *tail.last().expect("nonempty tail");
    LimitEstimate {
        value,
        exists: finite && variation < tol,
        tail_variation: variation,
        oscillation_amplitude: (hi - lo) * T::lit(0.5),
        note: (!finite).then(|| "non-finite samples in tail".to_string()),
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..120 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2};

    fn seeded(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(lo..hi)).collect()
    }

    #[test]
    fn builtin_spec_parsing() {
        assert_eq!("arctan".parse::<Builtin>().unwrap(), Builtin::Arctan);
        assert_eq!("arctan_cos(10)".parse::<Builtin>().unwrap(), Builtin::ArctanCos { c: 10.0 });
        assert_eq!(" paper_example( -2.5 ) ".parse::<Builtin>().unwrap(), Builtin::PaperExample { c: -2.5 });
        assert_eq!("cauchy_cos(pi/2)".parse::<Builtin>().unwrap(), Builtin::CauchyCos { c: FRAC_PI_2 });
        assert!(matches!("sinc".parse::<Builtin>(), Err(NonlinearityError::UnknownBuiltin(_))));
        assert!(matches!("arctan_cos".parse::<Builtin>(), Err(NonlinearityError::Arity { .. })));
        assert!(matches!("arctan(1)".parse::<Builtin>(), Err(NonlinearityError::Arity { .. })));
        assert!(matches!("arctan_cos(1".parse::<Builtin>(), Err(NonlinearityError::MalformedSpec(_))));
        let b = Builtin::ArctanCos { c: 3.0 };
        assert_eq!(b.to_string().parse::<Builtin>().unwrap(), b);
    }

    #[test]
    fn closed_form_antiderivative_of_atan_matches_quadrature() {
        let closed = Nonlinearity::<f64>::builtin(Builtin::Arctan);
        let numeric = Nonlinearity::<f64>::parse("atan(s)", None, None).unwrap();
        let want = 1.0 * 1f64.atan() - 0.5 * 2f64.ln();
        assert!((closed.antiderivative(1.0).unwrap() - want).abs() < 1e-15);
        assert!((numeric.antiderivative(1.0).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn vanishing_log_numeric_matches_closed_form() {
        let numeric = Nonlinearity::<f64>::parse("sgn(s)/((e+abs(s))*ln(e+abs(s)))", None, None).unwrap();
        for s in [10.0, 1e3, 1e6, -1e3] {
            let want = (E + f64::abs(s)).ln().ln();
            let got = numeric.antiderivative(s).unwrap();
            assert!((got - want).abs() < 1e-8, "s={s}: {got} vs {want}");
        }
    }

    #[test]
    fn antiderivative_vanishes_at_zero() {
        for b in [
            Builtin::Arctan,
            Builtin::ArctanCos { c: 4.0 },
            Builtin::VanishingLog,
            Builtin::VanishingLogNegated,
            Builtin::CauchyCos { c: -1.0 },
            Builtin::PaperExample { c: 2.0 },
        ] {
            assert_eq!(Nonlinearity::<f64>::builtin(b).antiderivative(0.0).unwrap(), 0.0, "{b}");
        }
        let n = Nonlinearity::<f64>::parse("cos(s)", None, None).unwrap();
        assert_eq!(n.antiderivative(0.0).unwrap(), 0.0);
        assert!(matches!(
            Nonlinearity::<f64>::parse("cos(s)", Some("sin(s)+1"), None),
            Err(NonlinearityError::AntiderivativeOffset(_))
        ));
    }

    #[test]
    fn vanishing_log_value_at_one_million() {
        let n = Nonlinearity::<f64>::builtin(Builtin::VanishingLog);
        // independent evaluation of ln ln(e + 10⁶)
        let want = (1e6f64 + E).ln().ln();
        assert!((n.antiderivative(1e6).unwrap() - want).abs() < 1e-14);
        assert!((want - 2.6258).abs() < 1e-4);
    }

    #[test]
    fn antiderivative_derivative_is_g() {
        let all = [
            Nonlinearity::<f64>::builtin(Builtin::Arctan),
            Nonlinearity::builtin(Builtin::ArctanCos { c: 10.0 }),
            Nonlinearity::builtin(Builtin::VanishingLog),
            Nonlinearity::builtin(Builtin::VanishingLogNegated),
            Nonlinearity::builtin(Builtin::CauchyCos { c: 3.0 }),
            Nonlinearity::builtin(Builtin::PaperExample { c: 1.0 }),
            Nonlinearity::parse("atan(s) + 2*cos(s)", None, None).unwrap(),
        ];
        for n in &all {
            for s in seeded(200, -100.0, 100.0, 5) {
                if s.abs() < 1e-2 {
                    continue;
                }
                let h = 1e-5 * s.abs().max(1.0);
                let fd = (n.antiderivative(s + h).unwrap() - n.antiderivative(s - h).unwrap()) / (2.0 * h);
                let g = n.g(s);
                assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "{} at {s}: {fd} vs {g}", n.label());
            }
        }
    }

    #[test]
    fn cache_consistency_with_fresh_integration() {
        let n = Nonlinearity::<f64>::parse("atan(s) + s/(1+s^2)", None, None).unwrap();
        for s in [0.3, 1.0, 2.5, 17.0, -40.0, 1000.0, 3333.3, -0.7] {
            let cached = n.antiderivative(s).unwrap();
            let again = n.antiderivative(s).unwrap();
            let fresh = n.antiderivative_fresh(s).unwrap();
            assert_eq!(cached.to_bits(), again.to_bits());
            assert!((cached - fresh).abs() < 1e-10, "s={s}: {cached} vs {fresh}");
        }
    }

    #[test]
    fn concurrent_cache_reads_agree() {
        use rayon::prelude::*;
        let n = Nonlinearity::<f64>::parse("s/(1+s^2)", None, None).unwrap();
        let pts: Vec<f64> = (1..400).map(|i| (i as f64).powf(1.7) * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let par: Vec<f64> = pts.par_iter().map(|&s| n.antiderivative(s).unwrap()).collect();
        let fresh = Nonlinearity::<f64>::parse("s/(1+s^2)", None, None).unwrap();
        for (s, v) in pts.iter().zip(par) {
            let seq = fresh.antiderivative(*s).unwrap();
            assert_eq!(v.to_bits(), seq.to_bits(), "s={s}");
        }
    }

    #[test]
    fn numeric_antiderivative_reports_nonconvergence() {
        let n = Nonlinearity::<f64>::parse("cos(1e9*s)", None, None).unwrap();
        assert!(matches!(n.antiderivative(5000.5), Err(QuadratureError::NoConvergence { .. })));
    }

    #[test]
    fn bound_certificates_of_builtins() {
        for b in [
            Builtin::Arctan,
            Builtin::ArctanCos { c: 1.0 },
            Builtin::ArctanCos { c: -2.0 },
            Builtin::ArctanCos { c: 10.0 },
            Builtin::VanishingLog,
            Builtin::VanishingLogNegated,
            Builtin::CauchyCos { c: 0.0 },
            Builtin::CauchyCos { c: 3.0 },
            Builtin::PaperExample { c: 1.0 },
        ] {
            let cert = Nonlinearity::<f64>::builtin(b).bound_certificate();
            let declared = b.analytic_bound();
            assert!(cert.sampled_sup.is_finite());
            assert!(!cert.violation, "{b}: {cert:?}");
            if declared.sharp {
                assert!((cert.sampled_sup - declared.value).abs() < 1e-6, "{b}: {} vs {}", cert.sampled_sup, declared.value);
            } else {
                assert!(cert.sampled_sup <= declared.value + 1e-12);
            }
        }
    }

    #[test]
    fn declared_bound_violation_is_flagged_not_rejected() {
        let n = Nonlinearity::<f64>::parse("2*atan(s)", None, Some(1.0)).unwrap();
        let cert = n.bound_certificate();
        assert!(cert.violation);
        assert!((cert.constant() - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn arctan_cos_zero_is_arctan() {
        let a = Nonlinearity::<f64>::builtin(Builtin::Arctan);
        let b = Nonlinearity::<f64>::builtin(Builtin::ArctanCos { c: 0.0 });
        for s in seeded(1000, -1e4, 1e4, 9) {
            assert_eq!(a.g(s), b.g(s));
            assert!((a.antiderivative(s).unwrap() - b.antiderivative(s).unwrap()).abs() <= 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn paper_example_antiderivative_diverges() {
        let n = Nonlinearity::<f64>::builtin(Builtin::PaperExample { c: 1.0 });
        // monotone trend of G sampled at the minima of c·sin s
        let trend: Vec<f64> = (1..12)
            .map(|j| {
                let s = (10f64.powi(j) / (2.0 * std::f64::consts::PI)).round() * 2.0 * std::f64::consts::PI - FRAC_PI_2;
                n.antiderivative(s).unwrap()
            })
            .collect();
        assert!(trend.windows(2).all(|w| w[1] > w[0]), "{trend:?}");
        assert!(trend.last().unwrap() > &2.0);
    }

    #[test]
    fn asymptotics_of_arctan() {
        let r = Nonlinearity::<f64>::builtin(Builtin::Arctan).asymptotics(&AsymptoticSettings::default());
        assert!(r.g_plus.exists && r.g_minus.exists);
        assert!((r.g_plus.value - FRAC_PI_2).abs() < 1e-3);
        assert!((r.g_minus.value + FRAC_PI_2).abs() < 1e-3);
        assert!((r.slope_plus.value - FRAC_PI_2).abs() < 1e-2);
    }

    #[test]
    fn asymptotics_of_oscillating_arctan() {
        let r = Nonlinearity::<f64>::builtin(Builtin::ArctanCos { c: 10.0 }).asymptotics(&AsymptoticSettings::default());
        assert!(!r.g_plus.exists && !r.g_minus.exists);
        assert!((r.oscillation_amplitude - 10.0).abs() < 0.1, "{}", r.oscillation_amplitude);
        assert!(r.slope_plus.exists && r.slope_minus.exists);
        assert!((r.slope_plus.value - FRAC_PI_2).abs() < 1e-2);
        assert!((r.slope_minus.value + FRAC_PI_2).abs() < 1e-2);
    }

    #[test]
    fn asymptotics_of_cauchy_cos() {
        let r = Nonlinearity::<f64>::builtin(Builtin::CauchyCos { c: 3.0 }).asymptotics(&AsymptoticSettings::default());
        assert!(!r.g_plus.exists);
        assert!(r.slope_plus.exists && r.slope_minus.exists);
        assert!(r.slope_plus.value.abs() < 1e-5 && r.slope_minus.value.abs() < 1e-5);
    }

    #[test]
    fn asymptotics_numeric_failure_is_reported_not_raised() {
        let n = Nonlinearity::<f64>::parse("cos(s^2)", None, None).unwrap();
        let r = n.asymptotics(&AsymptoticSettings { s_max: 1e4, points_per_decade: 8, tolerance: 1e-3 });
        assert!(!r.slope_plus.exists);
        assert!(r.slope_plus.note.is_some());
    }

    #[test]
    fn f32_nonlinearity() {
        let n = Nonlinearity::<f32>::builtin(Builtin::Arctan);
        assert!((n.g(1.0f32) - std::f32::consts::FRAC_PI_4).abs() < 1e-6);
        assert!(n.antiderivative(2.0f32).unwrap().is_finite());
    }
}
