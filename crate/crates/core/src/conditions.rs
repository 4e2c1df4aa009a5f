//! Landesman–Lazer type solvability conditions: the classical (LL)±, the
//! potential (PLL)± and the ray-restricted sufficient condition (SC)±.
//!
//! Every check works on the resonant eigenspace H̄ through a finite set of
//! unit directions φ₀ and reports per-direction margins as evidence.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::{AsymptoticReport, AsymptoticSettings, Nonlinearity};
use crate::quadrature::{accumulate, QuadratureError, QuadratureGrid};
use crate::scalar::{dot, norm2, Real};
use crate::spectral::{EigenPair, SpectralDecomposition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("ray grid must be geometric and ascending with t_min > 0, got t_min={t_min}, t_max={t_max}, points={points}")]
    InvalidGrid { t_min: f64, t_max: f64, points: usize },
    #[error("ray grid spans {decades:.2} decades; at least 4 are required")]
    GridTooShort { decades: f64 },
    #[error("ray grid needs at least one point per decade")]
    GridTooSparse,
    #[error("forcing has {got} coefficients but the basis has {expected}")]
    ForcingLength { got: usize, expected: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionKind {
    #[serde(rename = "LL+")]
    LlPlus,
    #[serde(rename = "LL-")]
    LlMinus,
    #[serde(rename = "PLL+")]
    PllPlus,
    #[serde(rename = "PLL-")]
    PllMinus,
    #[serde(rename = "SC+")]
    ScPlus,
    #[serde(rename = "SC-")]
    ScMinus,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 6] = [
        ConditionKind::LlPlus,
        ConditionKind::LlMinus,
        ConditionKind::PllPlus,
        ConditionKind::PllMinus,
        ConditionKind::ScPlus,
        ConditionKind::ScMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConditionKind::LlPlus => "LL+",
            ConditionKind::LlMinus => "LL-",
            ConditionKind::PllPlus => "PLL+",
            ConditionKind::PllMinus => "PLL-",
            ConditionKind::ScPlus => "SC+",
            ConditionKind::ScMinus => "SC-",
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inapplicable,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inapplicable => "inapplicable",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Verdict plus evidence for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport<T> {
    pub condition: ConditionKind,
    pub verdict: Verdict,
    /// One margin per sampled direction, in direction order. Positive means
    /// the condition's inequality holds in that direction.
    pub margins: Vec<T>,
    /// A margin counts only if it exceeds this.
    pub uncertainty: T,
    pub notes: Vec<String>,
    /// "ray-certified" for (SC)± verdicts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certification: Option<String>,
}

impl<T: Real> ConditionReport<T> {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn min_margin(&self) -> Option<T> {
        self.margins.iter().copied().reduce(T::min)
    }

    fn inapplicable(condition: ConditionKind, note: String) -> Self {
        Self {
            condition,
            verdict: Verdict::Inapplicable,
            margins: Vec::new(),
            uncertainty: T::zero(),
            notes: vec![note],
            certification: None,
        }
    }
}

/// Unit vector of coefficients on the bar basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirectionSample<T> {
    pub coefficients: Vec<T>,
}

impl<T: Real> DirectionSample<T> {
    /// Normalizes `coefficients`; `None` for the zero vector.
    pub fn new(coefficients: Vec<T>) -> Option<Self> {
        let n = norm2(&coefficients);
        if n == T::zero() || !n.is_finite() {
            return None;
        }
        Some(Self { coefficients: coefficients.into_iter().map(|c| c / n).collect() })
    }

    pub fn negated(&self) -> Self {
        Self { coefficients: self.coefficients.iter().map(|&c| -c).collect() }
    }
}

/// Integrals of a direction's positive and negative parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionIntegrals<T> {
    /// ∫φ₀⁺
    pub pos_mass: T,
    /// ∫φ₀⁻
    pub neg_mass: T,
    /// ∫f̄φ₀⁺
    pub f_pos: T,
    /// ∫f̄φ₀⁻
    pub f_neg: T,
}

impl<T: Real> DirectionIntegrals<T> {
    /// ∫|φ₀|
    pub fn abs_mass(&self) -> T {
        self.pos_mass + self.neg_mass
    }
}

/// M(φ₀) = ∫(g(+∞) − f̄)φ₀⁺ − ∫(g(−∞) − f̄)φ₀⁻.
///
/// (LL)+ asks for M > 0 in every direction, (LL)− for M < 0.
pub fn ll_margin<T: Real>(limits: (T, T), d: &DirectionIntegrals<T>) -> T {
    let (plus, minus) = limits;
    (plus * d.pos_mass - d.f_pos) - (minus * d.neg_mass - d.f_neg)
}

/// Same as [`ll_margin`] with the slopes G± in place of g(±∞).
pub fn pll_margin<T: Real>(slopes: (T, T), d: &DirectionIntegrals<T>) -> T {
    ll_margin(slopes, d)
}

/// Predicted limit of J(t)/t along the ray tφ₀ when g(±∞) exist, where J is
/// the (SC) functional. It coincides with the LL margin.
pub fn ll_sc_bridge<T: Real>(limits: (T, T), d: &DirectionIntegrals<T>) -> T {
    ll_margin(limits, d)
}

/// Settings for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionSettings {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    /// Sphere samples for m ≥ 2 (antipodes are added on top).
    pub directions: usize,
    /// Quadrature-level tolerance on J; a diverging profile must rise by at
    /// least ten times this over the last decade.
    pub profile_tol: f64,
    pub asymptotics: AsymptoticSettings,
}

impl Default for ConditionSettings {
    fn default() -> Self {
        Self {
            t_min: 1.0,
            t_max: 1e8,
            t_points: 32,
            directions: 64,
            profile_tol: 1e-6,
            asymptotics: AsymptoticSettings::default(),
        }
    }
}

/// Geometric grid from `t_min` to `t_max` spanning at least four decades.
pub fn geometric_t_grid<T: Real>(t_min: f64, t_max: f64, points: usize) -> Result<Vec<T>, ConditionError> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite() && points >= 2) {
        return Err(ConditionError::InvalidGrid { t_min, t_max, points });
    }
    let decades = (t_max / t_min).log10();
    if decades < 4.0 - 1e-12 {
        return Err(ConditionError::GridTooShort { decades });
    }
    if ((points - 1) as f64) < decades.ceil() {
        return Err(ConditionError::GridTooSparse);
    }
    let ratio = (t_max / t_min).ln() / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { T::lit(t_max) } else { T::lit(t_min * (ratio * i as f64).exp()) })
        .collect())
}

/// J(t) = ∫G(tφ₀) − t∫f̄φ₀ sampled along a ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayProfile<T> {
    pub direction: usize,
    pub t: Vec<T>,
    /// ∫G(tφ₀)
    pub potential: Vec<T>,
    /// t·∫f̄φ₀, computed from the coefficients.
    pub linear: Vec<T>,
    /// potential − linear
    pub j: Vec<T>,
}

/// Trend of a ray profile over the last three decades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileTrend<T> {
    /// Least-squares slope of J against ln t.
    pub slope: T,
    /// Smallest J(t_j) − J(t_i) over pairs with t_j ≥ 10 t_i.
    pub min_decade_rise: T,
    /// Largest such difference, negated when negative: the smallest
    /// decrease.
    pub min_decade_drop: T,
    /// J(t_max) − J(t) at the last point a decade below.
    pub last_decade_change: T,
    /// J strictly increasing between consecutive samples of the window.
    pub strictly_increasing: bool,
    pub strictly_decreasing: bool,
}

impl<T: Real> RayProfile<T> {
    pub fn trend(&self) -> ProfileTrend<T> {
        let t_max = *self.t.last().expect("nonempty profile");
        let start = t_max / T::lit(1e3) * T::lit(1.0 - 1e-12);
        let window: Vec<usize> = (0..self.t.len()).filter(|&i| self.t[i] >= start).collect();
        let decade = T::lit(10.0 * (1.0 - 1e-9));
        let mut min_rise = T::infinity();
        let mut min_drop = T::infinity();
        for (a, &i) in window.iter().enumerate() {
            for &j in &window[a + 1..] {
                if self.t[j] >= self.t[i] * decade {
                    let d = self.j[j] - self.j[i];
                    min_rise = min_rise.min(d);
                    min_drop = min_drop.min(-d);
                }
            }
        }
        let last = self.t.len() - 1;
        let below = (0..last).rev().find(|&i| self.t[i] * decade <= t_max).unwrap_or(0);
        let last_decade_change = self.j[last] - self.j[below];
        let xs: Vec<T> = window.iter().map(|&i| self.t[i].ln()).collect();
        let ys: Vec<T> = window.iter().map(|&i| self.j[i]).collect();
        let slope = least_squares_slope(&xs, &ys);
        let steps = window.windows(2).map(|w| self.j[w[1]] - self.j[w[0]]);
        let strictly_increasing = steps.clone().all(|d| d > T::zero());
        let strictly_decreasing = steps.into_iter().all(|d| d < T::zero());
        ProfileTrend {
            slope,
            min_decade_rise: min_rise,
            min_decade_drop: min_drop,
            last_decade_change,
            strictly_increasing,
            strictly_decreasing,
        }
    }
}

fn least_squares_slope<T: Real>(xs: &[T], ys: &[T]) -> T {
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxy: T = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    if sxx == T::zero() {
        T::zero()
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Up,
    Down,
    Flat,
}

fn profile_direction<T: Real>(tr: &ProfileTrend<T>, tol: T) -> Direction {
    let threshold = T::lit(10.0) * tol;
    if tr.min_decade_rise > T::zero() && tr.last_decade_change >= threshold && tr.slope > T::zero() {
        Direction::Up
    } else if tr.min_decade_drop > T::zero() && -tr.last_decade_change >= threshold && tr.slope < T::zero() {
        Direction::Down
    } else {
        Direction::Flat
    }
}

/// Classifies (SC)+ and (SC)− from ray profiles over all sampled
/// directions. A direction passes when J rises between every pair of
/// samples a decade apart within the last three decades, rises by at least
/// ten times `profile_tol` over the last decade, and has a positive trend
/// in ln t; symmetrically for (SC)−. Bounded oscillation superimposed on a
/// divergent trend is tolerated as long as it stays below the per-decade
/// growth.
pub fn classify_sc<T: Real>(profiles: &[RayProfile<T>], profile_tol: T) -> (ConditionReport<T>, ConditionReport<T>) {
    let trends: Vec<ProfileTrend<T>> = profiles.iter().map(RayProfile::trend).collect();
    let dirs: Vec<Direction> = trends.iter().map(|t| profile_direction(t, profile_tol)).collect();
    let all_up = !dirs.is_empty() && dirs.iter().all(|&d| d == Direction::Up);
    let all_down = !dirs.is_empty() && dirs.iter().all(|&d| d == Direction::Down);
    let (plus, minus) = match (all_up, all_down) {
        (true, _) => (Verdict::Holds, Verdict::Fails),
        (_, true) => (Verdict::Fails, Verdict::Holds),
        _ => (Verdict::Indeterminate, Verdict::Indeterminate),
    };
    let mut notes = Vec::new();
    let count = |d: Direction| dirs.iter().filter(|&&x| x == d).count();
    notes.push(format!(
        "{} directions: {} diverging up, {} diverging down, {} without a divergent trend",
        dirs.len(),
        count(Direction::Up),
        count(Direction::Down),
        count(Direction::Flat)
    ));
    notes.push("verdict covers ray sequences t·φ₀ only".to_string());
    if let Some(t) = trends.iter().map(|t| t.slope).reduce(T::min) {
        notes.push(format!("smallest trend slope dJ/d(ln t) = {t:.6e}"));
    }
    let report = |condition, verdict: Verdict, margins: Vec<T>| ConditionReport {
        condition,
        verdict,
        margins,
        uncertainty: T::zero(),
        notes: notes.clone(),
        certification: (verdict != Verdict::Indeterminate).then(|| "ray-certified".to_string()),
    };
    (
        report(ConditionKind::ScPlus, plus, trends.iter().map(|t| t.min_decade_rise).collect()),
        report(ConditionKind::ScMinus, minus, trends.iter().map(|t| t.min_decade_drop).collect()),
    )
}

/// The resonant eigenspace H̄ tabulated on a quadrature grid, with f̄.
#[derive(Debug, Clone)]
pub struct ResonantSpace<T> {
    /// 1-based ranks of the bar eigenfunctions.
    pub ranks: Vec<usize>,
    /// Coefficients of f̄ on the bar basis.
    pub f_bar: Vec<T>,
    grid: QuadratureGrid<T>,
    /// m × Q values of the bar eigenfunctions.
    table: Vec<Vec<T>>,
    f_bar_values: Vec<T>,
}

impl<T: Real> ResonantSpace<T> {
    /// `forcing` holds eigen-coefficients of f for ranks 1..; only the bar
    /// entries matter, missing entries count as zero.
    pub fn new(
        pairs: &[EigenPair<T>],
        decomposition: &SpectralDecomposition<T>,
        forcing: &[T],
        grid: QuadratureGrid<T>,
    ) -> Self {
        let bar = decomposition.bar();
        let table: Vec<Vec<T>> = bar.iter().map(|&i| grid.points().iter().map(|&p| pairs[i].value(p)).collect()).collect();
        let f_bar: Vec<T> = bar.iter().map(|&i| forcing.get(i).copied().unwrap_or(T::zero())).collect();
        let f_bar_values = (0..grid.len()).map(|q| table.iter().zip(&f_bar).map(|(row, &c)| c * row[q]).sum()).collect();
        Self { ranks: bar.iter().map(|&i| i + 1).collect(), f_bar, grid, table, f_bar_values }
    }

    pub fn multiplicity(&self) -> usize {
        self.ranks.len()
    }

    pub fn grid(&self) -> &QuadratureGrid<T> {
        &self.grid
    }

    /// Deterministic directions: ±φ_k when m = 1; otherwise `count` points
    /// on the unit sphere of H̄ followed by their antipodes.
    pub fn directions(&self, count: usize) -> Vec<DirectionSample<T>> {
        sphere_directions(self.multiplicity(), count)
    }

    pub fn values(&self, d: &DirectionSample<T>) -> Vec<T> {
        (0..self.grid.len()).map(|q| self.table.iter().zip(&d.coefficients).map(|(row, &c)| c * row[q]).sum()).collect()
    }

    pub fn integrals(&self, d: &DirectionSample<T>) -> DirectionIntegrals<T> {
        let v = self.values(d);
        let w = self.grid.weights();
        let mode = self.grid.summation();
        let part = |positive: bool, with_f: bool| {
            accumulate(
                v.iter().zip(w).zip(&self.f_bar_values).map(|((&x, &w), &f)| {
                    let p = if positive { x.max(T::zero()) } else { (-x).max(T::zero()) };
                    let p = if with_f { p * f } else { p };
                    w * p
                }),
                mode,
            )
        };
        DirectionIntegrals { pos_mass: part(true, false), neg_mass: part(false, false), f_pos: part(true, true), f_neg: part(false, true) }
    }

    /// J(t) on the grid for one direction.
    pub fn ray_profile(
        &self,
        n: &Nonlinearity<T>,
        direction_index: usize,
        d: &DirectionSample<T>,
        t_grid: &[T],
    ) -> Result<RayProfile<T>, QuadratureError> {
        let v = self.values(d);
        let fd = dot(&self.f_bar, &d.coefficients);
        let mut potential = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            let mut terms = Vec::with_capacity(v.len());
            for (&x, &w) in v.iter().zip(self.grid.weights()) {
                terms.push(w * n.antiderivative(t * x)?);
            }
            let total = accumulate(terms.into_iter(), self.grid.summation());
            if !total.is_finite() {
                return Err(crate::quadrature::non_finite([t, T::zero()], total));
            }
            potential.push(total);
        }
        let linear: Vec<T> = t_grid.iter().map(|&t| t * fd).collect();
        let j = potential.iter().zip(&linear).map(|(&p, &l)| p - l).collect();
        Ok(RayProfile { direction: direction_index, t: t_grid.to_vec(), potential, linear, j })
    }
}

/// Unit directions in ℝᵐ: ±e₁ for m = 1, evenly spaced half-circle angles
/// for m = 2, Halton points pushed through Box–Muller for m ≥ 3; each
/// followed by the antipodal set.
pub fn sphere_directions<T: Real>(m: usize, count: usize) -> Vec<DirectionSample<T>> {
    let base: Vec<DirectionSample<T>> = match m {
        0 => return Vec::new(),
        1 => vec![DirectionSample { coefficients: vec![T::one()] }],
        2 => (0..count.max(1))
            .map(|j| {
                let theta = std::f64::consts::PI * j as f64 / count.max(1) as f64;
                DirectionSample { coefficients: vec![T::lit(theta.cos()), T::lit(theta.sin())] }
            })
            .collect(),
        _ => {
            let mut out: Vec<DirectionSample<T>> = Vec::with_capacity(count);
            for i in 0..m.min(count) {
                let mut c = vec![T::zero(); m];
                c[i] = T::one();
                out.push(DirectionSample { coefficients: c });
            }
            let dims = m + m % 2;
            let mut index = 1u64;
            while out.len() < count {
                let u: Vec<f64> = (0..dims).map(|d| halton(index, PRIMES[d % PRIMES.len()])).collect();
                index += 1;
                let mut g = Vec::with_capacity(dims);
                for pair in u.chunks(2) {
                    let r = (-2.0 * pair[0].ln()).sqrt();
                    let a = 2.0 * std::f64::consts::PI * pair[1];
                    g.push(r * a.cos());
                    g.push(r * a.sin());
                }
                g.truncate(m);
                if let Some(d) = DirectionSample::new(g.into_iter().map(T::lit).collect()) {
                    out.push(d);
                }
            }
            out
        }
    };
    let antipodes: Vec<_> = base.iter().map(DirectionSample::negated).collect();
    base.into_iter().chain(antipodes).collect()
}

const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Everything [`evaluate`] computed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionBundle<T> {
    pub nonlinearity: String,
    pub bar_ranks: Vec<usize>,
    pub f_bar: Vec<T>,
    pub asymptotics: AsymptoticReport<T>,
    /// LL+, LL−, PLL+, PLL−, SC+, SC− in this order.
    pub reports: Vec<ConditionReport<T>>,
    pub directions: Vec<DirectionSample<T>>,
    pub integrals: Vec<DirectionIntegrals<T>>,
    /// Predicted lim J(t)/t per direction, when g(±∞) exist.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge: Option<Vec<T>>,
    pub profiles: Vec<RayProfile<T>>,
    pub trends: Vec<ProfileTrend<T>>,
    pub settings: ConditionSettings,
}

/// Which saddle geometry the (SC) verdicts select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScCase {
    #[serde(rename = "SC+")]
    Plus,
    #[serde(rename = "SC-")]
    Minus,
}

impl fmt::Display for ScCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScCase::Plus => "SC+",
            ScCase::Minus => "SC-",
        })
    }
}

impl<T: Real> ConditionBundle<T> {
    pub fn report(&self, kind: ConditionKind) -> &ConditionReport<T> {
        self.reports.iter().find(|r| r.condition == kind).expect("all six conditions are reported")
    }

    pub fn verdict(&self, kind: ConditionKind) -> Verdict {
        self.report(kind).verdict
    }

    /// The case for which (SC) holds, if any.
    pub fn sc_case(&self) -> Option<ScCase> {
        if self.verdict(ConditionKind::ScPlus) == Verdict::Holds {
            Some(ScCase::Plus)
        } else if self.verdict(ConditionKind::ScMinus) == Verdict::Holds {
            Some(ScCase::Minus)
        } else {
            None
        }
    }
}

fn margin_report<T: Real>(
    condition: ConditionKind,
    margins: Vec<T>,
    uncertainty: T,
    mut notes: Vec<String>,
) -> ConditionReport<T> {
    let min = margins.iter().copied().fold(T::infinity(), T::min);
    let verdict = if !margins.is_empty() && min > uncertainty { Verdict::Holds } else { Verdict::Fails };
    if verdict == Verdict::Fails {
        notes.push(format!("minimum margin {min:.6e} does not exceed uncertainty {uncertainty:.6e}"));
    }
    ConditionReport { condition, verdict, margins, uncertainty, notes, certification: None }
}

/// Uncertainty of a margin built from limit estimates: tail variation of
/// each limit times the mass it multiplies, plus a rounding allowance.
fn margin_uncertainty<T: Real>(tv: (T, T), values: (T, T), ints: &[DirectionIntegrals<T>]) -> T {
    ints.iter()
        .map(|d| {
            let rounding = T::epsilon()
                * T::lit(64.0)
                * (values.0.abs() * d.pos_mass + values.1.abs() * d.neg_mass + d.f_pos.abs() + d.f_neg.abs());
            tv.0 * d.pos_mass + tv.1 * d.neg_mass + rounding
        })
        .fold(T::zero(), T::max)
}

/// Runs asymptotics and all six condition checks.
pub fn evaluate<T: Real>(
    space: &ResonantSpace<T>,
    n: &Nonlinearity<T>,
    settings: &ConditionSettings,
) -> Result<ConditionBundle<T>, ConditionError> {
    let t_grid: Vec<T> = geometric_t_grid(settings.t_min, settings.t_max, settings.t_points)?;
    let asymptotics = n.asymptotics(&settings.asymptotics);
    let directions = space.directions(settings.directions);
    let integrals: Vec<DirectionIntegrals<T>> = directions.iter().map(|d| space.integrals(d)).collect();

    let mut reports = Vec::with_capacity(6);
    let mut bridge = None;
    match asymptotics.limits() {
        Some(limits) => {
            let tv = (asymptotics.g_plus.tail_variation, asymptotics.g_minus.tail_variation);
            let unc = margin_uncertainty(tv, limits, &integrals);
            let m: Vec<T> = integrals.iter().map(|d| ll_margin(limits, d)).collect();
            let notes = vec![format!("g(+inf) = {:.9}, g(-inf) = {:.9}", limits.0, limits.1)];
            reports.push(margin_report(ConditionKind::LlPlus, m.clone(), unc, notes.clone()));
            reports.push(margin_report(ConditionKind::LlMinus, m.iter().map(|&x| -x).collect(), unc, notes));
            bridge = Some(integrals.iter().map(|d| ll_sc_bridge(limits, d)).collect());
        }
        None => {
            let note = missing_note("g", asymptotics.g_plus.exists, asymptotics.g_minus.exists);
            reports.push(ConditionReport::inapplicable(ConditionKind::LlPlus, note.clone()));
            reports.push(ConditionReport::inapplicable(ConditionKind::LlMinus, note));
        }
    }
    match asymptotics.slopes() {
        Some(slopes) => {
            let tv = (asymptotics.slope_plus.tail_variation, asymptotics.slope_minus.tail_variation);
            let unc = margin_uncertainty(tv, slopes, &integrals);
            let m: Vec<T> = integrals.iter().map(|d| pll_margin(slopes, d)).collect();
            let notes = vec![format!("G+ = {:.9}, G- = {:.9}", slopes.0, slopes.1)];
            reports.push(margin_report(ConditionKind::PllPlus, m.clone(), unc, notes.clone()));
            reports.push(margin_report(ConditionKind::PllMinus, m.iter().map(|&x| -x).collect(), unc, notes));
        }
        None => {
            let note = missing_note("G(s)/s", asymptotics.slope_plus.exists, asymptotics.slope_minus.exists);
            reports.push(ConditionReport::inapplicable(ConditionKind::PllPlus, note.clone()));
            reports.push(ConditionReport::inapplicable(ConditionKind::PllMinus, note));
        }
    }

    let profiles: Vec<RayProfile<T>> = directions
        .par_iter()
        .enumerate()
        .map(|(i, d)| space.ray_profile(n, i, d, &t_grid))
        .collect::<Result<_, _>>()?;
    let (sc_plus, sc_minus) = classify_sc(&profiles, T::lit(settings.profile_tol));
    reports.push(sc_plus);
    reports.push(sc_minus);
    let trends = profiles.iter().map(RayProfile::trend).collect();

    Ok(ConditionBundle {
        nonlinearity: n.label().to_string(),
        bar_ranks: space.ranks.clone(),
        f_bar: space.f_bar.clone(),
        asymptotics,
        reports,
        directions,
        integrals,
        bridge,
        profiles,
        trends,
        settings: *settings,
    })
}

fn missing_note(what: &str, plus: bool, minus: bool) -> String {
    match (plus, minus) {
        (false, false) => format!("{what}(+inf) and {what}(-inf) do not exist"),
        (false, true) => format!("{what}(+inf) does not exist"),
        _ => format!("{what}(-inf) does not exist"),
    }
}
