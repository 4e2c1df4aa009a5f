//! Closed-form Dirichlet eigenpairs of the Laplacian on intervals and
//! rectangles, and the split of the truncated eigenbasis around a resonant
//! eigenvalue `λ_k` into the parts below (hat), at (bar) and above (tilde) it.
//!
//! Eigenfunctions are L²-normalized sine products, so a function is stored
//! as its [`CoefficientVector`] in this basis: the L² norm is the Euclidean
//! norm of the coefficients and `‖∇u‖₂² = Σ λᵢ aᵢ²`.

use std::cmp::Ordering;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Default relative threshold below which two eigenvalues count as equal.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("eigenpair count must be at least 1")]
    EmptyBasis,
    #[error("resonant rank k must be at least 1")]
    ZeroRank,
    #[error(
        "rank k={k} lies inside the eigenvalue tie group {first}..={last}; use the group's first rank k={first}"
    )]
    RankInsideTieGroup { k: usize, first: usize, last: usize },
    #[error("truncation N={n} too small: the resonant group ends at rank {last_bar}, N must exceed it")]
    TruncationTooSmall { n: usize, last_bar: usize },
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Bounded product domain with homogeneous Dirichlet boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain<T> {
    /// Open interval (a, b).
    Interval { a: T, b: T },
    /// Rectangle (0, lx) × (0, ly).
    Rectangle { lx: T, ly: T },
}

impl<T: Real> Domain<T> {
    pub fn interval(a: T, b: T) -> Result<Self, SpectralError> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(SpectralError::InvalidDomain(format!("interval needs b > a, got ({a}, {b})")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn rectangle(lx: T, ly: T) -> Result<Self, SpectralError> {
        if !(lx.is_finite() && ly.is_finite() && lx > T::zero() && ly > T::zero()) {
            return Err(SpectralError::InvalidDomain(format!("rectangle needs positive sides, got {lx} x {ly}")));
        }
        Ok(Domain::Rectangle { lx, ly })
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        match *self {
            Domain::Interval { a, b } => Self::interval(a, b).map(|_| ()),
            Domain::Rectangle { lx, ly } => Self::rectangle(lx, ly).map(|_| ()),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    /// Lebesgue measure |Ω|.
    pub fn measure(&self) -> T {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { lx, ly } => lx * ly,
        }
    }
}

/// Mode numbers of a sine eigenfunction, one per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mode {
    Interval(usize),
    Rectangle(usize, usize),
}

impl Mode {
    pub fn numbers(&self) -> Vec<usize> {
        match *self {
            Mode::Interval(p) => vec![p],
            Mode::Rectangle(p, q) => vec![p, q],
        }
    }
}

/// One Dirichlet eigenvalue with its L²-normalized eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair<T> {
    /// 1-based rank in the nondecreasing ordering.
    pub index: usize,
    pub eigenvalue: T,
    pub mode: Mode,
    domain: Domain<T>,
}

impl<T: Real> EigenPair<T> {
    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    /// φ(x); `p[1]` is ignored on intervals.
    pub fn value(&self, p: [T; 2]) -> T {
        let pi = T::PI();
        match (self.domain, self.mode) {
            (Domain::Interval { a, b }, Mode::Interval(n)) => {
                let len = b - a;
                (T::lit(2.0) / len).sqrt() * (T::from_usize_lossy(n) * pi * (p[0] - a) / len).sin()
            }
            (Domain::Rectangle { lx, ly }, Mode::Rectangle(m, n)) => {
                let amp = T::lit(2.0) / (lx * ly).sqrt();
                amp * (T::from_usize_lossy(m) * pi * p[0] / lx).sin() * (T::from_usize_lossy(n) * pi * p[1] / ly).sin()
            }
            _ => unreachable!("mode kind always matches domain kind"),
        }
    }

    /// ∇φ(x); the second component is zero on intervals.
    pub fn gradient(&self, p: [T; 2]) -> [T; 2] {
        let pi = T::PI();
        match (self.domain, self.mode) {
            (Domain::Interval { a, b }, Mode::Interval(n)) => {
                let len = b - a;
                let w = T::from_usize_lossy(n) * pi / len;
                [(T::lit(2.0) / len).sqrt() * w * (w * (p[0] - a)).cos(), T::zero()]
            }
            (Domain::Rectangle { lx, ly }, Mode::Rectangle(m, n)) => {
                let amp = T::lit(2.0) / (lx * ly).sqrt();
                let wx = T::from_usize_lossy(m) * pi / lx;
                let wy = T::from_usize_lossy(n) * pi / ly;
                [
                    amp * wx * (wx * p[0]).cos() * (wy * p[1]).sin(),
                    amp * wy * (wx * p[0]).sin() * (wy * p[1]).cos(),
                ]
            }
            _ => unreachable!("mode kind always matches domain kind"),
        }
    }
}

/// First `count` eigenpairs of -u'' = λu on (a, b): λₙ = (nπ/(b−a))².
pub fn eigen_interval<T: Real>(domain: &Domain<T>, count: usize) -> Result<Vec<EigenPair<T>>, SpectralError> {
    let Domain::Interval { a, b } = *domain else {
        return Err(SpectralError::InvalidDomain("expected an interval".into()));
    };
    domain.validate()?;
    if count == 0 {
        return Err(SpectralError::EmptyBasis);
    }
    let len = b - a;
    Ok((1..=count)
        .map(|n| {
            let w = T::from_usize_lossy(n) * T::PI() / len;
            EigenPair { index: n, eigenvalue: w * w, mode: Mode::Interval(n), domain: *domain }
        })
        .collect())
}

/// First `count` eigenpairs on (0, lx) × (0, ly), nondecreasing, with
/// numerically tied eigenvalues ordered lexicographically in (p, q).
pub fn eigen_rectangle<T: Real>(domain: &Domain<T>, count: usize) -> Result<Vec<EigenPair<T>>, SpectralError> {
    let Domain::Rectangle { lx, ly } = *domain else {
        return Err(SpectralError::InvalidDomain("expected a rectangle".into()));
    };
    domain.validate()?;
    if count == 0 {
        return Err(SpectralError::EmptyBasis);
    }
    let pi = T::PI();
    let lam = |p: usize, q: usize| {
        let wx = T::from_usize_lossy(p) * pi / lx;
        let wy = T::from_usize_lossy(q) * pi / ly;
        wx * wx + wy * wy
    };
    // Every pair among the first `count` has p, q ≤ count, and the count-th
    // smallest eigenvalue is at most the count-th along either axis alone;
    // enumerating below that bound (plus tie slack) captures all of them.
    let bound = lam(count, 1).min(lam(1, count));
    let slack = T::one() + T::lit(DEFAULT_TIE_TOLERANCE) * T::lit(4.0);
    let mut cands: Vec<(T, usize, usize)> = Vec::new();
    for p in 1..=count {
        if lam(p, 1) > bound * slack {
            break;
        }
        for q in 1..=count {
            let l = lam(p, q);
            if l > bound * slack {
                break;
            }
            cands.push((l, p, q));
        }
    }
    cands.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal).then((x.1, x.2).cmp(&(y.1, y.2))));
    // reorder numerically tied runs lexicographically
    let tol = T::lit(DEFAULT_TIE_TOLERANCE);
    let mut start = 0;
    while start < cands.len() {
        let mut end = start + 1;
        while end < cands.len() && ties(cands[start].0, cands[end].0, tol) {
            end += 1;
        }
        cands[start..end].sort_by_key(|c| (c.1, c.2));
        start = end;
    }
    Ok(cands
        .into_iter()
        .take(count)
        .enumerate()
        .map(|(i, (l, p, q))| EigenPair { index: i + 1, eigenvalue: l, mode: Mode::Rectangle(p, q), domain: *domain })
        .collect())
}

/// Dispatches on the domain kind.
pub fn eigenpairs<T: Real>(domain: &Domain<T>, count: usize) -> Result<Vec<EigenPair<T>>, SpectralError> {
    match domain {
        Domain::Interval { .. } => eigen_interval(domain, count),
        Domain::Rectangle { .. } => eigen_rectangle(domain, count),
    }
}

fn ties<T: Real>(x: T, y: T, tol: T) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs())
}

/// Which of the three eigen-subspaces to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    /// λ < λ_k.
    Hat,
    /// λ = λ_k (the resonant eigenspace).
    Bar,
    /// λ > λ_k.
    Tilde,
}

/// Partition of ranks 1..=N into hat / bar / tilde index sets (0-based
/// storage, 1-based in messages and serialized output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition<T> {
    pub k: usize,
    pub multiplicity: usize,
    pub n: usize,
    pub tie_tolerance: T,
    /// Eigenvalues λ₁..λ_N of the underlying basis.
    pub eigenvalues: Vec<T>,
    hat: Vec<usize>,
    bar: Vec<usize>,
    tilde: Vec<usize>,
}

impl<T: Real> SpectralDecomposition<T> {
    /// Zero-based positions of the hat part.
    pub fn hat(&self) -> &[usize] {
        &self.hat
    }

    /// Zero-based positions of the bar part.
    pub fn bar(&self) -> &[usize] {
        &self.bar
    }

    /// Zero-based positions of the tilde part.
    pub fn tilde(&self) -> &[usize] {
        &self.tilde
    }

    pub fn indices(&self, part: Part) -> &[usize] {
        match part {
            Part::Hat => &self.hat,
            Part::Bar => &self.bar,
            Part::Tilde => &self.tilde,
        }
    }

    /// The resonant eigenvalue λ_k.
    pub fn lambda_k(&self) -> T {
        self.eigenvalues[self.k - 1]
    }

    pub fn part_of(&self, position: usize) -> Part {
        if position + 1 < self.k {
            Part::Hat
        } else if position + 1 < self.k + self.multiplicity {
            Part::Bar
        } else {
            Part::Tilde
        }
    }

    /// Keeps the coefficients of one part, zeroing the rest.
    pub fn project(&self, u: &CoefficientVector<T>, part: Part) -> Result<CoefficientVector<T>, SpectralError> {
        self.check_len(u)?;
        let mut out = CoefficientVector::zeros(u.len());
        for &i in self.indices(part) {
            out[i] = u[i];
        }
        Ok(out)
    }

    /// f = f̄ + f⊥ with f̄ the bar projection.
    pub fn split_rhs(
        &self,
        f: &CoefficientVector<T>,
    ) -> Result<(CoefficientVector<T>, CoefficientVector<T>), SpectralError> {
        self.check_len(f)?;
        let bar = self.project(f, Part::Bar)?;
        let mut perp = f.clone();
        for &i in &self.bar {
            perp[i] = T::zero();
        }
        Ok((bar, perp))
    }

    /// Sharp constants of the quadratic form Q(u) = ‖∇u‖² − λ_k‖u‖₂² on
    /// the hat and tilde parts, in the gradient norm:
    /// `Q(û) ≤ −c1‖û‖²` with `c1 = λ_k/λ_{k−1} − 1` (absent when k = 1) and
    /// `Q(ũ) ≥ c3‖ũ‖²` with `c3 = 1 − λ_k/λ_{k+m}`.
    pub fn gap_constants(&self) -> GapConstants<T> {
        let lk = self.lambda_k();
        let c1 = self.hat.last().map(|&i| lk / self.eigenvalues[i] - T::one());
        let c3 = T::one() - lk / self.eigenvalues[self.tilde[0]];
        GapConstants { c1, c3 }
    }

    /// λ_k − λ_{k−1}, if k ≥ 2.
    pub fn lower_gap(&self) -> Option<T> {
        self.hat.last().map(|&i| self.lambda_k() - self.eigenvalues[i])
    }

    /// λ_{k+m} − λ_k.
    pub fn upper_gap(&self) -> T {
        self.eigenvalues[self.tilde[0]] - self.lambda_k()
    }

    /// Q(u) = Σ (λᵢ − λ_k) aᵢ².
    pub fn quadratic_form(&self, u: &[T]) -> T {
        let lk = self.lambda_k();
        u.iter().zip(&self.eigenvalues).map(|(&a, &l)| (l - lk) * a * a).sum()
    }

    fn check_len(&self, u: &CoefficientVector<T>) -> Result<(), SpectralError> {
        if u.len() != self.n {
            return Err(SpectralError::LengthMismatch { got: u.len(), expected: self.n });
        }
        Ok(())
    }
}

/// Sharp gap constants of the quadratic form on the truncated eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConstants<T> {
    pub c1: Option<T>,
    pub c3: T,
}

/// Splits ranks 1..=N around the resonant rank `k`.
pub fn decompose<T: Real>(
    eigenpairs: &[EigenPair<T>],
    k: usize,
    tie_tolerance: T,
) -> Result<SpectralDecomposition<T>, SpectralError> {
    let n = eigenpairs.len();
    if n == 0 {
        return Err(SpectralError::EmptyBasis);
    }
    if k == 0 {
        return Err(SpectralError::ZeroRank);
    }
    if k > n {
        return Err(SpectralError::TruncationTooSmall { n, last_bar: k });
    }
    let lam: Vec<T> = eigenpairs.iter().map(|e| e.eigenvalue).collect();
    let lk = lam[k - 1];
    let mut first = k;
    while first > 1 && ties(lam[first - 2], lk, tie_tolerance) {
        first -= 1;
    }
    let mut last = k;
    while last < n && ties(lam[last], lk, tie_tolerance) {
        last += 1;
    }
    if first != k {
        return Err(SpectralError::RankInsideTieGroup { k, first, last });
    }
    if last >= n {
        return Err(SpectralError::TruncationTooSmall { n, last_bar: last });
    }
    Ok(SpectralDecomposition {
        k,
        multiplicity: last - k + 1,
        n,
        tie_tolerance,
        eigenvalues: lam,
        hat: (0..k - 1).collect(),
        bar: (k - 1..last).collect(),
        tilde: (last..n).collect(),
    })
}

/// L² coefficients of a function in the truncated eigenbasis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector<T>(pub Vec<T>);

impl<T: Real> CoefficientVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    /// The coefficient vector of a single eigenfunction φ_rank (1-based).
    pub fn unit(n: usize, rank: usize) -> Self {
        let mut v = Self::zeros(n);
        v[rank - 1] = T::one();
        v
    }

    /// ‖u‖₂ by Parseval.
    pub fn l2_norm(&self) -> T {
        crate::scalar::norm2(&self.0)
    }

    /// ‖∇u‖₂² = Σ λᵢ aᵢ².
    pub fn h_norm_sq(&self, eigenvalues: &[T]) -> T {
        self.0.iter().zip(eigenvalues).map(|(&a, &l)| l * a * a).sum()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for CoefficientVector<T> {
    type Target = Vec<T>;
    fn deref(&self) -> &Vec<T> {
        &self.0
    }
}

impl<T> DerefMut for CoefficientVector<T> {
    fn deref_mut(&mut self) -> &mut Vec<T> {
        &mut self.0
    }
}

impl<T> From<Vec<T>> for CoefficientVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// Largest mode number per axis among `pairs` (second entry 1 on intervals).
pub fn max_modes<T>(pairs: &[EigenPair<T>]) -> [usize; 2] {
    pairs.iter().fold([1, 1], |acc, e| match e.mode {
        Mode::Interval(p) => [acc[0].max(p), 1],
        Mode::Rectangle(p, q) => [acc[0].max(p), acc[1].max(q)],
    })
}
