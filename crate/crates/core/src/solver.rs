//! Spectral Galerkin discretization of the energy
//!
//! E(u) = ½‖∇u‖² − (λ_k/2)‖u‖₂² + ∫G(u) − ∫fu
//!
//! on the first N eigenfunctions, with Newton and saddle-aware critical
//! point searches.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{ResonantSpace, ScCase};
use crate::linalg::SymmetricMatrix;
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::{accumulate, non_finite, QuadratureError, QuadratureGrid, QuadratureSettings, Summation};
use crate::scalar::{norm2, Real};
use crate::spectral::{
    decompose, eigenpairs, max_modes, CoefficientVector, Domain, EigenPair, Part, SpectralDecomposition, SpectralError,
    DEFAULT_TIE_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("test basis size {n_test} is smaller than the trial basis size {n}")]
    TestBasisTooSmall { n_test: usize, n: usize },
}

/// Spectral Galerkin problem on the first N eigenfunctions.
#[derive(Debug, Clone)]
pub struct GalerkinProblem<T> {
    domain: Domain<T>,
    pairs: Vec<EigenPair<T>>,
    decomposition: SpectralDecomposition<T>,
    nonlinearity: Nonlinearity<T>,
    /// Eigen-coefficients of f; entries past N only enter residual checks.
    forcing: Vec<T>,
    quadrature: QuadratureSettings,
    grid: QuadratureGrid<T>,
    /// N × Q basis values, row per eigenfunction.
    table: Vec<Vec<T>>,
}

impl<T: Real> GalerkinProblem<T> {
    /// `forcing` lists f's coefficients on φ₁, φ₂, …; shorter lists are
    /// zero-padded to N.
    pub fn new(
        domain: Domain<T>,
        k: usize,
        n: usize,
        nonlinearity: Nonlinearity<T>,
        forcing: Vec<T>,
        quadrature: QuadratureSettings,
    ) -> Result<Self, SolverError> {
        domain.validate()?;
        let pairs = eigenpairs(&domain, n)?;
        let decomposition = decompose(&pairs, k, T::lit(DEFAULT_TIE_TOLERANCE))?;
        let grid = QuadratureGrid::for_modes(&domain, max_modes(&pairs), &quadrature)?;
        let table = tabulate(&pairs, &grid);
        let mut forcing = forcing;
        if forcing.len() < n {
            forcing.resize(n, T::zero());
        }
        Ok(Self { domain, pairs, decomposition, nonlinearity, forcing, quadrature, grid, table })
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn pairs(&self) -> &[EigenPair<T>] {
        &self.pairs
    }

    pub fn decomposition(&self) -> &SpectralDecomposition<T> {
        &self.decomposition
    }

    pub fn nonlinearity(&self) -> &Nonlinearity<T> {
        &self.nonlinearity
    }

    pub fn grid(&self) -> &QuadratureGrid<T> {
        &self.grid
    }

    pub fn quadrature(&self) -> &QuadratureSettings {
        &self.quadrature
    }

    /// All forcing coefficients, including those past N.
    pub fn forcing(&self) -> &[T] {
        &self.forcing
    }

    /// First N forcing coefficients.
    pub fn trial_forcing(&self) -> &[T] {
        &self.forcing[..self.n()]
    }

    /// H̄ with f̄, tabulated on this problem's grid.
    pub fn resonant_space(&self) -> ResonantSpace<T> {
        ResonantSpace::new(&self.pairs, &self.decomposition, &self.forcing, self.grid.clone())
    }

    fn check(&self, a: &[T]) -> Result<(), SolverError> {
        if a.len() != self.n() {
            return Err(SolverError::LengthMismatch { got: a.len(), expected: self.n() });
        }
        Ok(())
    }

    fn shifted(&self, i: usize) -> T {
        self.pairs[i].eigenvalue - self.decomposition.lambda_k()
    }

    /// u at the quadrature points.
    pub fn field(&self, a: &[T]) -> Vec<T> {
        let mut u = vec![T::zero(); self.grid.len()];
        for (row, &c) in self.table.iter().zip(a) {
            if c == T::zero() {
                continue;
            }
            for (uq, &v) in u.iter_mut().zip(row) {
                *uq += c * v;
            }
        }
        u
    }

    /// ∫G(u) by quadrature.
    pub fn potential(&self, a: &[T]) -> Result<T, SolverError> {
        self.check(a)?;
        self.potential_of_field(&self.field(a))
    }

    fn potential_of_field(&self, u: &[T]) -> Result<T, SolverError> {
        let mut terms = Vec::with_capacity(u.len());
        for (q, (&x, &w)) in u.iter().zip(self.grid.weights()).enumerate() {
            let v = self.nonlinearity.antiderivative(x)?;
            if !v.is_finite() {
                return Err(non_finite(self.grid.points()[q], v).into());
            }
            terms.push(w * v);
        }
        Ok(accumulate(terms.into_iter(), self.grid.summation()))
    }

    /// E(a) = ½Σ(λᵢ − λ_k)aᵢ² + ∫G(u) − Σfᵢaᵢ.
    pub fn energy(&self, a: &[T]) -> Result<T, SolverError> {
        self.check(a)?;
        let quad = self.decomposition.quadratic_form(a) * T::lit(0.5);
        let lin: T = a.iter().zip(&self.forcing).map(|(&x, &f)| x * f).sum();
        Ok(quad + self.potential(a)? - lin)
    }

    fn sampled(&self, u: &[T], f: impl Fn(T) -> T) -> Result<Vec<T>, SolverError> {
        let mut out = Vec::with_capacity(u.len());
        for (q, &x) in u.iter().enumerate() {
            let v = f(x);
            if !v.is_finite() {
                return Err(non_finite(self.grid.points()[q], v).into());
            }
            out.push(v * self.grid.weights()[q]);
        }
        Ok(out)
    }

    /// Component i: (λᵢ − λ_k)aᵢ + ∫g(u)φᵢ − fᵢ.
    pub fn gradient(&self, a: &[T]) -> Result<CoefficientVector<T>, SolverError> {
        self.check(a)?;
        let wg = self.sampled(&self.field(a), |x| self.nonlinearity.g(x))?;
        let mode = self.grid.summation();
        Ok(CoefficientVector(
            (0..self.n())
                .map(|i| {
                    let proj = accumulate(self.table[i].iter().zip(&wg).map(|(&p, &w)| p * w), mode);
                    self.shifted(i) * a[i] + proj - self.forcing[i]
                })
                .collect(),
        ))
    }

    /// diag(λᵢ − λ_k) + [∫g′(u)φᵢφⱼ].
    pub fn hessian(&self, a: &[T]) -> Result<SymmetricMatrix<T>, SolverError> {
        self.check(a)?;
        let wd = self.sampled(&self.field(a), |x| self.nonlinearity.g_prime(x))?;
        let n = self.n();
        let mode = self.grid.summation();
        let weighted: Vec<Vec<T>> = self.table.iter().map(|row| row.iter().zip(&wd).map(|(&p, &w)| p * w).collect()).collect();
        let mut h = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = accumulate(weighted[i].iter().zip(&self.table[j]).map(|(&x, &y)| x * y), mode);
                h.set(i, j, v);
                h.set(j, i, v);
            }
            h.set(i, i, h.get(i, i) + self.shifted(i));
        }
        Ok(h)
    }

    /// Weak-form residual with test functions φ₁..φ_{n_test}; trial
    /// coefficients past N are zero. Uses its own grid sized for n_test.
    pub fn weak_residual(&self, a: &[T], n_test: usize) -> Result<WeakResidual<T>, SolverError> {
        self.check(a)?;
        if n_test < self.n() {
            return Err(SolverError::TestBasisTooSmall { n_test, n: self.n() });
        }
        let test_pairs = eigenpairs(&self.domain, n_test)?;
        let grid = QuadratureGrid::for_modes(&self.domain, max_modes(&test_pairs), &self.quadrature)?;
        let trial = tabulate(&self.pairs, &grid);
        let mut u = vec![T::zero(); grid.len()];
        for (row, &c) in trial.iter().zip(a) {
            for (uq, &v) in u.iter_mut().zip(row) {
                *uq += c * v;
            }
        }
        let mut wg = Vec::with_capacity(u.len());
        for (q, &x) in u.iter().enumerate() {
            let v = self.nonlinearity.g(x);
            if !v.is_finite() {
                return Err(non_finite(grid.points()[q], v).into());
            }
            wg.push(v * grid.weights()[q]);
        }
        let lk = self.decomposition.lambda_k();
        let components: Vec<T> = test_pairs
            .iter()
            .enumerate()
            .map(|(i, pair)| {
                let proj = accumulate(grid.points().iter().zip(&wg).map(|(&p, &w)| pair.value(p) * w), grid.summation());
                let ai = a.get(i).copied().unwrap_or(T::zero());
                let fi = self.forcing.get(i).copied().unwrap_or(T::zero());
                (pair.eigenvalue - lk) * ai + proj - fi
            })
            .collect();
        let norm = norm2(&components);
        let tail_norm = norm2(&components[self.n()..]);
        Ok(WeakResidual { n_test, components, norm, tail_norm })
    }

    /// The four-term energy decomposition A + B + C − D.
    pub fn energy_split(&self, a: &[T]) -> Result<EnergySplit<T>, SolverError> {
        self.check(a)?;
        let half = T::lit(0.5);
        let part_sum = |part: Part, f: &dyn Fn(usize) -> T| self.decomposition.indices(part).iter().map(|&i| f(i)).sum::<T>();
        let quad = |i: usize| half * self.shifted(i) * a[i] * a[i];
        let lin = |i: usize| self.forcing[i] * a[i];
        let big_a = part_sum(Part::Hat, &quad);
        let big_b = part_sum(Part::Tilde, &quad);
        let big_c = self.potential(a)? - part_sum(Part::Bar, &lin);
        let big_d = part_sum(Part::Hat, &lin) + part_sum(Part::Tilde, &lin);
        Ok(EnergySplit { a: big_a, b: big_b, c: big_c, d: big_d, total: big_a + big_b + big_c - big_d })
    }

    /// Nonresonant linear solution: aᵢ = fᵢ/(λᵢ − λ_k) off H̄, zero on H̄.
    pub fn linear_solution(&self) -> CoefficientVector<T> {
        CoefficientVector(
            (0..self.n())
                .map(|i| if self.decomposition.part_of(i) == Part::Bar { T::zero() } else { self.forcing[i] / self.shifted(i) })
                .collect(),
        )
    }

    /// Default multi-start points: 0, ±εφ for each bar eigenfunction with
    /// ε = 0.1‖f‖₂ + 0.1, and the nonresonant linear solution.
    pub fn default_starts(&self) -> Vec<CoefficientVector<T>> {
        let n = self.n();
        let eps = T::lit(0.1) * norm2(&self.forcing) + T::lit(0.1);
        let mut starts = vec![CoefficientVector::zeros(n)];
        for &i in self.decomposition.bar() {
            for sign in [T::one(), -T::one()] {
                let mut s = CoefficientVector::zeros(n);
                s[i] = sign * eps;
                starts.push(s);
            }
        }
        starts.push(self.linear_solution());
        starts
    }

    /// u at arbitrary points.
    pub fn evaluate_at(&self, a: &[T], p: [T; 2]) -> T {
        self.pairs.iter().zip(a).map(|(e, &c)| c * e.value(p)).sum()
    }
}

fn tabulate<T: Real>(pairs: &[EigenPair<T>], grid: &QuadratureGrid<T>) -> Vec<Vec<T>> {
    pairs.iter().map(|e| grid.points().iter().map(|&p| e.value(p)).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual<T> {
    pub n_test: usize,
    pub components: Vec<T>,
    pub norm: T,
    /// Norm of the components beyond the trial space.
    pub tail_norm: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit<T> {
    /// ½Σ_hat (λᵢ − λ_k)aᵢ²
    pub a: T,
    /// ½Σ_tilde (λᵢ − λ_k)aᵢ²
    pub b: T,
    /// ∫G(u) − ∫f̄u
    pub c: T,
    /// ∫f⊥(û + ũ)
    pub d: T,
    /// A + B + C − D
    pub total: T,
}

/// Newton and saddle search controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Convergence threshold on ‖∇E‖₂.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking stops below this step length.
    pub min_step: f64,
    /// Relative cutoff for the pseudo-inverse.
    pub singular_cutoff: f64,
    /// Saddle iterations without a 0.1% improvement of ‖∇E‖ before polishing.
    pub patience: usize,
    pub saddle_max_iter: usize,
    /// ‖∇E‖ below which the saddle search hands over to Newton.
    pub polish_threshold: f64,
    /// Test basis size for residual checks; 0 means 2N.
    pub n_test: usize,
    /// Distance below which converged points are merged.
    pub dedup_distance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 100,
            min_step: 1e-12,
            singular_cutoff: 1e-10,
            patience: 25,
            saddle_max_iter: 2000,
            polish_threshold: 1e-3,
            n_test: 0,
            dedup_distance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Newton,
    Saddle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<T> {
    pub iteration: usize,
    pub energy: T,
    pub gradient_norm: T,
    /// Step length accepted by the line search (1 for saddle sweeps).
    pub step: T,
    pub coeffs: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult<T> {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<ScCase>,
    pub converged: bool,
    pub coeffs: CoefficientVector<T>,
    pub energy: T,
    pub gradient_norm: T,
    /// ‖weak residual‖₂ with N_test test functions.
    pub residual_norm: T,
    pub n_test: usize,
    pub morse_index: usize,
    /// Hessian eigenvalues within the singular cutoff of zero.
    pub nullity: usize,
    pub iterations: usize,
    pub trace: Vec<TraceEntry<T>>,
    pub notes: Vec<String>,
}

impl<T: Real> GalerkinProblem<T> {
    fn entry(&self, iteration: usize, a: &[T], g: &[T], step: T, note: Option<String>) -> Result<TraceEntry<T>, SolverError> {
        Ok(TraceEntry { iteration, energy: self.energy(a)?, gradient_norm: norm2(g), step, coeffs: a.to_vec(), note })
    }

    fn finish(
        &self,
        method: Method,
        geometry: Option<ScCase>,
        converged: bool,
        a: Vec<T>,
        iterations: usize,
        trace: Vec<TraceEntry<T>>,
        mut notes: Vec<String>,
        settings: &SolverSettings,
    ) -> Result<SolveResult<T>, SolverError> {
        let g = self.gradient(&a)?;
        let eig = self.hessian(&a)?.eigen();
        let scale = eig.spectral_radius().max(T::one());
        let cutoff = T::lit(settings.singular_cutoff) * scale;
        let morse_index = eig.count_below(-cutoff);
        let nullity = eig.values.iter().filter(|v| v.abs() <= cutoff).count();
        let n_test = if settings.n_test == 0 { 2 * self.n() } else { settings.n_test.max(self.n()) };
        let residual = self.weak_residual(&a, n_test)?;
        if !converged {
            notes.push(format!("not converged after {iterations} iterations"));
        }
        Ok(SolveResult {
            method,
            geometry,
            converged,
            energy: self.energy(&a)?,
            gradient_norm: norm2(&g),
            coeffs: CoefficientVector(a),
            residual_norm: residual.norm,
            n_test,
            morse_index,
            nullity,
            iterations,
            trace,
            notes,
        })
    }

    /// Damped Newton iteration on ∇E = 0 with backtracking on ‖∇E‖².
    /// Singular Hessians are handled by a pseudo-inverse step.
    pub fn newton_solve(&self, start: &[T], settings: &SolverSettings) -> Result<SolveResult<T>, SolverError> {
        self.check(start)?;
        let (a, converged, iterations, trace, notes) = self.newton_loop(start.to_vec(), settings, Vec::new(), 0)?;
        self.finish(Method::Newton, None, converged, a, iterations, trace, notes, settings)
    }

    #[allow(clippy::type_complexity)]
    fn newton_loop(
        &self,
        mut a: Vec<T>,
        settings: &SolverSettings,
        mut trace: Vec<TraceEntry<T>>,
        offset: usize,
    ) -> Result<(Vec<T>, bool, usize, Vec<TraceEntry<T>>, Vec<String>), SolverError> {
        let tol = T::lit(settings.tol);
        let mut notes = Vec::new();
        let mut g = self.gradient(&a)?.0;
        let mut step_len = T::zero();
        let mut note: Option<String> = None;
        for it in 0..=settings.max_iter {
            trace.push(self.entry(offset + it, &a, &g, step_len, note.take())?);
            let gn = norm2(&g);
            if gn <= tol {
                return Ok((a, true, it, trace, notes));
            }
            if it == settings.max_iter {
                break;
            }
            let eig = self.hessian(&a)?.eigen();
            let rhs: Vec<T> = g.iter().map(|&x| -x).collect();
            let (dir, dropped) = eig.pseudo_solve(&rhs, T::lit(settings.singular_cutoff));
            if dropped > 0 {
                note = Some(format!("pseudo-inverse step, {dropped} near-singular direction(s) dropped"));
            }
            let f0 = gn * gn;
            let mut t = T::one();
            let accepted = loop {
                let trial: Vec<T> = a.iter().zip(&dir).map(|(&x, &d)| x + t * d).collect();
                let tg = self.gradient(&trial);
                if let Ok(tg) = tg {
                    let ft = norm2(&tg) * norm2(&tg);
                    if ft <= (T::one() - T::lit(2e-4) * t) * f0 {
                        break Some((trial, tg.0));
                    }
                }
                t *= T::lit(0.5);
                if t < T::lit(settings.min_step) {
                    break None;
                }
            };
            match accepted {
                Some((na, ng)) => {
                    a = na;
                    g = ng;
                    step_len = t;
                }
                None => {
                    notes.push(format!("line search failed at iteration {}", offset + it));
                    return Ok((a, false, it, trace, notes));
                }
            }
        }
        Ok((a, false, settings.max_iter, trace, notes))
    }

    /// Alternating extremization in the saddle geometry of the given case,
    /// polished by Newton: ascent on H⁻ and descent on H⁺, where
    /// H⁻ = Ĥ, H⁺ = H̄ ⊕ H̃ for (SC)+ and H⁻ = Ĥ ⊕ H̄, H⁺ = H̃ for (SC)−.
    pub fn saddle_search(
        &self,
        case: ScCase,
        start: &[T],
        settings: &SolverSettings,
    ) -> Result<SolveResult<T>, SolverError> {
        self.check(start)?;
        let dec = &self.decomposition;
        let upper = dec.upper_gap();
        let lower = dec.lower_gap().unwrap_or(upper);
        let mut minus: Vec<usize> = dec.hat().to_vec();
        let mut plus: Vec<usize> = dec.tilde().to_vec();
        let bar_gap = match case {
            ScCase::Plus => {
                plus.extend_from_slice(dec.bar());
                upper
            }
            ScCase::Minus => {
                minus.extend_from_slice(dec.bar());
                lower
            }
        };
        // curvature scale per coordinate; bar coordinates borrow the gap of their side
        let step: Vec<T> = (0..self.n())
            .map(|i| {
                let s = self.shifted(i).abs();
                T::one() / if dec.part_of(i) == Part::Bar { bar_gap } else { s }
            })
            .collect();
        let tol = T::lit(settings.tol);
        let polish = T::lit(settings.polish_threshold);
        let mut a = start.to_vec();
        let mut trace = Vec::new();
        let mut notes = Vec::new();
        let mut g = self.gradient(&a)?.0;
        let mut best = norm2(&g);
        let mut since_best = 0usize;
        let mut it = 0usize;
        loop {
            trace.push(self.entry(it, &a, &g, T::one(), None)?);
            let gn = norm2(&g);
            if gn <= tol {
                return self.finish(Method::Saddle, Some(case), true, a, it, trace, notes, settings);
            }
            if gn <= polish {
                notes.push(format!("newton polish from iteration {it}, gradient norm {gn:.3e}"));
                break;
            }
            if since_best >= settings.patience {
                notes.push(format!("stagnation at iteration {it}, newton polish from gradient norm {gn:.3e}"));
                break;
            }
            if it >= settings.saddle_max_iter {
                notes.push(format!("saddle sweep limit reached, newton polish from gradient norm {gn:.3e}"));
                break;
            }
            for &i in &minus {
                a[i] += step[i] * g[i];
            }
            g = self.gradient(&a)?.0;
            for &i in &plus {
                a[i] -= step[i] * g[i];
            }
            g = self.gradient(&a)?.0;
            it += 1;
            let gn = norm2(&g);
            if !gn.is_finite() {
                notes.push("saddle sweep diverged".to_string());
                return self.finish(Method::Saddle, Some(case), false, a, it, trace, notes, settings);
            }
            if gn < best * T::lit(0.999) {
                best = gn;
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        let (a, converged, newton_iters, trace, more) = self.newton_loop(a, settings, trace, it + 1)?;
        notes.extend(more);
        self.finish(Method::Saddle, Some(case), converged, a, it + newton_iters, trace, notes, settings)
    }

    /// Runs from every default start (concurrently) and merges the results.
    /// `geometry = None` uses plain Newton.
    pub fn multi_start(&self, geometry: Option<ScCase>, settings: &SolverSettings) -> Result<MultiStart<T>, SolverError> {
        let starts = self.default_starts();
        let runs: Vec<SolveResult<T>> = starts
            .par_iter()
            .map(|s| match geometry {
                Some(case) => self.saddle_search(case, s, settings),
                None => self.newton_solve(s, settings),
            })
            .collect::<Result<_, _>>()?;
        Ok(MultiStart::merge(starts, runs, T::lit(settings.dedup_distance)))
    }
}

/// Deduplicated outcome of several solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStart<T> {
    pub starts: Vec<CoefficientVector<T>>,
    /// Converged, distinct critical points sorted by energy then
    /// lexicographically by coefficients.
    pub solutions: Vec<SolveResult<T>>,
    /// For each start, the index into `solutions` it converged to.
    pub assignment: Vec<Option<usize>>,
    /// Runs that did not converge, in start order.
    pub failures: Vec<SolveResult<T>>,
}

impl<T: Real> MultiStart<T> {
    fn merge(starts: Vec<CoefficientVector<T>>, runs: Vec<SolveResult<T>>, dedup: T) -> Self {
        let mut solutions: Vec<SolveResult<T>> = Vec::new();
        let mut failures = Vec::new();
        let mut owner: Vec<Option<usize>> = Vec::new();
        for r in runs {
            if !r.converged {
                owner.push(None);
                failures.push(r);
                continue;
            }
            let hit = solutions.iter().position(|s| distance(&s.coeffs, &r.coeffs) <= dedup);
            match hit {
                Some(j) => owner.push(Some(j)),
                None => {
                    owner.push(Some(solutions.len()));
                    solutions.push(r);
                }
            }
        }
        let mut order: Vec<usize> = (0..solutions.len()).collect();
        order.sort_by(|&i, &j| {
            let (x, y) = (&solutions[i], &solutions[j]);
            x.energy.partial_cmp(&y.energy).unwrap_or(std::cmp::Ordering::Equal).then_with(|| {
                x.coeffs
                    .iter()
                    .zip(y.coeffs.iter())
                    .map(|(a, b)| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let mut rank = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let mut slots: Vec<Option<SolveResult<T>>> = solutions.into_iter().map(Some).collect();
        let solutions = order.iter().map(|&i| slots[i].take().expect("each slot taken once")).collect();
        let assignment = owner.into_iter().map(|o| o.map(|j| rank[j])).collect();
        Self { starts, solutions, assignment, failures }
    }
}

fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Coefficients of f for a prescribed u* = Σaᵢφᵢ: fᵢ = (λᵢ − λ_k)aᵢ + ∫g(u*)φᵢ
/// for ranks 1..=n_forcing, evaluated on a grid fine enough for n_forcing
/// modes. With n_forcing ≥ N, u* is an exact critical point of the
/// truncated problem up to quadrature differences beyond N.
pub fn manufactured_forcing<T: Real>(
    domain: &Domain<T>,
    k: usize,
    nonlinearity: &Nonlinearity<T>,
    solution: &[T],
    n_forcing: usize,
    quadrature: &QuadratureSettings,
) -> Result<Vec<T>, SolverError> {
    let zero = vec![T::zero(); solution.len()];
    let p = GalerkinProblem::new(*domain, k, solution.len(), nonlinearity.clone(), zero, *quadrature)?;
    let mut f = p.gradient(solution)?.0;
    if n_forcing > solution.len() {
        let r = p.weak_residual(solution, n_forcing)?;
        f.extend_from_slice(&r.components[solution.len()..]);
    }
    Ok(f)
}

/// Quadrature settings with compensated summation; convenient for tests
/// that compare against tight oracles.
pub fn compensated(order: usize) -> QuadratureSettings {
    QuadratureSettings { order, cells: None, summation: Summation::Compensated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Builtin;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn strip() -> Domain<f64> {
        Domain::interval(0.0, PI).unwrap()
    }

    fn problem(g: Nonlinearity<f64>, k: usize, n: usize, f: Vec<f64>) -> GalerkinProblem<f64> {
        GalerkinProblem::new(strip(), k, n, g, f, QuadratureSettings::default()).unwrap()
    }

    fn unit(n: usize, rank: usize) -> Vec<f64> {
        CoefficientVector::<f64>::unit(n, rank).0
    }

    #[test]
    fn linear_energy_examples() {
        let p = problem(Nonlinearity::zero(), 2, 8, vec![]);
        assert_eq!(p.energy(&vec![0.0; 8]).unwrap(), 0.0);
        assert_eq!(p.energy(&unit(8, 2)).unwrap(), 0.0);
        assert!((p.energy(&unit(8, 3)).unwrap() - (9.0 - 4.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn linear_gradient_vanishes_at_exact_solution() {
        let mut f = vec![0.0; 8];
        f[4] = 1.0;
        let p = problem(Nonlinearity::zero(), 2, 8, f);
        let mut a = vec![0.0; 8];
        a[4] = 1.0 / (25.0 - 4.0);
        assert!(p.gradient(&a).unwrap().iter().all(|&x| x.abs() < 1e-16));
    }

    #[test]
    fn odd_g_gradient_zero_at_origin() {
        let p = problem(Nonlinearity::builtin(Builtin::Arctan), 2, 8, vec![]);
        assert!(p.gradient(&vec![0.0; 8]).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hessian_examples() {
        let p = problem(Nonlinearity::zero(), 2, 6, vec![]);
        let h = p.hessian(&vec![0.3; 6]).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { ((i + 1) * (i + 1)) as f64 - 4.0 } else { 0.0 };
                assert_eq!(h.get(i, j), want);
            }
        }
        let p = problem(Nonlinearity::builtin(Builtin::Arctan), 2, 6, vec![]);
        let h = p.hessian(&vec![0.0; 6]).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { ((i + 1) * (i + 1)) as f64 - 4.0 + 1.0 } else { 0.0 };
                assert!((h.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = problem(Nonlinearity::builtin(Builtin::ArctanCos { c: 1.0 }), 2, 10, vec![0.2, -0.1, 0.5]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = p.gradient(&a).unwrap();
            let scale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for i in 0..10 {
                let h = 1e-6;
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[i] += h;
                am[i] -= h;
                let fd = (p.energy(&ap).unwrap() - p.energy(&am).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * scale, "{i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn newton_solves_linear_problem_in_one_step() {
        let mut f = vec![0.0; 12];
        f[5] = 1.0;
        let p = problem(Nonlinearity::zero(), 2, 12, f);
        let r = p.newton_solve(&vec![0.0; 12], &SolverSettings::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert!((r.coeffs[5] - 1.0 / 32.0).abs() < 1e-15);
        assert!(r.residual_norm < 1e-12);
        assert!(r.trace.iter().any(|e| e.note.as_deref().is_some_and(|n| n.contains("pseudo-inverse"))));
        assert_eq!(r.morse_index, 1);
        assert_eq!(r.nullity, 1);
    }

    #[test]
    fn saddle_agrees_with_newton_on_linear_problem() {
        let f = vec![0.4, 0.0, -0.3, 0.2, 0.1];
        let p = problem(Nonlinearity::zero(), 2, 10, f);
        let s = SolverSettings::default();
        let a = p.newton_solve(&vec![0.0; 10], &s).unwrap();
        let b = p.saddle_search(ScCase::Plus, &vec![0.0; 10], &s).unwrap();
        assert!(a.converged && b.converged);
        assert!(distance(&a.coeffs, &b.coeffs) < 1e-9);
        let ms = p.multi_start(None, &s).unwrap();
        assert!(ms.failures.is_empty());
        // linear-case uniqueness: every start lands on one point, up to the
        // free bar component which the pseudo-inverse leaves where it starts
        for r in ms.solutions.iter() {
            let mut x = r.coeffs.clone();
            x[1] = 0.0;
            let mut y = a.coeffs.clone();
            y[1] = 0.0;
            assert!(distance(&x, &y) < 1e-8);
        }
    }

    #[test]
    fn k_one_saddle_is_minimization() {
        let p = problem(Nonlinearity::builtin(Builtin::Arctan), 1, 12, vec![0.0, 0.5, 0.3]);
        let s = SolverSettings::default();
        let a = p.newton_solve(&vec![0.0; 12], &s).unwrap();
        let b = p.saddle_search(ScCase::Plus, &vec![0.0; 12], &s).unwrap();
        assert!(a.converged && b.converged);
        assert!(distance(&a.coeffs, &b.coeffs) < 1e-9);
        assert_eq!(b.morse_index, 0);
    }

    #[test]
    fn energy_split_reconstructs_energy() {
        let p = problem(Nonlinearity::builtin(Builtin::ArctanCos { c: 2.0 }), 3, 10, vec![0.3, -0.2, 0.5, 0.1, 0.0, 0.7]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let gaps = p.decomposition().gap_constants();
        for _ in 0..20 {
            let a: Vec<f64> = (0..10).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let s = p.energy_split(&a).unwrap();
            assert!((s.total - p.energy(&a).unwrap()).abs() < 1e-9);
            let hat_h: f64 = p.decomposition().hat().iter().map(|&i| p.pairs()[i].eigenvalue * a[i] * a[i]).sum();
            assert!(s.a <= -gaps.c1.unwrap() / 2.0 * hat_h + 1e-12);
        }
        let bar_only = problem(Nonlinearity::zero(), 2, 6, vec![]);
        let s = bar_only.energy_split(&unit(6, 2)).unwrap();
        assert_eq!((s.a, s.b, s.c, s.d), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn vanishing_log_c_increases_along_resonant_ray() {
        let p = problem(Nonlinearity::builtin(Builtin::VanishingLog), 2, 8, vec![]);
        let cs: Vec<f64> = [1.0, 10.0, 1e2, 1e3, 1e4, 1e5]
            .iter()
            .map(|&t| {
                let mut a = vec![0.0; 8];
                a[1] = t;
                p.energy_split(&a).unwrap().c
            })
            .collect();
        assert!(cs.windows(2).all(|w| w[1] > w[0]), "{cs:?}");
    }

    #[test]
    fn residual_of_exact_linear_solution() {
        let mut f = vec![0.0; 8];
        f[0] = 2.0;
        let p = problem(Nonlinearity::zero(), 2, 8, f);
        let r = p.newton_solve(&vec![0.0; 8], &SolverSettings::default()).unwrap();
        let w = p.weak_residual(&r.coeffs, 16).unwrap();
        assert!(w.components.iter().all(|c| c.abs() < 1e-12));
        assert!(matches!(p.weak_residual(&r.coeffs, 4), Err(SolverError::TestBasisTooSmall { .. })));
    }

    #[test]
    fn length_checks() {
        let p = problem(Nonlinearity::zero(), 2, 8, vec![]);
        assert!(matches!(p.energy(&[0.0; 3]), Err(SolverError::LengthMismatch { .. })));
        assert!(matches!(p.newton_solve(&[0.0; 9], &SolverSettings::default()), Err(SolverError::LengthMismatch { .. })));
    }

    #[test]
    fn multi_start_is_deterministic() {
        let p = problem(Nonlinearity::builtin(Builtin::ArctanCos { c: 3.0 }), 2, 12, vec![0.1, 0.0, 0.3]);
        let s = SolverSettings::default();
        let a = p.multi_start(Some(ScCase::Plus), &s).unwrap();
        let b = p.multi_start(Some(ScCase::Plus), &s).unwrap();
        assert_eq!(a, b);
        assert!(a.solutions.windows(2).all(|w| w[0].energy <= w[1].energy));
    }
}
