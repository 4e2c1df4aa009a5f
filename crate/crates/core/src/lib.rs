//! Numerical toolkit for semilinear Dirichlet problems at resonance,
//!
//! −Δu − λ_k u + g(u) = f,
//!
//! on intervals and rectangles: a closed-form sine eigenbasis, an
//! expression language for `g`, composite Gauss–Legendre quadrature,
//! Landesman–Lazer type condition checks and a spectral Galerkin solver.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod conditions;
pub mod expr;
pub mod linalg;
pub mod nonlinearity;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use conditions::{ConditionKind, ConditionSettings, ScCase, Verdict};
pub use nonlinearity::{AsymptoticSettings, Builtin};
pub use quadrature::{QuadratureSettings, Summation};
pub use scalar::Real;
pub use solver::{Method, SolverSettings};
pub use spectral::Part;

pub type Domain = spectral::Domain<f64>;
pub type EigenPair = spectral::EigenPair<f64>;
pub type SpectralDecomposition = spectral::SpectralDecomposition<f64>;
pub type CoefficientVector = spectral::CoefficientVector<f64>;
pub type Nonlinearity = nonlinearity::Nonlinearity<f64>;
pub type AsymptoticReport = nonlinearity::AsymptoticReport<f64>;
pub type QuadratureGrid = quadrature::QuadratureGrid<f64>;
pub type ResonantSpace = conditions::ResonantSpace<f64>;
pub type ConditionReport = conditions::ConditionReport<f64>;
pub type ConditionBundle = conditions::ConditionBundle<f64>;
pub type DirectionSample = conditions::DirectionSample<f64>;
pub type RayProfile = conditions::RayProfile<f64>;
pub type Problem = solver::GalerkinProblem<f64>;
pub type SolveResult = solver::SolveResult<f64>;
pub type MultiStart = solver::MultiStart<f64>;
pub type EnergySplit = solver::EnergySplit<f64>;
