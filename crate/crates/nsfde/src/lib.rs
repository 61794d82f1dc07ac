//! Numerical construction, simulation and growth-rate certification of
//! stochastic neutral functional differential equations
//!
//! The library works with scalar or vector equations of the form
//!
//! ```text
//! d(X(t) - D(X_t)) = f(X_t) dt + g(X_t) dB(t),      t >= 0,
//! X_0 = psi,
//! ```
//!
//! where `X_t` denotes the history segment `s -> X(t + s)` on `[-tau, 0]` and
//! `D`, `f`, `g` are functionals built from point delays, distributed delays
//! (finite signed measures) and windowed maximum terms.
//!
//! The crate is organised around the workflow
//!
//! 1. describe the delay structure ([`segment`], [`measure`], [`functional`]),
//! 2. decide solvability: either a global contraction on the neutral term or a
//!    decomposition into a pure-delay part plus a uniformly non-atomic part
//!    ([`functional::decompose`], [`functional::select_t1_alpha`]),
//! 3. construct paths by interval-chained Picard iteration driven by a
//!    deterministic counter-based Brownian sampler ([`brownian`], [`picard`],
//!    [`ensemble`]),
//! 4. certify exponential growth rates of `E|X(t)|^p` and of pathwise growth
//!    via characteristic equations and Volterra/renewal comparison arguments
//!    ([`volterra`], [`growth`]),
//! 5. produce refutation evidence for parameter regimes with no solution
//!    ([`counterexample`]).

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod brownian;
pub mod counterexample;
pub mod ensemble;
pub mod error;
pub mod functional;
pub mod growth;
pub mod measure;
pub mod picard;
pub mod rng;
pub mod segment;
pub mod volterra;

pub use brownian::BrownianPath;
pub use counterexample::{
    EpsilonCase, EpsilonWitness, MartingaleBoundReport, MovingAverageFamily, QvReport, QvVerdict,
};
pub use ensemble::{MomentPoint, NeutralProblem, PathEnsemble};
pub use error::{Error, Result};
pub use functional::{FunctionalSpec, NeutralDecomposition, PointMap, Term};
pub use growth::{GrowthBounds, RateCertificate};
pub use measure::{DelayMeasure, HalfLineMeasure};
pub use picard::SolutionPath;
pub use segment::Segment;
pub use volterra::{ResolventFunction, VolterraProblem};
