//! Data-driven distributionally robust optimization over density confidence bands.
//!
//! The library builds ambiguity sets from i.i.d. samples as confidence bands
//! `(l, u)` around the unknown density, either shape-restricted (unimodal,
//! univariate) or KDE-based (multivariate), and minimizes the worst-case
//! expected cost over all densities trapped between the band functions. The
//! inner supremum is folded into a one-dimensional dual variable and the
//! resulting convex program is solved by projected stochastic subgradient
//! descent with weighted iterate averaging.
//!
//! Module map:
//! - [`band`]: band construction ([`band::sr`] shape-restricted, [`band::kde`]
//!   kernel-based) and the common evaluation surface.
//! - [`lp`]: the dense bounded-variable simplex solver backing the per-point
//!   band programs.
//! - [`dro`]: dual objective, stochastic subgradients and the SGD loop.
//! - [`oracle`]: independent discretized evaluation of the inner supremum,
//!   used as ground truth in tests.
//! - [`problems`]: newsvendor and CVaR portfolio cost models plus synthetic
//!   data generators.
//! - [`experiments`]: the holdout-validation / multi-trial out-of-sample
//!   protocol.

pub mod band;
pub mod dro;
mod error;
pub mod experiments;
pub mod geom;
pub mod lp;
pub mod oracle;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod sample;
pub mod scalar;

pub use error::{Error, Result};
pub use problem::Problem;
pub use rng::SeedStream;
pub use sample::SampleSet;
pub use scalar::Real;

/// Concrete `f64` instantiations of the scalar-generic kernels. Everything in
/// the statistical layers works with these; the generic versions stay
/// available under their module paths for other scalar types.
pub type SupportBox = geom::SupportBox<f64>;
pub type LpProblem = lp::LpProblem<f64>;
pub type LpSolution = lp::LpSolution<f64>;
