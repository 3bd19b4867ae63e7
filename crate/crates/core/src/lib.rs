//! Regression Monte Carlo solver and verification tools for multidimensional
//! BSDEs `y_t = ξ + ∫_t^T g(s, y_s, z_s) ds − ∫_t^T z_s dB_s` whose generators
//! satisfy a one-sided Osgood condition in `y`.

pub mod catalog;
pub mod conditions;
pub mod error;
pub mod generator;
pub mod inequalities;
pub mod norms;
pub mod numeric;
pub mod solver;
pub mod stability;
pub mod stochastic;
pub mod types;

pub use error::{Error, Result};
pub use generator::{Declared, FnGenerator, GProcess, Generator, GeneratorSpec, MaoDeclaration, Redeclared};
pub use inequalities::{Divergence, Modulus};
pub use numeric::Estimate;
pub use stochastic::{simulate_paths, PathBundle, RegressionBasis, TimeGrid};
pub use types::{BSDEProblem, Dimensions, SolutionField, TerminalSpec};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
