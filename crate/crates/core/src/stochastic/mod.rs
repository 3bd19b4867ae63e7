//! Brownian paths on time grids and least-squares conditional expectations.

mod grid;
mod paths;
mod regression;

pub use grid::TimeGrid;
pub use paths::{simulate_paths, PathBundle};
pub use regression::{
    conditional_expectation, BasisKind, ConditionalExpectation, Design, RegressionBasis, RegressionFit, DEFAULT_RIDGE,
};
