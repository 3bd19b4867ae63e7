//! Moduli of continuity and the integral inequalities built on them.

mod bounds;
mod modulus;
mod quadrature;

pub use bounds::{
    bihari_bound, bihari_transform, divergence_ladder, divergence_test, gronwall_bound, linear_envelope, Divergence,
    DivergenceLadder, LADDER_START,
};
pub use modulus::Modulus;
pub use quadrature::integrate;
