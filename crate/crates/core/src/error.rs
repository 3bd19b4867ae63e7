use thiserror::Error;

use crate::solver::PicardTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("non-finite values in {what} at {count} location(s), first: {first:?}")]
    NumericContamination {
        what: String,
        count: usize,
        /// (time index, path index) pairs, truncated to the first 32.
        first: Vec<(usize, usize)>,
    },

    #[error("integrand 1/rho is singular: rho({at}) = {value}")]
    SingularIntegrand { at: f64, value: f64 },

    #[error("target {target} is beyond the reachable range of the Bihari transform; achieved bracket [{lo}, {hi}]")]
    RangeOverflow { target: f64, lo: f64, hi: f64 },

    #[error("implicit step did not converge at time index {time_index} for {} path(s)", paths.len())]
    SolverDivergence { time_index: usize, paths: Vec<usize> },

    #[error("Picard iteration is not contracting on subinterval {subinterval}")]
    PicardDivergence {
        subinterval: usize,
        trace: Box<PicardTrace>,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contamination(what: impl Into<String>, locations: Vec<(usize, usize)>) -> Self {
        let count = locations.len();
        let mut first = locations;
        first.truncate(32);
        Error::NumericContamination {
            what: what.into(),
            count,
            first,
        }
    }
}
