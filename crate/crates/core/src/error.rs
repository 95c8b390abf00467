use alloc::string::String;
use alloc::vec::Vec;

use crate::dnm::SpecViolation;
use crate::network::StructureViolation;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid network structure ({} violation(s))", .0.len())]
    InvalidNetwork(Vec<StructureViolation>),

    #[error("invalid model specification ({} violation(s))", .0.len())]
    InvalidSpec(Vec<SpecViolation>),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("evidence has zero probability under the model")]
    InconsistentEvidence,

    #[error("joint state space too large to enumerate ({0} assignments)")]
    EnumerationTooLarge(u128),

    #[error("likelihood weight {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("multiplicative mixture is degenerate: every unnormalized entry is zero")]
    DegenerateMixture,

    #[error("cannot unroll {slices} slice(s): model needs lagged context of {max_lag}")]
    TooFewSlices { slices: usize, max_lag: usize },

    #[error("`{variable}` must be observed at slice {slice}")]
    MissingRequiredObservation { variable: String, slice: usize },

    #[error("estimation window for `{node}` is incomplete at period {period}")]
    IncompleteWindow { node: String, period: usize },

    #[error("quadratic likelihood has no extremum (leading coefficient is zero)")]
    NoExtremum,

    #[error("`{variable}` at t={t} already observed as `{existing}`, got `{new}`")]
    ObservationConflict {
        variable: String,
        t: usize,
        existing: String,
        new: String,
    },

    #[error("observation at t={t} skips ahead of session time {current:?}")]
    ObservationOutOfOrder { t: usize, current: Option<usize> },

    #[error("series has zero variance; autocorrelation is undefined")]
    ZeroVariance,

    #[error("series of length {len} is too short (need {required})")]
    SeriesTooShort { len: usize, required: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}
