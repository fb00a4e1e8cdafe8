//! Reaction networks, their mass-action dynamics, and the naive
//! monomial-by-monomial realization of polynomial ODEs as abstract reactions.

mod network;
mod polynomial;

pub use network::{Reaction, ReactionNetwork, Species};
pub use polynomial::{Monomial, PolynomialOde};

use thiserror::Error;

/// Coefficients with magnitude below this are dropped during
/// canonicalization. Far below any coefficient appearing in the models
/// handled here (the smallest is of order 1e-4).
pub const COEFF_EPS: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum CrnError {
    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),
    #[error("unknown species `{species}` in {context}")]
    UnknownSpecies { species: String, context: String },
    #[error("non-positive rate constant {0}")]
    NonPositiveRate(f64),
    #[error("reaction {index} has empty reactant and product complexes")]
    EmptyReaction { index: usize },
    #[error("a network needs at least one species and one reaction")]
    EmptyNetwork,
    #[error("negative concentration {value} for species `{species}`")]
    NegativeConcentration { species: String, value: f64 },
    #[error(
        "kinetic condition violated: monomial `{monomial}` in d[{species}]/dt \
         is negative but has no `{species}` factor, so it cannot model consumption"
    )]
    KineticCondition { species: String, monomial: String },
    #[error("state vector has length {got}, network has {expected} species")]
    DimensionMismatch { got: usize, expected: usize },
}
