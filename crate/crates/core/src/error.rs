use thiserror::Error;

use crate::model::{ProviderId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {}", join(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("unknown provider {0}")]
    UnknownProvider(ProviderId),

    #[error("oracle grid has {states} states, limit is {limit}")]
    GridTooLarge { states: u128, limit: u128 },

    #[error("grid step must be positive, got {0}")]
    InvalidGridStep(f64),

    #[error("explicit order {given:?} is not a permutation of the surplus set {expected:?}")]
    InvalidExplicitOrder {
        given: Vec<ProviderId>,
        expected: Vec<ProviderId>,
    },

    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),

    #[error("coalition must contain at least one provider")]
    EmptyCoalition,

    #[error("{count} providers exceeds the coalition enumeration cap of {max}")]
    TooManyProviders { count: usize, max: usize },

    #[error("{count} surplus providers exceeds the exhaustive order cap of {max}")]
    TooManySurplusProviders { count: usize, max: usize },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid misreport factor {0}, factors must be positive and finite")]
    InvalidFactor(f64),

    #[error("malformed scenario json: {0}")]
    Json(#[from] serde_json::Error),
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
