//! Resource sharing among mobile edge cloud (MEC) providers modelled as a
//! cooperative game with non-transferable utility.
//!
//! Each provider first serves its native applications from its own capacity
//! ([`subsolver::solve_single_provider`]). Providers left with unmet demand
//! form the deficit group, providers left with spare capacity form the surplus
//! group, and the surplus is then shared either in a fixed order
//! ([`gpoa::run_gpoa`]) or through a value-driven many-to-one matching
//! ([`ppmpoa::run_ppmpoa`]). The [`game`] module evaluates coalition values
//! and checks the resulting payoffs against the usual cooperative-game
//! properties (rationality, superadditivity, the core, truth-telling).
//!
//! ```
//! use coalition_share::{gpoa, scengen};
//!
//! let scenario = scengen::generate_scenario(&scengen::GenSpec::new(1, 42)).unwrap();
//! let result = gpoa::run_gpoa(&scenario, &gpoa::OrderingScheme::default()).unwrap();
//! assert!(result.allocation.check_feasibility(&scenario).is_empty());
//! ```

pub mod error;
pub mod game;
pub mod gpoa;
pub mod metrics;
pub mod model;
pub mod ppmpoa;
pub mod scengen;
pub mod sharing;
pub mod subsolver;

pub use error::{Error, Result};
pub use model::{
    AllocState, AllocationTensor, AppId, Application, CommCost, Provider, ProviderId,
    ResourceVector, Scenario, UtilitySpec, Violation,
};
