//! Automated mechanism design without side payments.
//!
//! Given a preference aggregation [`Setting`](model::Setting), this crate
//! computes optimal truthful mechanisms under dominant-strategy or Bayes-Nash
//! implementation: randomized ones by linear programming
//! ([`randomized::solve_randomized`]) and deterministic ones by exact search
//! ([`deterministic::solve_deterministic`]). It also verifies incentive
//! compatibility of arbitrary mechanisms ([`verify`]) and generates
//! hardness-reduction instances from independent set and knapsack
//! ([`reductions`]).

pub mod deterministic;
pub mod io;
pub mod linprog;
pub mod model;
pub mod randomized;
pub mod reductions;
pub mod verify;

pub use model::{
    AgentSpec, AnyMechanism, Concept, DeterministicMechanism, Mechanism, Objective, ObjectiveKind, RandomizedMechanism,
    Setting, TypeProfile, TOLERANCE,
};
