//! Hardness-reduction instance generators and their source-problem oracles.
//!
//! [`reduce_independent_set`] maps a graph and a target size to a 2-agent
//! dominant-strategy instance; [`reduce_knapsack`] maps a knapsack instance
//! to a 2-agent Bayes-Nash instance. In both, the goal is attainable by a
//! truthful deterministic mechanism iff the source instance is a yes-instance.
//! Each generator has a forward mechanism construction and a decoder back to
//! a source solution. All numbers are built as exact rationals first; the
//! floating-point [`Setting`] is derived from them.

use std::collections::{BTreeMap, BTreeSet};

use num::{BigInt, BigRational, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DeterministicMechanism, ModelError, Objective, Setting};

mod exact;
mod independent_set;
mod knapsack;
mod oracle;

pub use exact::ExactSetting;
pub use independent_set::{
    decode_independent_set, encode_mechanism_from_independent_set, independent_set_goal, reduce_independent_set, Graph,
};
pub use knapsack::{
    decode_knapsack, encode_mechanism_from_knapsack, knapsack_goal, knapsack_welfare, reduce_knapsack, KnapsackInstance,
};
pub use oracle::{
    brute_force_independent_set, brute_force_knapsack, IndependentSetAnswer, KnapsackAnswer, MAX_ORACLE_SIZE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("malformed graph: {0}")]
    Graph(String),
    #[error("malformed knapsack instance: {0}")]
    Knapsack(String),
    #[error(
        "item {item} has weight 0; the knapsack reduction needs every weight ≥ 1 (pack zero-weight items up front)"
    )]
    ZeroWeight { item: usize },
    #[error("target size K = {k} must satisfy 1 ≤ K ≤ n = {n}")]
    TargetOutOfRange { k: usize, n: usize },
    #[error("{0:?} is not an independent set of the graph")]
    NotIndependent(Vec<usize>),
    #[error("vertex or item {0} is out of range")]
    OutOfRange(usize),
    #[error("selected items weigh {weight}, over the capacity {capacity}")]
    Overweight { weight: u64, capacity: u64 },
    #[error("label sidecar: {0}")]
    Labels(String),
    #[error("oracle limited to {max} elements, instance has {size}")]
    TooLarge { size: usize, max: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Structured name of an outcome in a generated instance.
///
/// Vertex and item numbers are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OutcomeLabel {
    /// `o_ii^H`
    High { i: usize },
    /// `o_ii^L`
    Low { i: usize },
    /// `o_ij` for a non-edge
    Pair { i: usize, j: usize },
    /// `o_ij^1` for an edge
    EdgeFirst { i: usize, j: usize },
    /// `o_ij^2` for an edge
    EdgeSecond { i: usize, j: usize },
    /// `o_j`, item j granted
    Item { j: usize },
    /// `o_{m+1}`
    Unselected,
    /// `o_{m+2}`
    Fallback,
}

impl OutcomeLabel {
    fn name(&self, m: usize) -> String {
        match *self {
            OutcomeLabel::High { i } => format!("o_{i},{i}^H"),
            OutcomeLabel::Low { i } => format!("o_{i},{i}^L"),
            OutcomeLabel::Pair { i, j } => format!("o_{i},{j}"),
            OutcomeLabel::EdgeFirst { i, j } => format!("o_{i},{j}^1"),
            OutcomeLabel::EdgeSecond { i, j } => format!("o_{i},{j}^2"),
            OutcomeLabel::Item { j } => format!("o_{j}"),
            OutcomeLabel::Unselected => format!("o_{}", m + 1),
            OutcomeLabel::Fallback => format!("o_{}", m + 2),
        }
    }
}

/// A generated mechanism-design instance plus its exact data and labels.
#[derive(Debug, Clone)]
pub struct ReducedInstance {
    setting: Setting,
    objective: Objective,
    exact: ExactSetting,
    labels: Vec<OutcomeLabel>,
    index: BTreeMap<OutcomeLabel, usize>,
}

impl ReducedInstance {
    fn build(
        outcome_labels: Vec<OutcomeLabel>,
        name_param: usize,
        type_names: [Vec<String>; 2],
        exact: ExactSetting,
    ) -> Result<Self, ReductionError> {
        let outcomes = outcome_labels.iter().map(|l| l.name(name_param)).collect();
        let setting = exact.to_setting(outcomes, type_names).map_err(ModelError::from)?;
        let objective = Objective::social_welfare().with_goal(Some(to_f64(exact.goal())));
        let index = outcome_labels.iter().enumerate().map(|(k, l)| (*l, k)).collect();
        Ok(ReducedInstance { setting, objective, exact, labels: outcome_labels, index })
    }

    pub fn setting(&self) -> &Setting {
        &self.setting
    }

    /// Social welfare carrying the goal.
    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn goal(&self) -> f64 {
        self.objective.goal.expect("reduced instances carry a goal")
    }

    pub fn goal_exact(&self) -> &BigRational {
        self.exact.goal()
    }

    pub fn exact(&self) -> &ExactSetting {
        &self.exact
    }

    pub fn labels(&self) -> &[OutcomeLabel] {
        &self.labels
    }

    pub fn outcome_of(&self, label: OutcomeLabel) -> Option<usize> {
        self.index.get(&label).copied()
    }

    /// Sidecar map from outcome name to structured label.
    pub fn label_map(&self) -> BTreeMap<String, OutcomeLabel> {
        self.setting.outcomes().iter().cloned().zip(self.labels.iter().copied()).collect()
    }

    fn mechanism(&self, f: impl Fn(usize, usize) -> OutcomeLabel) -> Result<DeterministicMechanism, ReductionError> {
        let space = self.setting.space();
        let choice = (0..space.len())
            .map(|p| {
                let label = f(space.type_of(p, 0), space.type_of(p, 1));
                self.outcome_of(label).expect("construction only uses existing outcomes")
            })
            .collect();
        Ok(DeterministicMechanism::new(&self.setting, choice)?)
    }
}

pub(crate) fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub(crate) fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("finite rational")
}

fn set_vec(s: &BTreeSet<usize>) -> Vec<usize> {
    s.iter().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    IndependentSet,
    Knapsack,
}

/// Decode a mechanism on a setting read back from disk, using the label
/// sidecar in place of a [`ReducedInstance`]. Agrees with
/// [`decode_independent_set`] and [`decode_knapsack`].
pub fn decode_with_labels(
    setting: &Setting,
    labels: &BTreeMap<String, OutcomeLabel>,
    mech: &DeterministicMechanism,
) -> Result<(SourceKind, BTreeSet<usize>), ReductionError> {
    let by_index = setting
        .outcomes()
        .iter()
        .map(|name| {
            labels.get(name).copied().ok_or_else(|| ReductionError::Labels(format!("no label for outcome {name:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let graph_family =
        |l: &OutcomeLabel| !matches!(l, OutcomeLabel::Item { .. } | OutcomeLabel::Unselected | OutcomeLabel::Fallback);
    let kind = match (by_index.iter().all(graph_family), by_index.iter().any(graph_family)) {
        (true, _) => SourceKind::IndependentSet,
        (false, false) => SourceKind::Knapsack,
        _ => return Err(ReductionError::Labels("labels mix graph and knapsack outcomes".into())),
    };
    let space = setting.space();
    if space.num_agents() != 2 {
        return Err(ReductionError::Labels(format!("expected 2 agents, found {}", space.num_agents())));
    }
    let at = |a: usize, b: usize| by_index[mech.outcome_at(space.index(&[a, b]).expect("profile"))];
    let set = match kind {
        SourceKind::IndependentSet => {
            let n = space.num_types(0);
            if space.num_types(1) != n {
                return Err(ReductionError::Labels("agents need equally many types".into()));
            }
            (1..=n).filter(|&i| matches!(at(i - 1, i - 1), OutcomeLabel::High { .. })).collect()
        }
        SourceKind::Knapsack => {
            (1..=space.num_types(0)).filter(|&j| at(j - 1, 0) == OutcomeLabel::Item { j }).collect()
        }
    };
    Ok((kind, set))
}
