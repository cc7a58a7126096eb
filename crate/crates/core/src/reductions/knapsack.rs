use std::collections::BTreeSet;

use num::BigRational;
use serde::{Deserialize, Serialize};

use crate::model::DeterministicMechanism;

use super::{rat, ratio, ExactSetting, OutcomeLabel, ReducedInstance, ReductionError};

/// Items `(weight, value)`, numbered from 1, with capacity C and value goal D.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawKnapsack", into = "RawKnapsack")]
pub struct KnapsackInstance {
    items: Vec<(u64, u64)>,
    capacity: u64,
    goal: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKnapsack {
    items: Vec<[u64; 2]>,
    capacity: u64,
    goal: u64,
}

impl TryFrom<RawKnapsack> for KnapsackInstance {
    type Error = ReductionError;
    fn try_from(raw: RawKnapsack) -> Result<Self, Self::Error> {
        KnapsackInstance::new(raw.items.iter().map(|it| (it[0], it[1])).collect(), raw.capacity, raw.goal)
    }
}

impl From<KnapsackInstance> for RawKnapsack {
    fn from(k: KnapsackInstance) -> Self {
        RawKnapsack { items: k.items.iter().map(|&(w, v)| [w, v]).collect(), capacity: k.capacity, goal: k.goal }
    }
}

impl KnapsackInstance {
    /// Zero weights are accepted here (the oracle handles them) but rejected
    /// by [`reduce_knapsack`].
    pub fn new(items: Vec<(u64, u64)>, capacity: u64, goal: u64) -> Result<Self, ReductionError> {
        if items.is_empty() {
            return Err(ReductionError::Knapsack("at least one item is required".into()));
        }
        if capacity == 0 {
            return Err(ReductionError::Knapsack("capacity must be positive".into()));
        }
        if goal == 0 {
            return Err(ReductionError::Knapsack("goal must be positive".into()));
        }
        Ok(KnapsackInstance { items, capacity, goal })
    }

    pub fn items(&self) -> &[(u64, u64)] {
        &self.items
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn goal(&self) -> u64 {
        self.goal
    }

    pub fn total_weight(&self) -> u64 {
        self.items.iter().map(|it| it.0).sum()
    }

    pub fn total_value(&self) -> u64 {
        self.items.iter().map(|it| it.1).sum()
    }

    fn check_subset(&self, s: &BTreeSet<usize>) -> Result<(u64, u64), ReductionError> {
        if let Some(&j) = s.iter().find(|&&j| j == 0 || j > self.items.len()) {
            return Err(ReductionError::OutOfRange(j));
        }
        let weight = s.iter().map(|&j| self.items[j - 1].0).sum();
        let value = s.iter().map(|&j| self.items[j - 1].1).sum();
        Ok((weight, value))
    }
}

/// `WV + (W + D)/2`
pub fn knapsack_goal(inst: &KnapsackInstance) -> BigRational {
    let (w, v, d) = (inst.total_weight() as i64, inst.total_value() as i64, inst.goal as i64);
    rat(w * v) + ratio(w + d, 2)
}

/// Expected welfare of the forward construction: `WV + (W + Σ_S v)/2`.
pub fn knapsack_welfare(inst: &KnapsackInstance, s: &BTreeSet<usize>) -> BigRational {
    let (w, v) = (inst.total_weight() as i64, inst.total_value() as i64);
    let sv: i64 = s.iter().map(|&j| inst.items[j - 1].1 as i64).sum();
    rat(w * v) + ratio(w + sv, 2)
}

/// Agent 1 has one type per item (probability w_j/W), agent 2 has two
/// equiprobable types; outcomes `o_1..o_m, o_{m+1}, o_{m+2}`.
pub fn reduce_knapsack(inst: &KnapsackInstance) -> Result<ReducedInstance, ReductionError> {
    if let Some(j) = inst.items.iter().position(|it| it.0 == 0) {
        return Err(ReductionError::ZeroWeight { item: j + 1 });
    }
    let m = inst.items.len();
    let w_total = inst.total_weight() as i64;
    let v_total = inst.total_value() as i64;
    let cap = inst.capacity as i64;
    let n_out = m + 2;

    let mut labels: Vec<OutcomeLabel> = (1..=m).map(|j| OutcomeLabel::Item { j }).collect();
    labels.push(OutcomeLabel::Unselected);
    labels.push(OutcomeLabel::Fallback);

    let agent1 = inst
        .items
        .iter()
        .enumerate()
        .map(|(j, &(w, v))| {
            let mut row = vec![rat(0); n_out];
            row[j] = ratio((v as i64 + w as i64) * w_total, w as i64);
            row[m + 1] = rat(-w_total);
            row
        })
        .collect();
    let mut low = vec![rat(0); n_out];
    low[m] = rat(w_total);
    low[m + 1] = rat(w_total - cap);
    let mut high = vec![rat(0); n_out];
    high[m + 1] = rat(w_total * (2 * v_total + 1));

    let priors =
        vec![inst.items.iter().map(|&(w, _)| ratio(w as i64, w_total)).collect(), vec![ratio(1, 2), ratio(1, 2)]];
    let exact = ExactSetting::new(priors, vec![agent1, vec![low, high]], knapsack_goal(inst));
    let names =
        [(1..=m).map(|j| format!("theta_{j}^1")).collect(), vec!["theta_1^2".to_string(), "theta_2^2".to_string()]];
    ReducedInstance::build(labels, m, names, exact)
}

/// The mechanism built from a feasible item set `s` (1-based items).
pub fn encode_mechanism_from_knapsack(
    reduced: &ReducedInstance,
    source: &KnapsackInstance,
    s: &BTreeSet<usize>,
) -> Result<DeterministicMechanism, ReductionError> {
    let (weight, _) = source.check_subset(s)?;
    if weight > source.capacity {
        return Err(ReductionError::Overweight { weight, capacity: source.capacity });
    }
    if reduced.setting().space().num_types(0) != source.items.len() {
        return Err(ReductionError::Knapsack(format!(
            "reduced instance has {} items, source has {}",
            reduced.setting().space().num_types(0),
            source.items.len()
        )));
    }
    reduced.mechanism(|a, b| {
        let j = a + 1;
        if b == 1 {
            OutcomeLabel::Fallback
        } else if s.contains(&j) {
            OutcomeLabel::Item { j }
        } else {
            OutcomeLabel::Unselected
        }
    })
}

/// `{ j : o(θ_j¹, θ_1²) = o_j }`
pub fn decode_knapsack(reduced: &ReducedInstance, mech: &DeterministicMechanism) -> BTreeSet<usize> {
    let space = reduced.setting().space();
    (1..=space.num_types(0))
        .filter(|&j| {
            let p = space.index(&[j - 1, 0]).expect("profile");
            reduced.outcome_of(OutcomeLabel::Item { j }) == Some(mech.outcome_at(p))
        })
        .collect()
}
