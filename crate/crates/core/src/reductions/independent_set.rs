use std::collections::BTreeSet;

use num::BigRational;
use serde::{Deserialize, Serialize};

use crate::model::DeterministicMechanism;

use super::{rat, ratio, set_vec, ExactSetting, OutcomeLabel, ReducedInstance, ReductionError};

/// Simple undirected graph on vertices `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct Graph {
    n: usize,
    // normalized to i < j
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = ReductionError;
    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        let edges: Vec<(usize, usize)> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::new(raw.n, &edges)
    }
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        RawGraph { n: g.n, edges: g.edges.iter().map(|&(i, j)| [i, j]).collect() }
    }
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, ReductionError> {
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(ReductionError::Graph(format!("edge ({i}, {j}) has a vertex outside 1..={n}")));
            }
            if i == j {
                return Err(ReductionError::Graph(format!("self-loop at vertex {i}")));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(ReductionError::Graph(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Graph { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn is_independent(&self, s: &BTreeSet<usize>) -> bool {
        s.iter().all(|&v| v >= 1 && v <= self.n) && s.iter().all(|&i| s.iter().all(|&j| !self.has_edge(i, j)))
    }
}

/// `[2m(5n²+1) + 2(n−K) + 4K + 4(n²−2m−n)] / n²`
pub fn independent_set_goal(n: usize, m: usize, k: usize) -> BigRational {
    let (n, m, k) = (n as i64, m as i64, k as i64);
    let num = 2 * m * (5 * n * n + 1) + 2 * (n - k) + 4 * k + 4 * (n * n - 2 * m - n);
    ratio(num, n * n)
}

fn outcome_inventory(g: &Graph) -> Vec<OutcomeLabel> {
    let n = g.n;
    let mut out: Vec<OutcomeLabel> = (1..=n).map(|i| OutcomeLabel::High { i }).collect();
    out.extend((1..=n).map(|i| OutcomeLabel::Low { i }));
    for i in 1..=n {
        for j in 1..=n {
            if i != j && !g.has_edge(i, j) {
                out.push(OutcomeLabel::Pair { i, j });
            }
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            if i != j && g.has_edge(i, j) {
                out.push(OutcomeLabel::EdgeFirst { i, j });
                out.push(OutcomeLabel::EdgeSecond { i, j });
            }
        }
    }
    out
}

// Agent 1's utility depends only on whether the outcome's first index is its
// own type; agent 2's only on the second index.
fn utility(agent: usize, own: usize, label: OutcomeLabel, big: i64) -> i64 {
    let (first, second) = match label {
        OutcomeLabel::High { i } | OutcomeLabel::Low { i } => (i, i),
        OutcomeLabel::Pair { i, j } | OutcomeLabel::EdgeFirst { i, j } | OutcomeLabel::EdgeSecond { i, j } => (i, j),
        _ => unreachable!("not an independent-set outcome"),
    };
    let matches = if agent == 0 { first == own } else { second == own };
    match label {
        OutcomeLabel::High { .. } => 2,
        _ if !matches => -big,
        OutcomeLabel::Low { .. } => 1,
        OutcomeLabel::Pair { .. } => 2,
        OutcomeLabel::EdgeFirst { .. } => {
            if agent == 0 {
                big
            } else {
                1
            }
        }
        OutcomeLabel::EdgeSecond { .. } => {
            if agent == 0 {
                1
            } else {
                big
            }
        }
        _ => unreachable!(),
    }
}

/// Two agents with `n` uniform types each; the goal is reachable by a
/// dominant-strategy truthful deterministic mechanism iff the graph has an
/// independent set of size `k`.
pub fn reduce_independent_set(g: &Graph, k: usize) -> Result<ReducedInstance, ReductionError> {
    let n = g.n;
    if k < 1 || k > n {
        return Err(ReductionError::TargetOutOfRange { k, n });
    }
    let big = 5 * (n as i64) * (n as i64);
    let labels = outcome_inventory(g);
    let utility_tables = (0..2)
        .map(|agent| (1..=n).map(|own| labels.iter().map(|&l| rat(utility(agent, own, l, big))).collect()).collect())
        .collect();
    let uniform: Vec<BigRational> = (0..n).map(|_| ratio(1, n as i64)).collect();
    let exact = ExactSetting::new(vec![uniform.clone(), uniform], utility_tables, independent_set_goal(n, g.m(), k));
    let names = |agent: usize| (1..=n).map(|i| format!("theta_{i}^{agent}")).collect();
    ReducedInstance::build(labels, n, [names(1), names(2)], exact)
}

fn graph_of(inst: &ReducedInstance) -> (usize, impl Fn(usize, usize) -> bool + '_) {
    let n = inst.setting().space().num_types(0);
    let is_edge = move |i: usize, j: usize| inst.outcome_of(OutcomeLabel::EdgeFirst { i, j }).is_some();
    (n, is_edge)
}

/// The mechanism built from an independent set `s` (1-based vertices).
pub fn encode_mechanism_from_independent_set(
    inst: &ReducedInstance,
    s: &BTreeSet<usize>,
) -> Result<DeterministicMechanism, ReductionError> {
    let (n, is_edge) = graph_of(inst);
    if let Some(&v) = s.iter().find(|&&v| v == 0 || v > n) {
        return Err(ReductionError::OutOfRange(v));
    }
    if s.iter().any(|&i| s.iter().any(|&j| is_edge(i, j))) {
        return Err(ReductionError::NotIndependent(set_vec(s)));
    }
    inst.mechanism(|a, b| {
        let (i, j) = (a + 1, b + 1);
        if i == j {
            if s.contains(&i) {
                OutcomeLabel::High { i }
            } else {
                OutcomeLabel::Low { i }
            }
        } else if !is_edge(i, j) {
            OutcomeLabel::Pair { i, j }
        } else if s.contains(&j) {
            OutcomeLabel::EdgeFirst { i, j }
        } else {
            OutcomeLabel::EdgeSecond { i, j }
        }
    })
}

/// `{ i : o(θ_i¹, θ_i²) is some o_kk^H }`.
///
/// Every high outcome is worth 2 to both agents whatever their types, so a
/// diagonal profile mapped to o_kk^H with k ≠ i scores exactly like o_ii^H.
/// Counting only o_ii^H would under-decode such mechanisms (the constant
/// o_11^H mechanism on an edgeless graph reaches G(n) but names one vertex).
pub fn decode_independent_set(inst: &ReducedInstance, mech: &DeterministicMechanism) -> BTreeSet<usize> {
    let space = inst.setting().space();
    let n = space.num_types(0);
    (1..=n)
        .filter(|&i| {
            let p = space.index(&[i - 1, i - 1]).expect("diagonal profile");
            matches!(inst.labels()[mech.outcome_at(p)], OutcomeLabel::High { .. })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Objective;
    use crate::verify::{check_dominant_strategies, expected_objective};

    fn triangle() -> Graph {
        Graph::new(3, &[(1, 2), (2, 3), (1, 3)]).unwrap()
    }

    #[test]
    fn malformed_graphs() {
        assert!(Graph::new(2, &[(1, 1)]).is_err());
        assert!(Graph::new(2, &[(1, 3)]).is_err());
        assert!(Graph::new(2, &[(1, 2), (2, 1)]).is_err());
        assert!(reduce_independent_set(&triangle(), 0).is_err());
        assert!(reduce_independent_set(&triangle(), 4).is_err());
    }

    #[test]
    fn triangle_instance_shape() {
        let inst = reduce_independent_set(&triangle(), 1).unwrap();
        let s = inst.setting();
        assert_eq!(s.num_outcomes(), 18);
        assert_eq!(s.space().num_types(0), 3);
        assert_eq!(s.space().num_types(1), 3);
        assert_eq!(inst.goal_exact(), &ratio(284, 9));
        let o12_1 = inst.outcome_of(OutcomeLabel::EdgeFirst { i: 1, j: 2 }).unwrap();
        let o12_2 = inst.outcome_of(OutcomeLabel::EdgeSecond { i: 1, j: 2 }).unwrap();
        assert_eq!(s.utility(0, 0, o12_1), 45.0);
        assert_eq!(s.utility(0, 0, o12_2), 1.0);
        assert_eq!(s.utility(1, 1, o12_2), 45.0);
        assert_eq!(s.utility(1, 1, o12_1), 1.0);
        assert_eq!(s.outcomes()[0], "o_1,1^H");
    }

    #[test]
    fn utility_bullets() {
        let g = Graph::new(3, &[(1, 2)]).unwrap();
        let inst = reduce_independent_set(&g, 1).unwrap();
        let s = inst.setting();
        let at = |l| inst.outcome_of(l).unwrap();
        let big = -45.0;
        // agent 1 with type 1
        assert_eq!(s.utility(0, 0, at(OutcomeLabel::High { i: 1 })), 2.0);
        assert_eq!(s.utility(0, 0, at(OutcomeLabel::High { i: 2 })), 2.0);
        assert_eq!(s.utility(0, 0, at(OutcomeLabel::Low { i: 1 })), 1.0);
        assert_eq!(s.utility(0, 0, at(OutcomeLabel::Low { i: 3 })), big);
        assert_eq!(s.utility(0, 0, at(OutcomeLabel::Pair { i: 1, j: 3 })), 2.0);
        assert_eq!(s.utility(0, 0, at(OutcomeLabel::Pair { i: 3, j: 1 })), big);
        assert_eq!(s.utility(0, 0, at(OutcomeLabel::EdgeFirst { i: 2, j: 1 })), big);
        assert_eq!(s.utility(0, 0, at(OutcomeLabel::EdgeSecond { i: 2, j: 1 })), big);
        // agent 2 with type 3
        assert_eq!(s.utility(1, 2, at(OutcomeLabel::Pair { i: 1, j: 3 })), 2.0);
        assert_eq!(s.utility(1, 2, at(OutcomeLabel::Pair { i: 3, j: 1 })), big);
        assert_eq!(s.utility(1, 2, at(OutcomeLabel::Low { i: 3 })), 1.0);
        assert_eq!(s.utility(1, 1, at(OutcomeLabel::EdgeFirst { i: 1, j: 2 })), 1.0);
        assert_eq!(s.utility(1, 1, at(OutcomeLabel::EdgeSecond { i: 1, j: 2 })), 45.0);
    }

    #[test]
    fn edgeless_pair_and_single_vertex() {
        let g = Graph::new(2, &[]).unwrap();
        let inst = reduce_independent_set(&g, 2).unwrap();
        assert_eq!(inst.setting().num_outcomes(), 6);
        assert!(inst
            .labels()
            .iter()
            .all(|l| !matches!(l, OutcomeLabel::EdgeFirst { .. } | OutcomeLabel::EdgeSecond { .. })));
        let s: BTreeSet<usize> = [1, 2].into();
        let mech = encode_mechanism_from_independent_set(&inst, &s).unwrap();
        assert_eq!(inst.exact().expected_welfare(&mech), rat(4));

        let one = reduce_independent_set(&Graph::new(1, &[]).unwrap(), 1).unwrap();
        assert_eq!(one.setting().num_outcomes(), 2);
        assert_eq!(one.goal_exact(), &rat(4));
    }

    #[test]
    fn forward_construction_on_triangle() {
        let inst = reduce_independent_set(&triangle(), 1).unwrap();
        let s: BTreeSet<usize> = [1].into();
        let mech = encode_mechanism_from_independent_set(&inst, &s).unwrap();
        assert_eq!(inst.exact().ds_violations(&mech), 0);
        assert!(check_dominant_strategies(inst.setting(), &mech).unwrap().is_empty());
        assert_eq!(inst.exact().expected_welfare(&mech), ratio(284, 9));
        let v = expected_objective(inst.setting(), &mech, &Objective::social_welfare()).unwrap();
        assert!((v - 284.0 / 9.0).abs() < 1e-9);
        assert_eq!(decode_independent_set(&inst, &mech), s);
    }

    #[test]
    fn empty_set_and_rejections() {
        let inst = reduce_independent_set(&triangle(), 1).unwrap();
        let mech = encode_mechanism_from_independent_set(&inst, &BTreeSet::new()).unwrap();
        assert_eq!(inst.exact().ds_violations(&mech), 0);
        assert!(decode_independent_set(&inst, &mech).is_empty());
        let pair: BTreeSet<usize> = [1, 2].into();
        assert!(matches!(encode_mechanism_from_independent_set(&inst, &pair), Err(ReductionError::NotIndependent(_))));
        let far: BTreeSet<usize> = [4].into();
        assert!(encode_mechanism_from_independent_set(&inst, &far).is_err());
    }

    #[test]
    fn all_low_diagonal_decodes_empty() {
        let inst = reduce_independent_set(&Graph::new(2, &[]).unwrap(), 1).unwrap();
        let mech = inst
            .mechanism(
                |a, b| if a == b { OutcomeLabel::Low { i: a + 1 } } else { OutcomeLabel::Pair { i: a + 1, j: b + 1 } },
            )
            .unwrap();
        assert!(decode_independent_set(&inst, &mech).is_empty());
    }

    #[test]
    fn foreign_high_outcome_counts_as_selected() {
        let inst = reduce_independent_set(&Graph::new(2, &[]).unwrap(), 2).unwrap();
        let mech = inst.mechanism(|_, _| OutcomeLabel::High { i: 1 }).unwrap();
        assert_eq!(inst.exact().ds_violations(&mech), 0);
        assert_eq!(&inst.exact().expected_welfare(&mech), inst.goal_exact());
        assert_eq!(decode_independent_set(&inst, &mech), [1, 2].into());
    }
}
