//! Exact optimal deterministic mechanisms by pruned depth-first search.
//!
//! Profiles are assigned outcomes in lexicographic order. Within a profile,
//! outcomes are tried by descending objective contribution (ties by index),
//! and the first mechanism found with a given value is kept.
//!
//! Pruning:
//! * an admissible bound (current value plus the best possible contribution
//!   of every unassigned profile) against the incumbent, or against the goal
//!   in decision mode;
//! * dominant strategies: every IC pair whose two profiles are both assigned
//!   is checked as soon as the second one is;
//! * Bayes-Nash: a (agent, type, type) constraint group is checked once every
//!   profile it mentions is assigned.

use thiserror::Error;

use crate::model::{Concept, DeterministicMechanism, Mechanism, ModelError, Objective, Setting, TOLERANCE};
use crate::verify::{attains, bne_utilities, expected_objective};

pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Maximum number of (profile, outcome) assignments tried.
    pub node_budget: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { node_budget: DEFAULT_NODE_BUDGET }
    }
}

#[derive(Debug, Error)]
pub enum DeterministicError {
    #[error("node budget exceeded after exploring {explored} nodes")]
    BudgetExceeded { explored: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct DeterministicSolution {
    pub mechanism: DeterministicMechanism,
    pub value: f64,
    pub nodes: u64,
}

#[derive(Debug, Clone)]
pub struct Decision {
    pub attained: bool,
    /// A truthful mechanism reaching the goal, when `attained`.
    pub witness: Option<DeterministicMechanism>,
    pub value: Option<f64>,
    pub nodes: u64,
}

struct PartialView<'a> {
    choice: &'a [usize],
    num_outcomes: usize,
}

impl Mechanism for PartialView<'_> {
    fn num_profiles(&self) -> usize {
        self.choice.len()
    }
    fn num_outcomes(&self) -> usize {
        self.num_outcomes
    }
    fn expectation(&self, profile: usize, value: &dyn Fn(usize) -> f64) -> f64 {
        value(self.choice[profile])
    }
}

struct Search<'a> {
    setting: &'a Setting,
    concept: Concept,
    contrib: Vec<Vec<f64>>,
    order: Vec<Vec<usize>>,
    // suffix[p] = Σ_{q ≥ p} max_k contrib[q][k]
    suffix: Vec<f64>,
    // (agent, t, t') groups whose last profile is p
    bne_groups: Vec<Vec<(usize, usize, usize)>>,
    assign: Vec<usize>,
    nodes: u64,
    budget: u64,
    target: Option<f64>,
    best_value: f64,
    best: Option<Vec<usize>>,
}

impl<'a> Search<'a> {
    fn new(setting: &'a Setting, concept: Concept, objective: &Objective, budget: u64, target: Option<f64>) -> Self {
        let n_prof = setting.num_profiles();
        let n_out = setting.num_outcomes();
        let contrib: Vec<Vec<f64>> = (0..n_prof)
            .map(|p| {
                let w = setting.probability(p);
                (0..n_out).map(|k| w * objective.value_at(setting, p, k)).collect()
            })
            .collect();
        let order = contrib
            .iter()
            .map(|row| {
                let mut ks: Vec<usize> = (0..n_out).collect();
                ks.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                ks
            })
            .collect();
        let mut suffix = vec![0.0; n_prof + 1];
        for p in (0..n_prof).rev() {
            let m = contrib[p].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            suffix[p] = suffix[p + 1] + m;
        }
        let mut bne_groups = vec![Vec::new(); n_prof];
        if concept == Concept::BayesNash {
            let space = setting.space();
            for agent in 0..setting.num_agents() {
                let n_types = space.num_types(agent);
                for t in 0..n_types {
                    for u in (t + 1)..n_types {
                        let last =
                            space.with_agent_type(agent, t).chain(space.with_agent_type(agent, u)).max().unwrap_or(0);
                        bne_groups[last].push((agent, t, u));
                    }
                }
            }
        }
        Search {
            setting,
            concept,
            contrib,
            order,
            suffix,
            bne_groups,
            assign: vec![usize::MAX; n_prof],
            nodes: 0,
            budget,
            target,
            best_value: f64::NEG_INFINITY,
            best: None,
        }
    }

    fn ds_consistent(&self, p: usize, k: usize) -> bool {
        let s = self.setting;
        let space = s.space();
        for agent in 0..s.num_agents() {
            let own = space.type_of(p, agent);
            for other in 0..space.num_types(agent) {
                if other == own {
                    continue;
                }
                let q = space.with_type(p, agent, other);
                if q > p {
                    continue;
                }
                let kq = self.assign[q];
                if s.utility(agent, own, kq) - s.utility(agent, own, k) > TOLERANCE {
                    return false;
                }
                if s.utility(agent, other, k) - s.utility(agent, other, kq) > TOLERANCE {
                    return false;
                }
            }
        }
        true
    }

    fn bne_consistent(&self, p: usize) -> bool {
        let view = PartialView { choice: &self.assign, num_outcomes: self.setting.num_outcomes() };
        self.bne_groups[p].iter().all(|&(agent, t, u)| {
            let (truthful, deviation) = bne_utilities(self.setting, &view, agent, t, u);
            if deviation - truthful > TOLERANCE {
                return false;
            }
            let (truthful, deviation) = bne_utilities(self.setting, &view, agent, u, t);
            deviation - truthful <= TOLERANCE
        })
    }

    fn bound_fails(&self, bound: f64) -> bool {
        match self.target {
            Some(goal) => bound < goal - TOLERANCE,
            None => bound <= self.best_value + 1e-12 * (1.0 + self.best_value.abs()),
        }
    }

    /// Returns true once the search can stop (decision reached).
    fn dfs(&mut self, p: usize, value: f64) -> Result<bool, DeterministicError> {
        if p == self.assign.len() {
            match self.target {
                Some(goal) => {
                    if attains(value, goal) {
                        self.best_value = value;
                        self.best = Some(self.assign.clone());
                        return Ok(true);
                    }
                }
                None => {
                    if self.best.is_none() || value > self.best_value + 1e-12 * (1.0 + self.best_value.abs()) {
                        self.best_value = value;
                        self.best = Some(self.assign.clone());
                    }
                }
            }
            return Ok(false);
        }
        for i in 0..self.order[p].len() {
            let k = self.order[p][i];
            let next = value + self.contrib[p][k];
            // outcomes are sorted by contribution, so once one fails the rest do too
            if (self.best.is_some() || self.target.is_some()) && self.bound_fails(next + self.suffix[p + 1]) {
                break;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(DeterministicError::BudgetExceeded { explored: self.budget });
            }
            if self.concept == Concept::DominantStrategy && !self.ds_consistent(p, k) {
                continue;
            }
            self.assign[p] = k;
            if self.concept == Concept::BayesNash && !self.bne_consistent(p) {
                continue;
            }
            if self.dfs(p + 1, next)? {
                return Ok(true);
            }
        }
        self.assign[p] = usize::MAX;
        Ok(false)
    }
}

fn finish(
    setting: &Setting,
    objective: &Objective,
    choice: Vec<usize>,
) -> Result<(DeterministicMechanism, f64), ModelError> {
    let mechanism = DeterministicMechanism::new(setting, choice)?;
    let value = expected_objective(setting, &mechanism, objective)?;
    Ok((mechanism, value))
}

/// An optimal truthful deterministic mechanism under `concept`.
pub fn solve_deterministic(
    setting: &Setting,
    concept: Concept,
    objective: &Objective,
    opts: SearchOptions,
) -> Result<DeterministicSolution, DeterministicError> {
    objective.check(setting)?;
    let mut search = Search::new(setting, concept, objective, opts.node_budget, None);
    search.dfs(0, 0.0)?;
    // constant mechanisms are always truthful, so the search always finds one
    let choice = search.best.take().expect("feasible set contains the constant mechanisms");
    let (mechanism, value) = finish(setting, objective, choice)?;
    Ok(DeterministicSolution { mechanism, value, nodes: search.nodes })
}

/// The best truthful outcome assignment found within `node_budget`, optimal
/// or not. Used to seed the LP solver.
pub(crate) fn best_within_budget(
    setting: &Setting,
    concept: Concept,
    objective: &Objective,
    node_budget: u64,
) -> Option<Vec<usize>> {
    objective.check(setting).ok()?;
    let mut search = Search::new(setting, concept, objective, node_budget, None);
    let _ = search.dfs(0, 0.0);
    search.best
}

/// Is there a truthful deterministic mechanism with expected objective ≥ goal − 1e-9?
pub fn decide_deterministic(
    setting: &Setting,
    concept: Concept,
    objective: &Objective,
    goal: f64,
    opts: SearchOptions,
) -> Result<Decision, DeterministicError> {
    objective.check(setting)?;
    let mut search = Search::new(setting, concept, objective, opts.node_budget, Some(goal));
    let found = search.dfs(0, 0.0)?;
    if !found {
        return Ok(Decision { attained: false, witness: None, value: None, nodes: search.nodes });
    }
    let choice = search.best.take().expect("decision witness");
    let (mechanism, value) = finish(setting, objective, choice)?;
    Ok(Decision { attained: true, witness: Some(mechanism), value: Some(value), nodes: search.nodes })
}
