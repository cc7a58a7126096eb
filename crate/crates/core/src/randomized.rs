//! Optimal randomized mechanisms by linear programming.
//!
//! One LP variable per (profile, outcome) pair holds the probability of that
//! outcome at that reported profile. Incentive constraints are linear in these
//! variables under both solution concepts, so the optimum is a single LP
//! solve. Constraint rows are emitted in a fixed order: agent, true type,
//! misreport, then others' profile, all ascending.

use thiserror::Error;

use crate::deterministic::best_within_budget;
use crate::linprog::{solve_lp_from, LinearProgram, LpError, LpStatus, Relation, SimplexOptions};
use crate::model::{Concept, ModelError, Objective, RandomizedMechanism, Setting, TOLERANCE};
use crate::verify::attains;

/// Bijection between LP columns and (profile index, outcome index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpIndexMap {
    num_profiles: usize,
    num_outcomes: usize,
}

impl LpIndexMap {
    pub fn new(setting: &Setting) -> Self {
        LpIndexMap { num_profiles: setting.num_profiles(), num_outcomes: setting.num_outcomes() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_profiles * self.num_outcomes
    }

    #[inline]
    pub fn var(&self, profile: usize, outcome: usize) -> usize {
        profile * self.num_outcomes + outcome
    }

    #[inline]
    pub fn pair(&self, var: usize) -> (usize, usize) {
        (var / self.num_outcomes, var % self.num_outcomes)
    }
}

/// Row counts of a generated LP, by family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LpShape {
    pub ic_rows: usize,
    pub normalization_rows: usize,
}

#[derive(Debug, Error)]
pub enum RandomizedError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("mechanism LP reported {0:?}; this should not happen for a well-formed setting")]
    ShouldNotHappen(LpStatus),
}

fn base_lp(setting: &Setting, objective: &Objective) -> Result<(LinearProgram, LpIndexMap), ModelError> {
    objective.check(setting)?;
    let map = LpIndexMap::new(setting);
    let mut lp = LinearProgram::new(map.num_vars());
    let mut c = vec![0.0; map.num_vars()];
    for p in 0..setting.num_profiles() {
        let w = setting.probability(p);
        for k in 0..setting.num_outcomes() {
            c[map.var(p, k)] = w * objective.value_at(setting, p, k);
        }
    }
    lp.set_objective(c);
    Ok((lp, map))
}

fn add_normalization(lp: &mut LinearProgram, setting: &Setting, map: &LpIndexMap) {
    for p in 0..setting.num_profiles() {
        let mut row = vec![0.0; map.num_vars()];
        for k in 0..setting.num_outcomes() {
            row[map.var(p, k)] = 1.0;
        }
        lp.add_row(row, Relation::Eq, 1.0);
    }
}

// Trivial (true = misreport) rows are kept for two agents so row counts match
// the closed forms |Θ¹|²|Θ²| + |Θ¹||Θ²|² and |Θ¹|² + |Θ²|².
fn emit_trivial(setting: &Setting) -> bool {
    setting.num_agents() <= 2
}

/// The dominant-strategy mechanism LP.
pub fn build_lp_ds(setting: &Setting, objective: &Objective) -> Result<(LinearProgram, LpIndexMap), ModelError> {
    build_lp_ds_with_shape(setting, objective).map(|(lp, map, _)| (lp, map))
}

pub fn build_lp_ds_with_shape(
    setting: &Setting,
    objective: &Objective,
) -> Result<(LinearProgram, LpIndexMap, LpShape), ModelError> {
    let (mut lp, map) = base_lp(setting, objective)?;
    let space = setting.space();
    let n_out = setting.num_outcomes();
    let mut shape = LpShape::default();
    for agent in 0..setting.num_agents() {
        let n_types = space.num_types(agent);
        for truth in 0..n_types {
            let util = &setting.agents()[agent].utility[truth];
            for lie in 0..n_types {
                if truth == lie && !emit_trivial(setting) {
                    continue;
                }
                for p in space.with_agent_type(agent, truth) {
                    let q = space.with_type(p, agent, lie);
                    let mut row = vec![0.0; map.num_vars()];
                    for k in 0..n_out {
                        row[map.var(p, k)] += util[k];
                        row[map.var(q, k)] -= util[k];
                    }
                    lp.add_row(row, Relation::Ge, 0.0);
                    shape.ic_rows += 1;
                }
            }
        }
    }
    add_normalization(&mut lp, setting, &map);
    shape.normalization_rows = setting.num_profiles();
    Ok((lp, map, shape))
}

/// The Bayes-Nash mechanism LP.
pub fn build_lp_bne(setting: &Setting, objective: &Objective) -> Result<(LinearProgram, LpIndexMap), ModelError> {
    build_lp_bne_with_shape(setting, objective).map(|(lp, map, _)| (lp, map))
}

pub fn build_lp_bne_with_shape(
    setting: &Setting,
    objective: &Objective,
) -> Result<(LinearProgram, LpIndexMap, LpShape), ModelError> {
    let (mut lp, map) = base_lp(setting, objective)?;
    let space = setting.space();
    let n_out = setting.num_outcomes();
    let mut shape = LpShape::default();
    for agent in 0..setting.num_agents() {
        let n_types = space.num_types(agent);
        for truth in 0..n_types {
            let util = &setting.agents()[agent].utility[truth];
            for lie in 0..n_types {
                if truth == lie && !emit_trivial(setting) {
                    continue;
                }
                let mut row = vec![0.0; map.num_vars()];
                for p in space.with_agent_type(agent, truth) {
                    let w = setting.conditional(agent, p);
                    if w == 0.0 {
                        continue;
                    }
                    let q = space.with_type(p, agent, lie);
                    for k in 0..n_out {
                        row[map.var(p, k)] += w * util[k];
                        row[map.var(q, k)] -= w * util[k];
                    }
                }
                lp.add_row(row, Relation::Ge, 0.0);
                shape.ic_rows += 1;
            }
        }
    }
    add_normalization(&mut lp, setting, &map);
    shape.normalization_rows = setting.num_profiles();
    Ok((lp, map, shape))
}

pub fn build_lp(
    setting: &Setting,
    concept: Concept,
    objective: &Objective,
) -> Result<(LinearProgram, LpIndexMap), ModelError> {
    match concept {
        Concept::DominantStrategy => build_lp_ds(setting, objective),
        Concept::BayesNash => build_lp_bne(setting, objective),
    }
}

/// A starting basis for a mechanism LP at the deterministic mechanism
/// `choices` (one outcome per profile): each normalization row gets the chosen
/// outcome's variable, each IC row its surplus. The basis is always
/// nonsingular, and feasible exactly when the mechanism is truthful.
pub fn deterministic_basis(lp: &LinearProgram, map: &LpIndexMap, choices: &[usize]) -> Vec<usize> {
    let mut surplus = lp.num_vars();
    lp.rows()
        .iter()
        .map(|row| match row.relation {
            Relation::Ge => {
                surplus += 1;
                surplus - 1
            }
            Relation::Eq => {
                let first = row.coeffs.iter().position(|&c| c != 0.0).unwrap_or(0);
                let p = map.pair(first).0;
                map.var(p, choices[p])
            }
        })
        .collect()
}

/// Node budget of the deterministic search that seeds the simplex. Bland's
/// rule is slow on these degenerate LPs and starting near the optimum helps
/// far more than any pivoting heuristic would.
const WARM_START_NODES: u64 = 200_000;

/// The outcome whose constant mechanism scores best; the simplex starts there.
fn best_constant(lp: &LinearProgram, map: &LpIndexMap) -> usize {
    let score = |k: usize| (0..map.num_profiles).map(|p| lp.objective()[map.var(p, k)]).sum::<f64>();
    (0..map.num_outcomes).fold(0, |best, k| if score(k) > score(best) { k } else { best })
}

#[derive(Debug, Clone)]
pub struct RandomizedSolution {
    pub mechanism: RandomizedMechanism,
    /// Optimal LP value, the mechanism's expected objective.
    pub value: f64,
    /// Set when the objective carries a goal.
    pub goal_attained: Option<bool>,
    pub pivots: usize,
}

/// Solve for an optimal truthful randomized mechanism.
pub fn solve_randomized(
    setting: &Setting,
    concept: Concept,
    objective: &Objective,
) -> Result<RandomizedSolution, RandomizedError> {
    let (lp, map) = build_lp(setting, concept, objective)?;
    let start = best_within_budget(setting, concept, objective, WARM_START_NODES)
        // constant mechanisms are truthful under either concept
        .unwrap_or_else(|| vec![best_constant(&lp, &map); map.num_profiles]);
    let start = deterministic_basis(&lp, &map, &start);
    let res = solve_lp_from(&lp, &start, SimplexOptions::default())?;
    let (Some(x), Some(value)) = (res.solution, res.value) else {
        return Err(RandomizedError::ShouldNotHappen(res.status));
    };
    let n_out = setting.num_outcomes();
    let dist: Vec<Vec<f64>> = (0..setting.num_profiles())
        .map(|p| {
            let mut row: Vec<f64> = (0..n_out)
                .map(|k| {
                    let v = x[map.var(p, k)];
                    if (-TOLERANCE..0.0).contains(&v) {
                        0.0
                    } else {
                        v
                    }
                })
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            row
        })
        .collect();
    let mechanism = RandomizedMechanism::new(setting, dist)?;
    Ok(RandomizedSolution {
        mechanism,
        value,
        goal_attained: objective.goal.map(|g| attains(value, g)),
        pivots: res.pivots,
    })
}
