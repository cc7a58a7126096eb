//! Incentive-compatibility checks and expected-objective evaluation.
//!
//! Deterministic mechanisms are checked as degenerate lotteries, so one code
//! path serves both mechanism classes. IC inequalities are weak: a report is
//! a violation only when the deviation beats truthful reporting by more than
//! the tolerance.

use serde::Serialize;

use crate::model::{Concept, Mechanism, ModelError, Objective, Setting, TOLERANCE};

/// A witness that some agent gains by misreporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcViolation {
    pub agent: usize,
    pub true_type: usize,
    pub misreport: usize,
    /// Other agents' reported types; present only for dominant-strategy checks.
    pub others: Option<Vec<usize>>,
    pub truthful: f64,
    pub deviation: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub concept: Concept,
    pub violations: Vec<IcViolation>,
    pub expected_objective: f64,
    pub goal_attained: Option<bool>,
}

impl VerificationReport {
    pub fn is_truthful(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Serialize for Concept {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.short_name())
    }
}

fn check_shape<M: Mechanism + ?Sized>(setting: &Setting, mech: &M) -> Result<(), ModelError> {
    if mech.num_profiles() != setting.num_profiles() || mech.num_outcomes() != setting.num_outcomes() {
        return Err(ModelError::DimensionMismatch {
            profiles: setting.num_profiles(),
            outcomes: setting.num_outcomes(),
            found_profiles: mech.num_profiles(),
            found_outcomes: mech.num_outcomes(),
        });
    }
    Ok(())
}

/// Expected utility of `agent` with type `own_type` for the lottery at `profile`.
#[inline]
pub(crate) fn lottery_utility<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
    agent: usize,
    own_type: usize,
    profile: usize,
) -> f64 {
    let row = &setting.agents()[agent].utility[own_type];
    mech.expectation(profile, &|k| row[k])
}

/// Truthful and deviation utilities of `agent` at true profile `profile` when
/// it reports `misreport` instead, others' reports fixed.
pub fn ds_utilities<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
    agent: usize,
    profile: usize,
    misreport: usize,
) -> (f64, f64) {
    let own = setting.space().type_of(profile, agent);
    let lie = setting.space().with_type(profile, agent, misreport);
    (lottery_utility(setting, mech, agent, own, profile), lottery_utility(setting, mech, agent, own, lie))
}

/// Interim truthful and deviation utilities of `agent` with type `true_type`
/// reporting `misreport`, others truthful and weighted by the conditional prior.
pub fn bne_utilities<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
    agent: usize,
    true_type: usize,
    misreport: usize,
) -> (f64, f64) {
    let space = setting.space();
    let mut truthful = 0.0;
    let mut deviation = 0.0;
    for p in space.with_agent_type(agent, true_type) {
        let w = setting.conditional(agent, p);
        if w == 0.0 {
            continue;
        }
        truthful += w * lottery_utility(setting, mech, agent, true_type, p);
        let q = space.with_type(p, agent, misreport);
        deviation += w * lottery_utility(setting, mech, agent, true_type, q);
    }
    (truthful, deviation)
}

fn sort_violations(v: &mut [IcViolation]) {
    v.sort_by(|a, b| {
        (a.agent, a.true_type, a.misreport, &a.others).cmp(&(b.agent, b.true_type, b.misreport, &b.others))
    });
}

pub fn check_dominant_strategies<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
) -> Result<Vec<IcViolation>, ModelError> {
    check_dominant_strategies_tol(setting, mech, TOLERANCE)
}

/// Every (agent, true type, misreport, others' reports) where misreporting
/// gains more than `tol`. Zero-probability profiles are checked too.
pub fn check_dominant_strategies_tol<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
    tol: f64,
) -> Result<Vec<IcViolation>, ModelError> {
    check_shape(setting, mech)?;
    let space = setting.space();
    let mut out = Vec::new();
    for agent in 0..setting.num_agents() {
        let n_types = space.num_types(agent);
        for p in 0..space.len() {
            for misreport in 0..n_types {
                let own = space.type_of(p, agent);
                if misreport == own {
                    continue;
                }
                let (truthful, deviation) = ds_utilities(setting, mech, agent, p, misreport);
                let gap = deviation - truthful;
                if gap > tol {
                    out.push(IcViolation {
                        agent,
                        true_type: own,
                        misreport,
                        others: Some(space.others(p, agent)),
                        truthful,
                        deviation,
                        gap,
                    });
                }
            }
        }
    }
    sort_violations(&mut out);
    Ok(out)
}

pub fn check_bayes_nash<M: Mechanism + ?Sized>(setting: &Setting, mech: &M) -> Result<Vec<IcViolation>, ModelError> {
    check_bayes_nash_tol(setting, mech, TOLERANCE)
}

pub fn check_bayes_nash_tol<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
    tol: f64,
) -> Result<Vec<IcViolation>, ModelError> {
    check_shape(setting, mech)?;
    let mut out = Vec::new();
    for agent in 0..setting.num_agents() {
        let n_types = setting.space().num_types(agent);
        for true_type in 0..n_types {
            for misreport in 0..n_types {
                if misreport == true_type {
                    continue;
                }
                let (truthful, deviation) = bne_utilities(setting, mech, agent, true_type, misreport);
                let gap = deviation - truthful;
                if gap > tol {
                    out.push(IcViolation { agent, true_type, misreport, others: None, truthful, deviation, gap });
                }
            }
        }
    }
    sort_violations(&mut out);
    Ok(out)
}

pub fn check_concept<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
    concept: Concept,
    tol: f64,
) -> Result<Vec<IcViolation>, ModelError> {
    match concept {
        Concept::DominantStrategy => check_dominant_strategies_tol(setting, mech, tol),
        Concept::BayesNash => check_bayes_nash_tol(setting, mech, tol),
    }
}

/// E over profiles of E over the mechanism's lottery of g.
pub fn expected_objective<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
    objective: &Objective,
) -> Result<f64, ModelError> {
    check_shape(setting, mech)?;
    objective.check(setting)?;
    Ok((0..setting.num_profiles())
        .map(|p| {
            let w = setting.probability(p);
            if w == 0.0 {
                0.0
            } else {
                w * mech.expectation(p, &|k| objective.value_at(setting, p, k))
            }
        })
        .sum())
}

/// `value ≥ goal − 1e-9`.
pub fn attains(value: f64, goal: f64) -> bool {
    value >= goal - TOLERANCE
}

pub fn verify<M: Mechanism + ?Sized>(
    setting: &Setting,
    mech: &M,
    concept: Concept,
    objective: &Objective,
) -> Result<VerificationReport, ModelError> {
    let violations = check_concept(setting, mech, concept, TOLERANCE)?;
    let expected_objective = expected_objective(setting, mech, objective)?;
    Ok(VerificationReport {
        concept,
        violations,
        expected_objective,
        goal_attained: objective.goal.map(|g| attains(expected_objective, g)),
    })
}
