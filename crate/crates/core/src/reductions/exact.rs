use num::{BigRational, Zero};

use crate::model::{AgentSpec, DeterministicMechanism, ProfileSpace, Setting, ValidationError};

use super::to_f64;

/// Rational-valued twin of a [`Setting`] with independent priors, used to
/// check the reductions' claims without rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSetting {
    priors: Vec<Vec<BigRational>>,
    // [agent][type][outcome]
    utility: Vec<Vec<Vec<BigRational>>>,
    goal: BigRational,
    space: ProfileSpace,
}

impl ExactSetting {
    pub(crate) fn new(priors: Vec<Vec<BigRational>>, utility: Vec<Vec<Vec<BigRational>>>, goal: BigRational) -> Self {
        let space = ProfileSpace::new(priors.iter().map(Vec::len).collect());
        ExactSetting { priors, utility, goal, space }
    }

    pub fn goal(&self) -> &BigRational {
        &self.goal
    }

    pub fn priors(&self) -> &[Vec<BigRational>] {
        &self.priors
    }

    pub fn utility(&self, agent: usize, own_type: usize, outcome: usize) -> &BigRational {
        &self.utility[agent][own_type][outcome]
    }

    pub(crate) fn to_setting(
        &self,
        outcomes: Vec<String>,
        type_names: [Vec<String>; 2],
    ) -> Result<Setting, ValidationError> {
        let agents = type_names
            .into_iter()
            .enumerate()
            .map(|(a, types)| {
                AgentSpec::new(
                    types,
                    self.priors[a].iter().map(to_f64).collect(),
                    self.utility[a].iter().map(|row| row.iter().map(to_f64).collect()).collect(),
                )
            })
            .collect();
        Setting::new(outcomes, agents, None)
    }

    fn probability(&self, idx: usize) -> BigRational {
        (0..self.priors.len())
            .map(|a| self.priors[a][self.space.type_of(idx, a)].clone())
            .fold(BigRational::from_integer(1.into()), |acc, p| acc * p)
    }

    fn others_probability(&self, agent: usize, idx: usize) -> BigRational {
        (0..self.priors.len())
            .filter(|&a| a != agent)
            .map(|a| self.priors[a][self.space.type_of(idx, a)].clone())
            .fold(BigRational::from_integer(1.into()), |acc, p| acc * p)
    }

    /// Expected social welfare of a deterministic mechanism, exactly.
    pub fn expected_welfare(&self, mech: &DeterministicMechanism) -> BigRational {
        let mut total = BigRational::zero();
        for p in 0..self.space.len() {
            let k = mech.outcome_at(p);
            let mut welfare = BigRational::zero();
            for a in 0..self.priors.len() {
                welfare += &self.utility[a][self.space.type_of(p, a)][k];
            }
            total += self.probability(p) * welfare;
        }
        total
    }

    /// Number of strict dominant-strategy violations, in exact arithmetic.
    pub fn ds_violations(&self, mech: &DeterministicMechanism) -> usize {
        let mut count = 0;
        for agent in 0..self.priors.len() {
            for p in 0..self.space.len() {
                let own = self.space.type_of(p, agent);
                let truthful = &self.utility[agent][own][mech.outcome_at(p)];
                for lie in 0..self.space.num_types(agent) {
                    let q = self.space.with_type(p, agent, lie);
                    if &self.utility[agent][own][mech.outcome_at(q)] > truthful {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    /// Number of strict Bayes-Nash violations, in exact arithmetic.
    pub fn bne_violations(&self, mech: &DeterministicMechanism) -> usize {
        let mut count = 0;
        for agent in 0..self.priors.len() {
            let n_types = self.space.num_types(agent);
            for truth in 0..n_types {
                for lie in 0..n_types {
                    let mut truthful = BigRational::zero();
                    let mut deviation = BigRational::zero();
                    for p in self.space.with_agent_type(agent, truth) {
                        let w = self.others_probability(agent, p);
                        let q = self.space.with_type(p, agent, lie);
                        truthful += &w * &self.utility[agent][truth][mech.outcome_at(p)];
                        deviation += &w * &self.utility[agent][truth][mech.outcome_at(q)];
                    }
                    if deviation > truthful {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}
