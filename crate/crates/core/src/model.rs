//! Preference aggregation settings, mechanisms and objectives.
//!
//! A [`Setting`] bundles the outcome set, each agent's type set, prior and
//! utility table, and optionally a joint prior over full type profiles.
//! Everything downstream addresses profiles by a mixed-radix index (agent 0
//! is the most significant digit), so iterating `0..len` visits profiles in
//! lexicographic order.

use thiserror::Error;

/// Absolute tolerance for probability sums, IC gaps and goal comparisons.
pub const TOLERANCE: f64 = 1e-9;

/// One type index per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeProfile(pub Vec<usize>);

impl TypeProfile {
    pub fn new(indices: Vec<usize>) -> Self {
        TypeProfile(indices)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for TypeProfile {
    fn from(v: Vec<usize>) -> Self {
        TypeProfile(v)
    }
}

/// A validation failure listing every violated invariant.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid setting ({} violation(s)):\n  {}", .violations.len(), .violations.join("\n  "))]
pub struct ValidationError {
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("type profile {0:?} is not valid for this setting")]
    BadProfile(Vec<usize>),
    #[error("outcome index {index} out of range ({count} outcomes)")]
    BadOutcome { index: usize, count: usize },
    #[error("agent index {index} out of range ({count} agents)")]
    BadAgent { index: usize, count: usize },
    #[error("type index {index} out of range for agent {agent}")]
    BadType { agent: usize, index: usize },
    #[error("mechanism shape {found_profiles}x{found_outcomes} does not match setting {profiles}x{outcomes}")]
    DimensionMismatch { profiles: usize, outcomes: usize, found_profiles: usize, found_outcomes: usize },
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Mixed-radix addressing of the cartesian product of type sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl ProfileSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = vec![1; sizes.len()];
        let mut acc = 1usize;
        for i in (0..sizes.len()).rev() {
            strides[i] = acc;
            acc = acc.saturating_mul(sizes[i]);
        }
        ProfileSpace { sizes, strides, len: acc }
    }

    /// Number of full type profiles.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_types(&self, agent: usize) -> usize {
        self.sizes[agent]
    }

    pub fn index(&self, types: &[usize]) -> Option<usize> {
        if types.len() != self.sizes.len() {
            return None;
        }
        let mut idx = 0;
        for (i, &t) in types.iter().enumerate() {
            if t >= self.sizes[i] {
                return None;
            }
            idx += t * self.strides[i];
        }
        Some(idx)
    }

    pub fn profile(&self, idx: usize) -> TypeProfile {
        TypeProfile((0..self.sizes.len()).map(|a| self.type_of(idx, a)).collect())
    }

    #[inline]
    pub fn type_of(&self, idx: usize, agent: usize) -> usize {
        (idx / self.strides[agent]) % self.sizes[agent]
    }

    /// The profile obtained by replacing `agent`'s coordinate with `t`.
    #[inline]
    pub fn with_type(&self, idx: usize, agent: usize, t: usize) -> usize {
        let s = self.strides[agent];
        idx - self.type_of(idx, agent) * s + t * s
    }

    /// Ascending indices of all profiles whose `agent` coordinate equals `t`.
    pub fn with_agent_type(&self, agent: usize, t: usize) -> impl Iterator<Item = usize> + '_ {
        let stride = self.strides[agent];
        let block = stride * self.sizes[agent];
        let blocks = self.len.checked_div(block).unwrap_or(0);
        (0..blocks).flat_map(move |b| (0..stride).map(move |inner| b * block + t * stride + inner))
    }

    /// The other agents' coordinates of a profile, in agent order.
    pub fn others(&self, idx: usize, agent: usize) -> Vec<usize> {
        (0..self.sizes.len()).filter(|&a| a != agent).map(|a| self.type_of(idx, a)).collect()
    }

    /// Reassemble a full profile index from an agent's own type and the rest.
    pub fn from_others(&self, agent: usize, own: usize, others: &[usize]) -> Option<usize> {
        if others.len() + 1 != self.sizes.len() {
            return None;
        }
        let mut full = Vec::with_capacity(self.sizes.len());
        full.extend_from_slice(&others[..agent]);
        full.push(own);
        full.extend_from_slice(&others[agent..]);
        self.index(&full)
    }
}

/// One agent: its type set, independent prior and utility table `[type][outcome]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub types: Vec<String>,
    pub prior: Vec<f64>,
    pub utility: Vec<Vec<f64>>,
}

impl AgentSpec {
    pub fn new(types: Vec<String>, prior: Vec<f64>, utility: Vec<Vec<f64>>) -> Self {
        AgentSpec { types, prior, utility }
    }
}

/// A validated preference aggregation setting. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    outcomes: Vec<String>,
    agents: Vec<AgentSpec>,
    joint_prior: Option<Vec<f64>>,
    space: ProfileSpace,
    profile_probs: Vec<f64>,
    // cond[agent][profile] = P(others' part of profile | agent's own type)
    cond: Vec<Vec<f64>>,
}

fn check_distribution(label: &str, probs: &[f64], out: &mut Vec<String>) {
    let mut bad = false;
    for (k, &p) in probs.iter().enumerate() {
        if !p.is_finite() {
            out.push(format!("{label}[{k}] is not a finite number"));
            bad = true;
        } else if p < 0.0 {
            out.push(format!("{label}[{k}] is negative ({p})"));
            bad = true;
        }
    }
    if !bad {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > TOLERANCE {
            out.push(format!("{label} sums to {}, expected 1", round_sig(sum, 12)));
        }
    }
}

/// Round to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

impl Setting {
    /// Validate and build a setting. `joint_prior`, when given, is dense over
    /// profile indices and replaces the independent priors.
    pub fn new(
        outcomes: Vec<String>,
        agents: Vec<AgentSpec>,
        joint_prior: Option<Vec<f64>>,
    ) -> Result<Self, ValidationError> {
        let mut violations = Vec::new();
        if outcomes.is_empty() {
            violations.push("outcomes: at least one outcome is required".to_string());
        }
        if agents.is_empty() {
            violations.push("agents: at least one agent is required".to_string());
        }
        let n_out = outcomes.len();
        for (a, agent) in agents.iter().enumerate() {
            let who = format!("agents[{a}]");
            if agent.types.is_empty() {
                violations.push(format!("{who}.types: at least one type is required"));
            }
            if joint_prior.is_none() {
                if agent.prior.len() != agent.types.len() {
                    violations.push(format!(
                        "{who}.prior has {} entries but there are {} types",
                        agent.prior.len(),
                        agent.types.len()
                    ));
                } else if !agent.types.is_empty() {
                    check_distribution(&format!("{who}.prior"), &agent.prior, &mut violations);
                }
            }
            if agent.utility.len() != agent.types.len() {
                violations.push(format!(
                    "{who}.utility has {} rows but there are {} types",
                    agent.utility.len(),
                    agent.types.len()
                ));
            }
            for (t, row) in agent.utility.iter().enumerate() {
                let tname = agent.types.get(t).map(String::as_str).unwrap_or("?");
                for (o, oname) in outcomes.iter().enumerate().skip(row.len()) {
                    violations.push(format!(
                        "{who}.utility[{t}][{o}] missing: no value for (agent {}, type {:?}, outcome {:?})",
                        a + 1,
                        tname,
                        oname
                    ));
                }
                if row.len() > n_out {
                    violations
                        .push(format!("{who}.utility[{t}] has {} entries but there are {n_out} outcomes", row.len()));
                }
                for (o, u) in row.iter().enumerate() {
                    if !u.is_finite() {
                        violations.push(format!("{who}.utility[{t}][{o}] is not a finite number"));
                    }
                }
            }
        }

        let space = ProfileSpace::new(agents.iter().map(|a| a.types.len()).collect());
        if let Some(joint) = &joint_prior {
            if joint.len() != space.len() {
                violations.push(format!(
                    "joint_prior has {} entries but there are {} type profiles",
                    joint.len(),
                    space.len()
                ));
            } else {
                check_distribution("joint_prior", joint, &mut violations);
            }
        }
        if !violations.is_empty() {
            return Err(ValidationError { violations });
        }

        let profile_probs: Vec<f64> = match &joint_prior {
            Some(joint) => joint.clone(),
            None => (0..space.len())
                .map(|p| agents.iter().enumerate().map(|(a, ag)| ag.prior[space.type_of(p, a)]).product())
                .collect(),
        };
        let cond = (0..agents.len())
            .map(|a| match &joint_prior {
                None => (0..space.len())
                    .map(|p| {
                        agents
                            .iter()
                            .enumerate()
                            .filter(|&(b, _)| b != a)
                            .map(|(b, ag)| ag.prior[space.type_of(p, b)])
                            .product()
                    })
                    .collect(),
                Some(joint) => {
                    let mut marginal = vec![0.0; agents[a].types.len()];
                    for (p, &q) in joint.iter().enumerate() {
                        marginal[space.type_of(p, a)] += q;
                    }
                    (0..space.len())
                        .map(|p| {
                            let m = marginal[space.type_of(p, a)];
                            if m > 0.0 {
                                joint[p] / m
                            } else {
                                0.0
                            }
                        })
                        .collect()
                }
            })
            .collect();

        Ok(Setting { outcomes, agents, joint_prior, space, profile_probs, cond })
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn joint_prior(&self) -> Option<&[f64]> {
        self.joint_prior.as_deref()
    }

    pub fn space(&self) -> &ProfileSpace {
        &self.space
    }

    pub fn num_profiles(&self) -> usize {
        self.space.len()
    }

    #[inline]
    pub fn utility(&self, agent: usize, own_type: usize, outcome: usize) -> f64 {
        self.agents[agent].utility[own_type][outcome]
    }

    /// Prior probability of the profile at `idx`.
    #[inline]
    pub fn probability(&self, idx: usize) -> f64 {
        self.profile_probs[idx]
    }

    /// P(others' part of profile `idx` | `agent` has its type in `idx`).
    #[inline]
    pub fn conditional(&self, agent: usize, idx: usize) -> f64 {
        self.cond[agent][idx]
    }

    pub fn check_profile(&self, profile: &TypeProfile) -> Result<usize, ModelError> {
        self.space.index(profile.as_slice()).ok_or_else(|| ModelError::BadProfile(profile.0.clone()))
    }

    pub fn check_outcome(&self, outcome: usize) -> Result<(), ModelError> {
        if outcome < self.outcomes.len() {
            Ok(())
        } else {
            Err(ModelError::BadOutcome { index: outcome, count: self.outcomes.len() })
        }
    }

    pub fn type_index(&self, agent: usize, name: &str) -> Option<usize> {
        self.agents.get(agent)?.types.iter().position(|t| t == name)
    }

    pub fn outcome_index(&self, name: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == name)
    }

    /// Type names of the profile at `idx`.
    pub fn profile_names(&self, idx: usize) -> Vec<&str> {
        (0..self.agents.len()).map(|a| self.agents[a].types[self.space.type_of(idx, a)].as_str()).collect()
    }
}

/// The function g over (profile, outcome).
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    SocialWelfare,
    /// Dense table indexed by `profile * |O| + outcome`.
    Table(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub goal: Option<f64>,
}

impl Objective {
    pub fn social_welfare() -> Self {
        Objective { kind: ObjectiveKind::SocialWelfare, goal: None }
    }

    /// A table objective; `values` must be dense over profiles x outcomes.
    pub fn table(setting: &Setting, values: Vec<f64>) -> Result<Self, ValidationError> {
        let want = setting.num_profiles() * setting.num_outcomes();
        let mut violations = Vec::new();
        if values.len() != want {
            violations
                .push(format!("objective table has {} entries, expected {want} (profiles x outcomes)", values.len()));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                violations.push(format!("objective table entry {i} is not a finite number"));
            }
        }
        if violations.is_empty() {
            Ok(Objective { kind: ObjectiveKind::Table(values), goal: None })
        } else {
            Err(ValidationError { violations })
        }
    }

    pub fn with_goal(mut self, goal: Option<f64>) -> Self {
        self.goal = goal;
        self
    }

    /// g at a profile index and outcome; indices are assumed valid.
    #[inline]
    pub fn value_at(&self, setting: &Setting, idx: usize, outcome: usize) -> f64 {
        match &self.kind {
            ObjectiveKind::SocialWelfare => {
                (0..setting.num_agents()).map(|a| setting.utility(a, setting.space().type_of(idx, a), outcome)).sum()
            }
            ObjectiveKind::Table(values) => values[idx * setting.num_outcomes() + outcome],
        }
    }

    pub fn check(&self, setting: &Setting) -> Result<(), ModelError> {
        if let ObjectiveKind::Table(values) = &self.kind {
            let want = setting.num_profiles() * setting.num_outcomes();
            if values.len() != want {
                return Err(ModelError::Validation(ValidationError {
                    violations: vec![format!("objective table has {} entries, expected {want}", values.len())],
                }));
            }
        }
        Ok(())
    }
}

/// g(profile, outcome), with range checks.
pub fn evaluate_objective(
    setting: &Setting,
    objective: &Objective,
    profile: &TypeProfile,
    outcome: usize,
) -> Result<f64, ModelError> {
    let idx = setting.check_profile(profile)?;
    setting.check_outcome(outcome)?;
    objective.check(setting)?;
    Ok(objective.value_at(setting, idx, outcome))
}

pub fn profile_probability(setting: &Setting, profile: &TypeProfile) -> Result<f64, ModelError> {
    Ok(setting.probability(setting.check_profile(profile)?))
}

/// Probability of the other agents' partial profile given agent `agent`'s own
/// type. Zero when the own type has zero marginal under a joint prior.
pub fn conditional_others_probability(
    setting: &Setting,
    agent: usize,
    own_type: usize,
    others: &[usize],
) -> Result<f64, ModelError> {
    if agent >= setting.num_agents() {
        return Err(ModelError::BadAgent { index: agent, count: setting.num_agents() });
    }
    if own_type >= setting.space().num_types(agent) {
        return Err(ModelError::BadType { agent, index: own_type });
    }
    let idx = setting.space().from_others(agent, own_type, others).ok_or_else(|| {
        let mut full = others.to_vec();
        full.insert(agent.min(others.len()), own_type);
        ModelError::BadProfile(full)
    })?;
    Ok(setting.conditional(agent, idx))
}

/// Anything that maps a profile index to a lottery over outcomes.
pub trait Mechanism {
    fn num_profiles(&self) -> usize;
    fn num_outcomes(&self) -> usize;
    /// Expected value of `value(outcome)` under the lottery at `profile`.
    fn expectation(&self, profile: usize, value: &dyn Fn(usize) -> f64) -> f64;
}

/// A total map from profile index to a single outcome index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicMechanism {
    choice: Vec<usize>,
    num_outcomes: usize,
}

impl DeterministicMechanism {
    pub fn new(setting: &Setting, choice: Vec<usize>) -> Result<Self, ModelError> {
        if choice.len() != setting.num_profiles() {
            return Err(ModelError::DimensionMismatch {
                profiles: setting.num_profiles(),
                outcomes: setting.num_outcomes(),
                found_profiles: choice.len(),
                found_outcomes: setting.num_outcomes(),
            });
        }
        if let Some(&bad) = choice.iter().find(|&&k| k >= setting.num_outcomes()) {
            return Err(ModelError::BadOutcome { index: bad, count: setting.num_outcomes() });
        }
        Ok(DeterministicMechanism { choice, num_outcomes: setting.num_outcomes() })
    }

    /// The same outcome for every profile.
    pub fn constant(setting: &Setting, outcome: usize) -> Result<Self, ModelError> {
        Self::new(setting, vec![outcome; setting.num_profiles()])
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    pub fn outcome_at(&self, idx: usize) -> usize {
        self.choice[idx]
    }

    pub fn outcome(&self, setting: &Setting, profile: &TypeProfile) -> Result<usize, ModelError> {
        Ok(self.choice[setting.check_profile(profile)?])
    }

    /// One-hot randomized encoding.
    pub fn to_randomized(&self) -> RandomizedMechanism {
        let dist = self
            .choice
            .iter()
            .map(|&k| {
                let mut row = vec![0.0; self.num_outcomes];
                row[k] = 1.0;
                row
            })
            .collect();
        RandomizedMechanism { dist, num_outcomes: self.num_outcomes }
    }
}

impl Mechanism for DeterministicMechanism {
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

/// A total map from profile index to a distribution over outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedMechanism {
    dist: Vec<Vec<f64>>,
    num_outcomes: usize,
}

impl RandomizedMechanism {
    /// Rows must have `|O|` entries, each ≥ −1e-9 (clamped to 0), summing to 1 within 1e-9.
    pub fn new(setting: &Setting, dist: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let n_out = setting.num_outcomes();
        let bad_width = dist.iter().find(|r| r.len() != n_out).map(|r| r.len());
        if dist.len() != setting.num_profiles() || bad_width.is_some() {
            return Err(ModelError::DimensionMismatch {
                profiles: setting.num_profiles(),
                outcomes: n_out,
                found_profiles: dist.len(),
                found_outcomes: bad_width.unwrap_or(n_out),
            });
        }
        let mut clean = Vec::with_capacity(dist.len());
        for (p, row) in dist.into_iter().enumerate() {
            if let Some(k) = row.iter().position(|&x| !x.is_finite() || x < -TOLERANCE) {
                return Err(ModelError::InvalidMechanism(format!(
                    "profile {p}: probability of outcome {k} is {}",
                    row[k]
                )));
            }
            let row: Vec<f64> = row.into_iter().map(|x| x.max(0.0)).collect();
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > TOLERANCE {
                return Err(ModelError::InvalidMechanism(format!("profile {p}: probabilities sum to {sum}")));
            }
            clean.push(row);
        }
        Ok(RandomizedMechanism { dist: clean, num_outcomes: n_out })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn distribution_at(&self, idx: usize) -> &[f64] {
        &self.dist[idx]
    }
}

impl Mechanism for RandomizedMechanism {
    fn num_profiles(&self) -> usize {
        self.dist.len()
    }
    fn num_outcomes(&self) -> usize {
        self.num_outcomes
    }
    fn expectation(&self, profile: usize, value: &dyn Fn(usize) -> f64) -> f64 {
        self.dist[profile].iter().enumerate().filter(|&(_, &q)| q != 0.0).map(|(k, &q)| q * value(k)).sum()
    }
}

/// Either kind of mechanism, as read from a mechanism file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMechanism {
    Deterministic(DeterministicMechanism),
    Randomized(RandomizedMechanism),
}

impl Mechanism for AnyMechanism {
    fn num_profiles(&self) -> usize {
        match self {
            AnyMechanism::Deterministic(m) => m.num_profiles(),
            AnyMechanism::Randomized(m) => m.num_profiles(),
        }
    }
    fn num_outcomes(&self) -> usize {
        match self {
            AnyMechanism::Deterministic(m) => m.num_outcomes(),
            AnyMechanism::Randomized(m) => m.num_outcomes(),
        }
    }
    fn expectation(&self, profile: usize, value: &dyn Fn(usize) -> f64) -> f64 {
        match self {
            AnyMechanism::Deterministic(m) => m.expectation(profile, value),
            AnyMechanism::Randomized(m) => m.expectation(profile, value),
        }
    }
}

/// Dominant strategies or Bayes-Nash equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Concept {
    DominantStrategy,
    BayesNash,
}

impl Concept {
    pub fn short_name(self) -> &'static str {
        match self {
            Concept::DominantStrategy => "ds",
            Concept::BayesNash => "bne",
        }
    }
}
