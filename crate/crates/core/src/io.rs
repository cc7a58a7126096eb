//! JSON file formats for settings and mechanisms.
//!
//! Setting file:
//!
//! ```json
//! {
//!   "outcomes": ["o1", "o2"],
//!   "agents": [
//!     { "types": ["lo", "hi"], "prior": [0.5, 0.5], "utility": [[1, 0], [0, 1]] }
//!   ],
//!   "joint_prior": [ { "profile": ["lo"], "p": 0.5 }, { "profile": ["hi"], "p": 0.5 } ],
//!   "objective": { "kind": "table", "values": [ { "profile": ["lo"], "outcome": "o1", "g": 3 } ] },
//!   "goal": 2.5
//! }
//! ```
//!
//! `joint_prior`, `objective` (`{"kind": "social_welfare"}` or a table) and
//! `goal` are optional; `prior` may be omitted when a joint prior is given.
//! Unknown fields are rejected. Numbers are written at 15 significant digits.
//!
//! Mechanism file:
//!
//! ```json
//! { "kind": "deterministic", "rows": [ { "profile": ["lo"], "outcome": "o1" } ] }
//! { "kind": "randomized",    "rows": [ { "profile": ["lo"], "dist": [0.5, 0.5] } ] }
//! ```

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    round_sig, AgentSpec, AnyMechanism, DeterministicMechanism, Mechanism, ModelError, Objective, ObjectiveKind,
    RandomizedMechanism, Setting, ValidationError,
};

/// Significant digits used for every number written to a file.
pub const OUTPUT_DIGITS: usize = 15;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSetting {
    pub outcomes: Vec<String>,
    pub agents: Vec<RawAgent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_prior: Option<Vec<RawJointEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<RawObjective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAgent {
    pub types: Vec<String>,
    #[serde(default)]
    pub prior: Vec<f64>,
    pub utility: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawJointEntry {
    pub profile: Vec<String>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawObjective {
    SocialWelfare,
    Table { values: Vec<RawTableEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTableEntry {
    pub profile: Vec<String>,
    pub outcome: String,
    pub g: f64,
}

/// A validated setting file.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub setting: Setting,
    /// The file's objective, if it names one.
    pub objective: Option<ObjectiveKind>,
    pub goal: Option<f64>,
}

impl Problem {
    /// The file's objective (social welfare when absent) carrying the file's goal.
    pub fn objective(&self) -> Objective {
        Objective { kind: self.objective.clone().unwrap_or(ObjectiveKind::SocialWelfare), goal: self.goal }
    }
}

fn duplicates(names: &[String], label: &str, out: &mut Vec<String>) {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            out.push(format!("{label}: duplicate name {n:?}"));
        }
    }
}

/// Resolve type names to a profile index, recording a violation on failure.
fn resolve_profile(
    setting_agents: &[RawAgent],
    lookup: &[HashMap<&str, usize>],
    names: &[String],
    label: &str,
    out: &mut Vec<String>,
) -> Option<Vec<usize>> {
    if names.len() != setting_agents.len() {
        out.push(format!("{label}: profile has {} types for {} agents", names.len(), setting_agents.len()));
        return None;
    }
    let mut idx = Vec::with_capacity(names.len());
    for (a, name) in names.iter().enumerate() {
        match lookup[a].get(name.as_str()) {
            Some(&t) => idx.push(t),
            None => {
                out.push(format!("{label}: agent {} has no type {name:?}", a + 1));
                return None;
            }
        }
    }
    Some(idx)
}

impl RawSetting {
    /// Validate everything, reporting all violations at once.
    pub fn validate(&self) -> Result<Problem, ValidationError> {
        let mut violations = Vec::new();
        duplicates(&self.outcomes, "outcomes", &mut violations);
        for (a, agent) in self.agents.iter().enumerate() {
            duplicates(&agent.types, &format!("agents[{a}].types"), &mut violations);
        }
        let lookup: Vec<HashMap<&str, usize>> =
            self.agents.iter().map(|a| a.types.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect()).collect();
        let sizes: Vec<usize> = self.agents.iter().map(|a| a.types.len()).collect();
        let space = crate::model::ProfileSpace::new(sizes);

        let joint = self.joint_prior.as_ref().map(|entries| {
            let mut dense = vec![None; space.len()];
            for (e, entry) in entries.iter().enumerate() {
                let label = format!("joint_prior[{e}]");
                if let Some(p) = resolve_profile(&self.agents, &lookup, &entry.profile, &label, &mut violations) {
                    let idx = space.index(&p).expect("resolved profile");
                    if dense[idx].replace(entry.p).is_some() {
                        violations.push(format!("{label}: profile {:?} listed twice", entry.profile));
                    }
                }
            }
            let missing = dense.iter().filter(|d| d.is_none()).count();
            if missing > 0 && !space.is_empty() {
                violations.push(format!("joint_prior: {missing} type profile(s) not covered"));
            }
            dense.into_iter().map(|d| d.unwrap_or(0.0)).collect::<Vec<f64>>()
        });

        let outcome_ix: HashMap<&str, usize> = self.outcomes.iter().enumerate().map(|(i, o)| (o.as_str(), i)).collect();
        let table = match &self.objective {
            Some(RawObjective::Table { values }) => {
                let n_out = self.outcomes.len();
                let mut dense = vec![None; space.len() * n_out];
                for (e, entry) in values.iter().enumerate() {
                    let label = format!("objective.values[{e}]");
                    let Some(p) = resolve_profile(&self.agents, &lookup, &entry.profile, &label, &mut violations)
                    else {
                        continue;
                    };
                    let Some(&k) = outcome_ix.get(entry.outcome.as_str()) else {
                        violations.push(format!("{label}: unknown outcome {:?}", entry.outcome));
                        continue;
                    };
                    let idx = space.index(&p).expect("resolved profile") * n_out + k;
                    if dense[idx].replace(entry.g).is_some() {
                        violations
                            .push(format!("{label}: entry for {:?}/{:?} listed twice", entry.profile, entry.outcome));
                    }
                }
                let missing = dense.iter().filter(|d| d.is_none()).count();
                if missing > 0 {
                    violations.push(format!("objective.values: {missing} (profile, outcome) entries missing"));
                }
                Some(dense.into_iter().map(|d| d.unwrap_or(0.0)).collect::<Vec<f64>>())
            }
            _ => None,
        };
        if let Some(g) = self.goal {
            if !g.is_finite() {
                violations.push("goal is not a finite number".into());
            }
        }

        let agents =
            self.agents.iter().map(|a| AgentSpec::new(a.types.clone(), a.prior.clone(), a.utility.clone())).collect();
        let setting = Setting::new(self.outcomes.clone(), agents, joint);
        let setting = match setting {
            Ok(s) if violations.is_empty() => s,
            Ok(_) => return Err(ValidationError { violations }),
            Err(mut e) => {
                violations.append(&mut e.violations);
                return Err(ValidationError { violations });
            }
        };
        let objective = match (&self.objective, table) {
            (Some(RawObjective::Table { .. }), Some(values)) => Some(Objective::table(&setting, values)?.kind),
            (Some(RawObjective::SocialWelfare), _) => Some(ObjectiveKind::SocialWelfare),
            _ => None,
        };
        Ok(Problem { setting, objective, goal: self.goal })
    }

    /// The file form of a setting, numbers rounded to [`OUTPUT_DIGITS`].
    pub fn from_setting(setting: &Setting, objective: Option<&Objective>) -> Self {
        let r = |x: f64| round_sig(x, OUTPUT_DIGITS);
        let names = |idx: usize| setting.profile_names(idx).into_iter().map(String::from).collect::<Vec<_>>();
        let agents = setting
            .agents()
            .iter()
            .map(|a| RawAgent {
                types: a.types.clone(),
                prior: if setting.joint_prior().is_some() {
                    Vec::new()
                } else {
                    a.prior.iter().map(|&p| r(p)).collect()
                },
                utility: a.utility.iter().map(|row| row.iter().map(|&u| r(u)).collect()).collect(),
            })
            .collect();
        let joint_prior = setting.joint_prior().map(|joint| {
            joint.iter().enumerate().map(|(idx, &p)| RawJointEntry { profile: names(idx), p: r(p) }).collect()
        });
        let raw_objective = objective.map(|o| match &o.kind {
            ObjectiveKind::SocialWelfare => RawObjective::SocialWelfare,
            ObjectiveKind::Table(values) => RawObjective::Table {
                values: values
                    .iter()
                    .enumerate()
                    .map(|(i, &g)| RawTableEntry {
                        profile: names(i / setting.num_outcomes()),
                        outcome: setting.outcomes()[i % setting.num_outcomes()].clone(),
                        g: r(g),
                    })
                    .collect(),
            },
        });
        RawSetting {
            outcomes: setting.outcomes().to_vec(),
            agents,
            joint_prior,
            objective: raw_objective,
            goal: objective.and_then(|o| o.goal).map(r),
        }
    }
}

/// Same operation as [`RawSetting::validate`], keeping only the setting.
pub fn validate_setting(raw: &RawSetting) -> Result<Setting, ValidationError> {
    raw.validate().map(|p| p.setting)
}

pub fn parse_setting(text: &str) -> Result<Problem, IoError> {
    let raw: RawSetting = serde_json::from_str(text)?;
    Ok(raw.validate()?)
}

pub fn setting_to_json(setting: &Setting, objective: Option<&Objective>) -> String {
    serde_json::to_string_pretty(&RawSetting::from_setting(setting, objective)).expect("setting serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Deterministic,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMechanism {
    pub kind: MechanismKind,
    pub rows: Vec<RawMechanismRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMechanismRow {
    pub profile: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<f64>>,
}

impl RawMechanism {
    pub fn resolve(&self, setting: &Setting) -> Result<AnyMechanism, ValidationError> {
        let mut violations = Vec::new();
        let n_prof = setting.num_profiles();
        let mut choice = vec![None; n_prof];
        let mut dist: Vec<Option<Vec<f64>>> = vec![None; n_prof];
        for (r, row) in self.rows.iter().enumerate() {
            let label = format!("rows[{r}]");
            if row.profile.len() != setting.num_agents() {
                violations.push(format!(
                    "{label}: profile has {} types for {} agents",
                    row.profile.len(),
                    setting.num_agents()
                ));
                continue;
            }
            let mut idx = Vec::new();
            for (a, name) in row.profile.iter().enumerate() {
                match setting.type_index(a, name) {
                    Some(t) => idx.push(t),
                    None => violations.push(format!("{label}: agent {} has no type {name:?}", a + 1)),
                }
            }
            if idx.len() != setting.num_agents() {
                continue;
            }
            let p = setting.space().index(&idx).expect("resolved profile");
            let duplicate = match self.kind {
                MechanismKind::Deterministic => {
                    if row.dist.is_some() {
                        violations.push(format!("{label}: deterministic rows take `outcome`, not `dist`"));
                    }
                    match row.outcome.as_deref().map(|o| (o, setting.outcome_index(o))) {
                        Some((_, Some(k))) => choice[p].replace(k).is_some(),
                        Some((o, None)) => {
                            violations.push(format!("{label}: unknown outcome {o:?}"));
                            false
                        }
                        None => {
                            violations.push(format!("{label}: missing `outcome`"));
                            false
                        }
                    }
                }
                MechanismKind::Randomized => {
                    if row.outcome.is_some() {
                        violations.push(format!("{label}: randomized rows take `dist`, not `outcome`"));
                    }
                    match &row.dist {
                        Some(d) => dist[p].replace(d.clone()).is_some(),
                        None => {
                            violations.push(format!("{label}: missing `dist`"));
                            false
                        }
                    }
                }
            };
            if duplicate {
                violations.push(format!("{label}: profile {:?} listed twice", row.profile));
            }
        }
        let covered = match self.kind {
            MechanismKind::Deterministic => choice.iter().filter(|c| c.is_some()).count(),
            MechanismKind::Randomized => dist.iter().filter(|d| d.is_some()).count(),
        };
        if covered < n_prof && violations.is_empty() {
            violations.push(format!("mechanism covers {covered} of {n_prof} type profiles"));
        }
        if !violations.is_empty() {
            return Err(ValidationError { violations });
        }
        let built = match self.kind {
            MechanismKind::Deterministic => {
                DeterministicMechanism::new(setting, choice.into_iter().map(Option::unwrap).collect())
                    .map(AnyMechanism::Deterministic)
            }
            MechanismKind::Randomized => {
                RandomizedMechanism::new(setting, dist.into_iter().map(Option::unwrap).collect())
                    .map(AnyMechanism::Randomized)
            }
        };
        built.map_err(|e| ValidationError { violations: vec![e.to_string()] })
    }

    pub fn from_mechanism(setting: &Setting, mech: &AnyMechanism) -> Self {
        let names = |idx: usize| setting.profile_names(idx).into_iter().map(String::from).collect::<Vec<_>>();
        match mech {
            AnyMechanism::Deterministic(m) => RawMechanism {
                kind: MechanismKind::Deterministic,
                rows: (0..m.num_profiles())
                    .map(|p| RawMechanismRow {
                        profile: names(p),
                        outcome: Some(setting.outcomes()[m.outcome_at(p)].clone()),
                        dist: None,
                    })
                    .collect(),
            },
            AnyMechanism::Randomized(m) => RawMechanism {
                kind: MechanismKind::Randomized,
                rows: (0..m.num_profiles())
                    .map(|p| RawMechanismRow {
                        profile: names(p),
                        outcome: None,
                        dist: Some(m.distribution_at(p).iter().map(|&x| round_sig(x, OUTPUT_DIGITS)).collect()),
                    })
                    .collect(),
            },
        }
    }
}

pub fn parse_mechanism(setting: &Setting, text: &str) -> Result<AnyMechanism, IoError> {
    let raw: RawMechanism = serde_json::from_str(text)?;
    Ok(raw.resolve(setting)?)
}

pub fn mechanism_to_json(setting: &Setting, mech: &AnyMechanism) -> String {
    serde_json::to_string_pretty(&RawMechanism::from_mechanism(setting, mech)).expect("mechanism serializes")
}
