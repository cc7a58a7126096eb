use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use amd_core::deterministic::{
    decide_deterministic, solve_deterministic, DeterministicError, SearchOptions, DEFAULT_NODE_BUDGET,
};
use amd_core::io::{mechanism_to_json, parse_mechanism, parse_setting, setting_to_json, IoError, Problem};
use amd_core::randomized::{build_lp, solve_randomized, RandomizedError};
use amd_core::reductions::{
    brute_force_independent_set, brute_force_knapsack, decode_with_labels, reduce_independent_set, reduce_knapsack,
    Graph, KnapsackInstance, OutcomeLabel, ReducedInstance, ReductionError,
};
use amd_core::verify::{verify, VerificationReport};
use amd_core::{AnyMechanism, Concept, Objective, ObjectiveKind, Setting};

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NO: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

#[derive(Parser)]
#[command(name = "amd", version, about = "Optimal truthful mechanisms for small preference aggregation settings")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute an optimal truthful mechanism, or decide whether a goal is reachable
    Solve {
        setting: PathBuf,
        #[arg(long, value_enum)]
        concept: ConceptArg,
        #[arg(long, value_enum)]
        class: Class,
        /// Defaults to the objective named in the setting file
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Overrides the goal in the setting file
        #[arg(long)]
        goal: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Deterministic search budget, in (profile, outcome) assignments
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u64,
        /// Write the mechanism LP here (randomized class only)
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        /// Write the mechanism here as a mechanism file
        #[arg(long)]
        out: Option<PathBuf>,
        /// Label sidecar from `amd reduce`; decodes the mechanism back to a source solution
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Check a mechanism file for incentive compatibility
    Verify {
        setting: PathBuf,
        mechanism: PathBuf,
        #[arg(long, value_enum)]
        concept: ConceptArg,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        #[arg(long)]
        goal: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Generate a mechanism design instance from a source problem
    Reduce {
        #[command(subcommand)]
        source: ReduceCmd,
    },
    /// Answer a source problem by exhaustive search
    Oracle {
        #[command(subcommand)]
        source: OracleCmd,
    },
}

#[derive(Subcommand)]
enum ReduceCmd {
    IndependentSet {
        /// Graph file: {"n": 3, "edges": [[1, 2], ...]}
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Label sidecar path [default: OUT with extension .labels.json]
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    Knapsack {
        /// Knapsack file: {"items": [[w, v], ...], "capacity": C, "goal": D}
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    IndependentSet {
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    Knapsack {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConceptArg {
    Ds,
    Bne,
}

impl From<ConceptArg> for Concept {
    fn from(c: ConceptArg) -> Self {
        match c {
            ConceptArg::Ds => Concept::DominantStrategy,
            ConceptArg::Bne => Concept::BayesNash,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Class {
    Deterministic,
    Randomized,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    SocialWelfare,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

/// A failed invocation: exit code plus message for stderr.
struct Failure(u8, String);

impl Failure {
    fn input(msg: impl Display) -> Self {
        Failure(EXIT_INPUT, msg.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::input(e)
    }
}

impl From<ReductionError> for Failure {
    fn from(e: ReductionError) -> Self {
        Failure::input(e)
    }
}

impl From<RandomizedError> for Failure {
    fn from(e: RandomizedError) -> Self {
        match e {
            RandomizedError::Model(m) => Failure::input(m),
            other => Failure(EXIT_INTERNAL, other.to_string()),
        }
    }
}

impl From<DeterministicError> for Failure {
    fn from(e: DeterministicError) -> Self {
        match e {
            DeterministicError::BudgetExceeded { .. } => Failure(EXIT_BUDGET, e.to_string()),
            DeterministicError::Model(m) => Failure::input(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Solve { setting, concept, class, objective, goal, format, node_budget, dump_lp, out, labels } => {
            let args = SolveArgs { concept: concept.into(), class, format, node_budget, dump_lp, out, labels };
            load_problem(&setting, objective, goal).and_then(|(p, obj)| cmd_solve(&p.setting, &obj, &args))
        }
        Cmd::Verify { setting, mechanism, concept, objective, goal, format } => load_problem(&setting, objective, goal)
            .and_then(|(p, obj)| cmd_verify(&p.setting, &obj, &mechanism, concept.into(), format)),
        Cmd::Reduce { source } => cmd_reduce(source),
        Cmd::Oracle { source } => cmd_oracle(source),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_problem(
    path: &Path,
    objective: Option<ObjectiveArg>,
    goal: Option<f64>,
) -> Result<(Problem, Objective), Failure> {
    let problem = parse_setting(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let kind = match objective {
        None => problem.objective().kind,
        Some(ObjectiveArg::SocialWelfare) => ObjectiveKind::SocialWelfare,
        Some(ObjectiveArg::Table) => match &problem.objective {
            Some(table @ ObjectiveKind::Table(_)) => table.clone(),
            _ => {
                return Err(Failure::input(format!(
                    "{}: --objective table but the file has no objective table",
                    path.display()
                )))
            }
        },
    };
    if let Some(g) = goal {
        if !g.is_finite() {
            return Err(Failure::input("--goal must be finite"));
        }
    }
    let objective = Objective { kind, goal: goal.or(problem.goal) };
    Ok((problem, objective))
}

fn emit(format: Format, value: &Value, table: impl FnOnce() -> String) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("json value")),
        Format::Table => print!("{}", table()),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "YES"
    } else {
        "NO"
    }
}

struct SolveArgs {
    concept: Concept,
    class: Class,
    format: Format,
    node_budget: u64,
    dump_lp: Option<PathBuf>,
    out: Option<PathBuf>,
    labels: Option<PathBuf>,
}

fn cmd_solve(setting: &Setting, objective: &Objective, args: &SolveArgs) -> Result<u8, Failure> {
    let labels: Option<BTreeMap<String, OutcomeLabel>> = args.labels.as_deref().map(parse_json).transpose()?;
    if let Some(path) = &args.dump_lp {
        if args.class != Class::Randomized {
            return Err(Failure::input("--dump-lp needs --class randomized"));
        }
        let (lp, _) = build_lp(setting, args.concept, objective).map_err(RandomizedError::from)?;
        write(path, &lp.dump())?;
    }
    let (mechanism, value, stats) = match args.class {
        Class::Randomized => {
            let sol = solve_randomized(setting, args.concept, objective)?;
            (Some(AnyMechanism::Randomized(sol.mechanism)), Some(sol.value), json!({ "pivots": sol.pivots }))
        }
        Class::Deterministic => {
            let opts = SearchOptions { node_budget: args.node_budget };
            match objective.goal {
                Some(goal) => {
                    let d = decide_deterministic(setting, args.concept, objective, goal, opts)?;
                    (d.witness.map(AnyMechanism::Deterministic), d.value, json!({ "nodes": d.nodes }))
                }
                None => {
                    let sol = solve_deterministic(setting, args.concept, objective, opts)?;
                    (Some(AnyMechanism::Deterministic(sol.mechanism)), Some(sol.value), json!({ "nodes": sol.nodes }))
                }
            }
        }
    };
    let attained = objective.goal.map(|g| value.is_some_and(|v| amd_core::verify::attains(v, g)));
    let decoded = match (&labels, &mechanism) {
        (Some(labels), Some(AnyMechanism::Deterministic(m))) => Some(decode_with_labels(setting, labels, m)?),
        (Some(_), Some(AnyMechanism::Randomized(_))) => {
            return Err(Failure::input("--labels decodes deterministic mechanisms only"));
        }
        _ => None,
    };
    if let (Some(path), Some(m)) = (&args.out, &mechanism) {
        write(path, &mechanism_to_json(setting, m))?;
    }

    let mech_json = mechanism
        .as_ref()
        .map(|m| serde_json::from_str::<Value>(&mechanism_to_json(setting, m)).expect("mechanism json"));
    let class = match args.class {
        Class::Deterministic => "deterministic",
        Class::Randomized => "randomized",
    };
    let report = json!({
        "concept": args.concept.short_name(),
        "class": class,
        "value": value,
        "goal": objective.goal,
        "attained": attained,
        "mechanism": mech_json,
        "decoded": decoded.as_ref().map(|(kind, set)| json!({ "kind": kind, "set": set })),
        "stats": stats,
    });
    emit(args.format, &report, || {
        let mut s = String::new();
        if let Some(m) = &mechanism {
            s += &mechanism_table(setting, m);
        }
        if let Some(v) = value {
            s += &format!("expected objective: {v}\n");
        }
        if let (Some(g), Some(a)) = (objective.goal, attained) {
            s += &format!("goal {g}: {}\n", yes_no(a));
        }
        if let Some((_, set)) = &decoded {
            s += &format!("decoded: {}\n", set_text(set));
        }
        s
    });
    Ok(if attained == Some(false) { EXIT_NO } else { 0 })
}

fn profile_label(setting: &Setting, p: usize) -> String {
    setting.profile_names(p).join(" ")
}

fn mechanism_table(setting: &Setting, mech: &AnyMechanism) -> String {
    let rows: Vec<String> = (0..setting.num_profiles()).map(|p| profile_label(setting, p)).collect();
    let lw = rows.iter().map(String::len).max().unwrap_or(0).max("profile".len());
    let mut s = String::new();
    match mech {
        AnyMechanism::Deterministic(m) => {
            s += &format!("{:lw$}  outcome\n", "profile");
            for (p, row) in rows.iter().enumerate() {
                s += &format!("{row:lw$}  {}\n", setting.outcomes()[m.outcome_at(p)]);
            }
        }
        AnyMechanism::Randomized(m) => {
            let cells: Vec<Vec<String>> =
                (0..rows.len()).map(|p| m.distribution_at(p).iter().map(|&x| format!("{:.4}", x)).collect()).collect();
            let widths: Vec<usize> = setting.outcomes().iter().map(|o| o.len().max(6)).collect();
            s += &format!("{:lw$}", "profile");
            for (o, w) in setting.outcomes().iter().zip(&widths) {
                s += &format!("  {o:>w$}");
            }
            s += "\n";
            for (row, line) in rows.iter().zip(&cells) {
                s += &format!("{row:lw$}");
                for (c, w) in line.iter().zip(&widths) {
                    s += &format!("  {c:>w$}");
                }
                s += "\n";
            }
        }
    }
    s
}

fn set_text(set: &BTreeSet<usize>) -> String {
    let items: Vec<String> = set.iter().map(usize::to_string).collect();
    format!("{{{}}}", items.join(", "))
}

fn cmd_verify(
    setting: &Setting,
    objective: &Objective,
    mech_path: &Path,
    concept: Concept,
    format: Format,
) -> Result<u8, Failure> {
    let mech = parse_mechanism(setting, &read(mech_path)?)
        .map_err(|e| Failure::input(format!("{}: {e}", mech_path.display())))?;
    let report = match &mech {
        AnyMechanism::Deterministic(m) => verify(setting, m, concept, objective),
        AnyMechanism::Randomized(m) => verify(setting, m, concept, objective),
    }
    .map_err(Failure::input)?;
    let mut value = serde_json::to_value(&report).expect("report json");
    value["truthful"] = json!(report.is_truthful());
    emit(format, &value, || verification_table(setting, &report));
    Ok(if report.is_truthful() { 0 } else { EXIT_VIOLATIONS })
}

fn verification_table(setting: &Setting, report: &VerificationReport) -> String {
    let mut s = String::new();
    if report.is_truthful() {
        s += &format!("IC ✓ ({})\n", report.concept.short_name());
    } else {
        s += &format!("{} violation(s) ({})\n", report.violations.len(), report.concept.short_name());
        for v in &report.violations {
            let types = &setting.agents()[v.agent].types;
            s += &format!("  agent {} true {} reports {}", v.agent + 1, types[v.true_type], types[v.misreport]);
            if let Some(others) = &v.others {
                let names: Vec<&str> = others
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| {
                        let a = if i < v.agent { i } else { i + 1 };
                        setting.agents()[a].types[t].as_str()
                    })
                    .collect();
                s += &format!(" against [{}]", names.join(" "));
            }
            s += &format!(": truthful {} deviation {} gain {}\n", v.truthful, v.deviation, v.gap);
        }
    }
    s += &format!("expected objective: {}\n", report.expected_objective);
    if let Some(a) = report.goal_attained {
        s += &format!("goal: {}\n", yes_no(a));
    }
    s
}

fn cmd_reduce(source: ReduceCmd) -> Result<u8, Failure> {
    let (inst, header, out, labels) = match source {
        ReduceCmd::IndependentSet { graph, k, out, labels } => {
            let g: Graph = parse_json(&graph)?;
            let inst = reduce_independent_set(&g, k)?;
            (inst, format!("n = {}\nm = {}\nK = {k}\n", g.n(), g.m()), out, labels)
        }
        ReduceCmd::Knapsack { instance, out, labels } => {
            let k: KnapsackInstance = parse_json(&instance)?;
            let inst = reduce_knapsack(&k)?;
            let header = format!("items = {}\nC = {}\nD = {}\n", k.items().len(), k.capacity(), k.goal());
            (inst, header, out, labels)
        }
    };
    let labels = labels.unwrap_or_else(|| out.with_extension("labels.json"));
    write_reduced(&inst, &out, &labels)?;
    let space = inst.setting().space();
    let types: Vec<String> = (0..space.num_agents()).map(|a| space.num_types(a).to_string()).collect();
    print!("{header}");
    println!("outcomes = {}", inst.setting().num_outcomes());
    println!("types = {}", types.join(", "));
    println!("G = {}", inst.goal());
    println!("wrote {} and {}", out.display(), labels.display());
    Ok(0)
}

fn write_reduced(inst: &ReducedInstance, out: &Path, labels: &Path) -> Result<(), Failure> {
    write(out, &setting_to_json(inst.setting(), Some(inst.objective())))?;
    write(labels, &serde_json::to_string_pretty(&inst.label_map()).expect("labels json"))
}

fn cmd_oracle(source: OracleCmd) -> Result<u8, Failure> {
    let (yes, report, text) = match source {
        OracleCmd::IndependentSet { graph, k, format } => {
            let g: Graph = parse_json(&graph)?;
            if k < 1 || k > g.n() {
                return Err(ReductionError::TargetOutOfRange { k, n: g.n() }.into());
            }
            let ans = brute_force_independent_set(&g, k)?;
            let text = format!(
                "{} maximum independent set {} (size {})\n",
                yes_no(ans.yes),
                set_text(&ans.maximum),
                ans.maximum.len()
            );
            (ans.yes, json!({ "yes": ans.yes, "witness": ans.maximum, "size": ans.maximum.len() }), (format, text))
        }
        OracleCmd::Knapsack { instance, format } => {
            let k: KnapsackInstance = parse_json(&instance)?;
            let ans = brute_force_knapsack(&k)?;
            let text =
                format!("{} best feasible items {} (value {})\n", yes_no(ans.yes), set_text(&ans.best), ans.best_value);
            (ans.yes, json!({ "yes": ans.yes, "witness": ans.best, "value": ans.best_value }), (format, text))
        }
    };
    let (format, text) = text;
    emit(format, &report, || text);
    Ok(if yes { 0 } else { EXIT_NO })
}
