//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p amd-core --test acceptance`.

// `ensure!(a <= b)` must fail on NaN, so negated comparisons are intended
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use amd_core::deterministic::{decide_deterministic, solve_deterministic, SearchOptions};
use amd_core::linprog::{solve_lp, LpStatus, DEFAULT_MAX_PIVOTS};
use amd_core::model::{AgentSpec, Objective, Setting};
use amd_core::randomized::{build_lp_bne_with_shape, build_lp_ds_with_shape, solve_randomized};
use amd_core::reductions::{
    brute_force_independent_set, brute_force_knapsack, decode_independent_set, decode_knapsack,
    encode_mechanism_from_independent_set, encode_mechanism_from_knapsack, reduce_independent_set, reduce_knapsack,
    Graph, KnapsackInstance, ReducedInstance,
};
use amd_core::verify::{check_concept, expected_objective};
use amd_core::Concept;
use common::exact::TwoAgents;
use common::*;
use num::{BigInt, BigRational};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const DS: Concept = Concept::DominantStrategy;
const BNE: Concept = Concept::BayesNash;

/// Three outcomes; agent 1 has two equiprobable types, agent 2 a single type.
fn example() -> Setting {
    Setting::new(
        vec!["o1".into(), "o2".into(), "o3".into()],
        vec![
            AgentSpec::new(
                vec!["a1".into(), "a2".into()],
                vec![0.5, 0.5],
                vec![vec![1.0, 2.0, 0.0], vec![8.0, 2.0, 0.0]],
            ),
            AgentSpec::new(vec!["b1".into()], vec![1.0], vec![vec![0.0, 0.0, 4.0]]),
        ],
        None,
    )
    .unwrap()
}

fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn subset(mask: u32, size: usize) -> BTreeSet<usize> {
    (0..size).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect()
}

fn two_agents(r: &ReducedInstance) -> TwoAgents<'_> {
    let space = r.setting().space();
    TwoAgents { data: r.exact(), n1: space.num_types(0), n2: space.num_types(1) }
}

fn randomized_example() -> Outcome {
    let s = example();
    let sw = Objective::social_welfare();
    let start = Instant::now();
    let ds = solve_randomized(&s, DS, &sw).map_err(|e| e.to_string())?;
    let bne = solve_randomized(&s, BNE, &sw).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!((ds.value - 5.5).abs() <= 1e-6, "DS value {}", ds.value);
    ensure!((bne.value - 5.5).abs() <= 1e-6, "BNE value {}", bne.value);
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("DS {} BNE {} in {elapsed:?}", ds.value, bne.value))
}

fn deterministic_example() -> Outcome {
    let s = example();
    let sw = Objective::social_welfare();
    let start = Instant::now();
    let sol = solve_deterministic(&s, DS, &sw, SearchOptions::default()).map_err(|e| e.to_string())?;
    let no = decide_deterministic(&s, DS, &sw, 5.25, SearchOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!((sol.value - 5.0).abs() <= 1e-9, "value {}", sol.value);
    // a1 → o2, a2 → o1
    ensure!(sol.mechanism.choices() == [1, 0], "mechanism {:?}", sol.mechanism.choices());
    ensure!(!no.attained, "goal 5.25 reported attainable");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("value {} via a1→o2, a2→o1; goal 5.25 NO; {elapsed:?}", sol.value))
}

fn randomization_gap() -> Outcome {
    let s = example();
    let sw = Objective::social_welfare();
    let mut parts = Vec::new();
    for c in [DS, BNE] {
        let r = solve_randomized(&s, c, &sw).map_err(|e| e.to_string())?.value;
        let d = solve_deterministic(&s, c, &sw, SearchOptions::default()).map_err(|e| e.to_string())?.value;
        ensure!((r - d - 0.5).abs() <= 1e-6, "{} gap {}", c.short_name(), r - d);
        parts.push(format!("{} {}", c.short_name(), r - d));
    }
    Ok(format!("gap {}", parts.join(", ")))
}

fn lp_shape() -> Outcome {
    let s = example();
    let sw = Objective::social_welfare();
    let (n1, n2) = (2, 1);
    let (ds, _, ds_shape) = build_lp_ds_with_shape(&s, &sw).map_err(|e| e.to_string())?;
    let (bne, _, bne_shape) = build_lp_bne_with_shape(&s, &sw).map_err(|e| e.to_string())?;
    ensure!(ds.num_vars() == 6 && bne.num_vars() == 6, "variables {} / {}", ds.num_vars(), bne.num_vars());
    ensure!(ds_shape.ic_rows == n1 * n1 * n2 + n1 * n2 * n2, "DS IC rows {}", ds_shape.ic_rows);
    ensure!(ds_shape.ic_rows == 6, "DS IC rows {}", ds_shape.ic_rows);
    ensure!(bne_shape.ic_rows == n1 * n1 + n2 * n2 && bne_shape.ic_rows == 5, "BNE IC rows {}", bne_shape.ic_rows);
    ensure!(ds_shape.normalization_rows == 2 && bne_shape.normalization_rows == 2, "normalization rows");
    Ok(format!("6 variables, DS {} IC rows, BNE {} IC rows", ds_shape.ic_rows, bne_shape.ic_rows))
}

/// `[2m(5n²+1) + 2(n−s) + 4s + 4(n²−2m−n)] / n²`
fn graph_welfare(n: usize, m: usize, s: usize) -> BigRational {
    let (n, m, s) = (n as i64, m as i64, s as i64);
    q(2 * m * (5 * n * n + 1) + 2 * (n - s) + 4 * s + 4 * (n * n - 2 * m - n), n * n)
}

fn independent_set_equivalence() -> Outcome {
    let start = Instant::now();
    let mut decisions = 0;
    for n in 1..=3 {
        for edges in all_graphs(n) {
            let g = Graph::new(n, &edges).map_err(|e| e.to_string())?;
            for k in 1..=n {
                let inst = reduce_independent_set(&g, k).map_err(|e| e.to_string())?;
                let d =
                    decide_deterministic(inst.setting(), DS, inst.objective(), inst.goal(), SearchOptions::default())
                        .map_err(|e| e.to_string())?;
                let oracle = brute_force_independent_set(&g, k).map_err(|e| e.to_string())?;
                ensure!(
                    d.attained == oracle.yes,
                    "n={n} edges={edges:?} K={k}: solver {} oracle {}",
                    d.attained,
                    oracle.yes
                );
                if let Some(w) = &d.witness {
                    let s = decode_independent_set(&inst, w);
                    ensure!(g.is_independent(&s) && s.len() >= k, "decoded {s:?} for K={k} on {edges:?}");
                }
                decisions += 1;
            }
        }
    }
    let mut r = rng(5);
    let mut sets = 0;
    let graphs = 25;
    for _ in 0..graphs {
        let n = r.gen_range(1..=6);
        let density = r.gen_range(0.2..0.7);
        let edges = random_graph(&mut r, n, density);
        let g = Graph::new(n, &edges).map_err(|e| e.to_string())?;
        let maximum = brute_force_independent_set(&g, 1).map_err(|e| e.to_string())?.maximum;
        let inst = reduce_independent_set(&g, maximum.len().max(1)).map_err(|e| e.to_string())?;
        let exact = two_agents(&inst);
        // every independent set, the oracle's maximum among them
        for mask in 0u32..(1 << n) {
            let s = subset(mask, n);
            if !g.is_independent(&s) {
                continue;
            }
            let mech = encode_mechanism_from_independent_set(&inst, &s).map_err(|e| e.to_string())?;
            ensure!(exact.dominant_strategy_truthful(mech.choices()), "S={s:?} on {edges:?} not DS-IC");
            ensure!(exact.welfare(mech.choices()) == graph_welfare(n, g.m(), s.len()), "S={s:?} welfare");
            ensure!(decode_independent_set(&inst, &mech) == s, "decode round trip for {s:?}");
            sets += 1;
        }
    }
    Ok(format!(
        "{decisions} decisions on all graphs n≤3; {sets} forward sets on {graphs} random graphs; {:?}",
        start.elapsed()
    ))
}

/// Every item list with weights in 1..=3 and values in 0..=3, m ≤ 3.
fn small_item_lists() -> Vec<Vec<(u64, u64)>> {
    let choices: Vec<(u64, u64)> = (1..=3).flat_map(|w| (0..=3).map(move |v| (w, v))).collect();
    let mut out: Vec<Vec<(u64, u64)>> = vec![vec![]];
    let mut all = Vec::new();
    for _ in 0..3 {
        out = out
            .iter()
            .flat_map(|prefix| {
                choices.iter().map(move |&c| {
                    let mut next = prefix.clone();
                    next.push(c);
                    next
                })
            })
            .collect();
        all.extend(out.iter().cloned());
    }
    all
}

fn knapsack_equivalence() -> Outcome {
    let start = Instant::now();
    let mut decisions = 0;
    for items in small_item_lists() {
        let w: u64 = items.iter().map(|i| i.0).sum();
        let v: u64 = items.iter().map(|i| i.1).sum();
        for c in 1..=w {
            for d in 1..=v {
                let k = KnapsackInstance::new(items.clone(), c, d).map_err(|e| e.to_string())?;
                let inst = reduce_knapsack(&k).map_err(|e| e.to_string())?;
                let dec =
                    decide_deterministic(inst.setting(), BNE, inst.objective(), inst.goal(), SearchOptions::default())
                        .map_err(|e| e.to_string())?;
                let oracle = brute_force_knapsack(&k).map_err(|e| e.to_string())?;
                ensure!(
                    dec.attained == oracle.yes,
                    "{items:?} C={c} D={d}: solver {} oracle {}",
                    dec.attained,
                    oracle.yes
                );
                if let Some(wit) = &dec.witness {
                    let s = decode_knapsack(&inst, wit);
                    let (sw, sv) = s.iter().fold((0, 0), |(a, b), &j| (a + items[j - 1].0, b + items[j - 1].1));
                    ensure!(sw <= c && sv >= d, "decoded {s:?} for {items:?} C={c} D={d}");
                }
                decisions += 1;
            }
        }
    }
    let mut r = rng(6);
    let mut sets = 0;
    for m in 1..=8usize {
        for _ in 0..4 {
            let items: Vec<(u64, u64)> = (0..m).map(|_| (r.gen_range(1..=6), r.gen_range(0..=6))).collect();
            let w: u64 = items.iter().map(|i| i.0).sum();
            let v: u64 = items.iter().map(|i| i.1).sum();
            let cap = r.gen_range(1..=w);
            let k = KnapsackInstance::new(items.clone(), cap, v.max(1)).map_err(|e| e.to_string())?;
            let inst = reduce_knapsack(&k).map_err(|e| e.to_string())?;
            let exact = two_agents(&inst);
            for mask in 0u32..(1 << m) {
                let s = subset(mask, m);
                let (sw, sv) = s.iter().fold((0, 0), |(a, b), &j| (a + items[j - 1].0, b + items[j - 1].1));
                if sw > cap {
                    continue;
                }
                let mech = encode_mechanism_from_knapsack(&inst, &k, &s).map_err(|e| e.to_string())?;
                ensure!(exact.bayes_nash_truthful(mech.choices()), "{items:?} C={cap} S={s:?} not BNE-IC");
                let expected = q((w * v) as i64, 1) + q((w + sv) as i64, 2);
                ensure!(exact.welfare(mech.choices()) == expected, "{items:?} S={s:?} welfare");
                ensure!(decode_knapsack(&inst, &mech) == s, "decode round trip for {s:?}");
                sets += 1;
            }
        }
    }
    Ok(format!("{decisions} decisions on all m≤3 instances; {sets} forward sets with m≤8; {:?}", start.elapsed()))
}

fn fuzz_orderings() -> Outcome {
    let mut r = rng(7);
    let sw = Objective::social_welfare();
    let settings = 240;
    for i in 0..settings {
        let s =
            random_setting(&mut r, &SettingShape { agents: 2, max_types: 3, max_outcomes: 4, joint_prior: i % 2 == 1 });
        let mut det = [0.0; 2];
        let mut ran = [0.0; 2];
        for (ci, c) in [DS, BNE].into_iter().enumerate() {
            let d = solve_deterministic(&s, c, &sw, SearchOptions::default()).map_err(|e| e.to_string())?;
            let x = solve_randomized(&s, c, &sw).map_err(|e| e.to_string())?;
            ensure!(check_concept(&s, &d.mechanism, c, 1e-7).map_err(|e| e.to_string())?.is_empty(), "#{i} det {c:?}");
            ensure!(check_concept(&s, &x.mechanism, c, 1e-7).map_err(|e| e.to_string())?.is_empty(), "#{i} rand {c:?}");
            let recomputed = expected_objective(&s, &x.mechanism, &sw).map_err(|e| e.to_string())?;
            ensure!((recomputed - x.value).abs() <= 1e-7 * (1.0 + x.value.abs()), "#{i} value drift");
            det[ci] = d.value;
            ran[ci] = x.value;
            ensure!(ran[ci] >= det[ci] - 1e-7, "#{i} {c:?}: randomized {} < deterministic {}", ran[ci], det[ci]);
        }
        ensure!(det[1] >= det[0] - 1e-7, "#{i}: deterministic BNE {} < DS {}", det[1], det[0]);
        ensure!(ran[1] >= ran[0] - 1e-7, "#{i}: randomized BNE {} < DS {}", ran[1], ran[0]);
    }
    Ok(format!("{settings} settings"))
}

fn lp_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(8);
    let lps = 200;
    for i in 0..lps {
        let lp = random_bounded_lp(&mut r, 6, 6);
        let res = solve_lp(&lp).map_err(|e| format!("#{i}: {e}"))?;
        match vertex_enumeration(&lp) {
            VertexOutcome::Optimal(v) => {
                ensure!(res.status == LpStatus::Optimal, "#{i}: status {:?}, vertices give {v}", res.status);
                let got = res.value.unwrap_or(f64::NAN);
                ensure!((got - v).abs() <= 1e-6, "#{i}: simplex {got} vertices {v}");
            }
            VertexOutcome::Infeasible => ensure!(res.status == LpStatus::Infeasible, "#{i}: expected infeasible"),
        }
    }
    // reduction LPs are highly degenerate; every one must finish under the cap
    let mut reductions = 0;
    let mut max_pivots = 0;
    let mut solve = |inst: &ReducedInstance, c: Concept| -> Result<(), String> {
        // solve_randomized reports any non-optimal LP status as an error
        let res = solve_randomized(inst.setting(), c, inst.objective()).map_err(|e| e.to_string())?;
        max_pivots = max_pivots.max(res.pivots);
        reductions += 1;
        Ok(())
    };
    for n in 1..=3 {
        for edges in all_graphs(n) {
            let g = Graph::new(n, &edges).map_err(|e| e.to_string())?;
            solve(&reduce_independent_set(&g, 1).map_err(|e| e.to_string())?, DS)?;
        }
    }
    let mut gr = rng(5);
    for _ in 0..25 {
        let n = gr.gen_range(1..=6);
        let density = gr.gen_range(0.2..0.7);
        let edges = random_graph(&mut gr, n, density);
        let g = Graph::new(n, &edges).map_err(|e| e.to_string())?;
        solve(&reduce_independent_set(&g, 1).map_err(|e| e.to_string())?, DS)?;
    }
    for items in small_item_lists() {
        let w: u64 = items.iter().map(|i| i.0).sum();
        for c in 1..=w {
            let k = KnapsackInstance::new(items.clone(), c, 1).map_err(|e| e.to_string())?;
            solve(&reduce_knapsack(&k).map_err(|e| e.to_string())?, BNE)?;
        }
    }
    ensure!(max_pivots < DEFAULT_MAX_PIVOTS, "pivot cap reached");
    Ok(format!(
        "{lps} random LPs match vertex enumeration; {reductions} reduction LPs solved, at most {max_pivots} pivots; {:?}",
        start.elapsed()
    ))
}

fn reduction_sizes() -> Outcome {
    // Hardness itself is not measurable; what is checked is that both
    // constructions are polynomial with the stated sizes.
    let mut r = rng(9);
    for _ in 0..20 {
        let n = r.gen_range(1..=8);
        let edges = random_graph(&mut r, n, 0.4);
        let g = Graph::new(n, &edges).map_err(|e| e.to_string())?;
        let inst = reduce_independent_set(&g, 1).map_err(|e| e.to_string())?;
        let s = inst.setting();
        ensure!(s.num_outcomes() == n * n + n + 2 * edges.len(), "outcomes for n={n} m={}", edges.len());
        ensure!(s.space().num_types(0) == n && s.space().num_types(1) == n, "types");
    }
    for m in 1..=12 {
        let k = KnapsackInstance::new((1..=m as u64).map(|j| (j, j + 1)).collect(), 3, 2).map_err(|e| e.to_string())?;
        let inst = reduce_knapsack(&k).map_err(|e| e.to_string())?;
        let s = inst.setting();
        ensure!(
            s.num_outcomes() == m + 2 && s.space().num_types(0) == m && s.space().num_types(1) == 2,
            "knapsack m={m}"
        );
    }
    Ok("hardness is exercised through criteria 5 and 6; construction sizes n²+n+2m and m+2 confirmed"
        .into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 randomized optimum on the worked example", randomized_example),
        ("2 deterministic optimum and NO at 5.25", deterministic_example),
        ("3 randomization gap", randomization_gap),
        ("4 LP variable and IC row counts", lp_shape),
        ("5 independent-set reduction equivalence", independent_set_equivalence),
        ("6 knapsack reduction equivalence", knapsack_equivalence),
        ("7 solver ordering fuzz", fuzz_orderings),
        ("8 LP oracle and termination", lp_oracle),
        ("9 hardness (informational)", reduction_sizes),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
