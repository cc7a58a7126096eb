//! Test-only generators and independent oracles.
#![allow(dead_code, clippy::needless_range_loop)]

use amd_core::linprog::{LinearProgram, Relation};
use amd_core::model::{AgentSpec, Concept, DeterministicMechanism, Objective, Setting};
use amd_core::verify::{check_concept, expected_objective};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random composition of `total` into `parts` positive integers.
fn composition(rng: &mut TestRng, total: u32, parts: usize) -> Vec<u32> {
    let mut cuts: Vec<u32> = (1..total).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<u32> = cuts.into_iter().take(parts - 1).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(total - prev);
    out
}

/// Prior with entries that are multiples of 1/8, so products and sums of
/// integer utilities stay exact in binary floating point.
pub fn dyadic_prior(rng: &mut TestRng, types: usize) -> Vec<f64> {
    composition(rng, 8, types).into_iter().map(|w| w as f64 / 8.0).collect()
}

pub struct SettingShape {
    pub agents: usize,
    pub max_types: usize,
    pub max_outcomes: usize,
    pub joint_prior: bool,
}

pub fn random_setting(rng: &mut TestRng, shape: &SettingShape) -> Setting {
    let n_out = rng.gen_range(1..=shape.max_outcomes);
    let outcomes = (0..n_out).map(|k| format!("o{k}")).collect();
    let agents: Vec<AgentSpec> = (0..shape.agents)
        .map(|a| {
            let t = rng.gen_range(1..=shape.max_types);
            AgentSpec::new(
                (0..t).map(|i| format!("a{a}t{i}")).collect(),
                dyadic_prior(rng, t),
                (0..t).map(|_| (0..n_out).map(|_| rng.gen_range(-5..=10) as f64).collect()).collect(),
            )
        })
        .collect();
    let joint = if shape.joint_prior {
        let profiles: usize = agents.iter().map(|a| a.types.len()).product();
        let weights: Vec<u32> = (0..profiles).map(|_| rng.gen_range(0..4)).collect();
        let total: u32 = weights.iter().sum::<u32>().max(1);
        let mut joint: Vec<f64> = weights.iter().map(|&w| w as f64 / total as f64).collect();
        if weights.iter().all(|&w| w == 0) {
            joint[0] = 1.0;
        }
        Some(joint)
    } else {
        None
    };
    Setting::new(outcomes, agents, joint).expect("generated setting is valid")
}

/// Best truthful deterministic mechanism by trying every outcome function.
pub fn naive_deterministic_optimum(setting: &Setting, concept: Concept, objective: &Objective) -> f64 {
    let n_prof = setting.num_profiles();
    let n_out = setting.num_outcomes();
    let total = n_out.pow(n_prof as u32);
    let mut best = f64::NEG_INFINITY;
    for code in 0..total {
        let mut c = code;
        let choice: Vec<usize> = (0..n_prof)
            .map(|_| {
                let k = c % n_out;
                c /= n_out;
                k
            })
            .collect();
        let m = DeterministicMechanism::new(setting, choice).unwrap();
        if check_concept(setting, &m, concept, amd_core::TOLERANCE).unwrap().is_empty() {
            best = best.max(expected_objective(setting, &m, objective).unwrap());
        }
    }
    best
}

pub enum VertexOutcome {
    Optimal(f64),
    Infeasible,
}

/// Standard-form equality matrix `[A | -I_ge]` and right-hand side.
fn standard_form(lp: &LinearProgram) -> (DMatrix<f64>, DVector<f64>) {
    let n = lp.num_vars();
    let n_ge = lp.rows().iter().filter(|r| r.relation == Relation::Ge).count();
    let m = lp.rows().len();
    let mut a = DMatrix::zeros(m, n + n_ge);
    let mut b = DVector::zeros(m);
    let mut s = n;
    for (i, row) in lp.rows().iter().enumerate() {
        for j in 0..n {
            a[(i, j)] = row.coeffs[j];
        }
        if row.relation == Relation::Ge {
            a[(i, s)] = -1.0;
            s += 1;
        }
        b[i] = row.rhs;
    }
    (a, b)
}

pub fn full_row_rank(lp: &LinearProgram) -> bool {
    let (a, _) = standard_form(lp);
    a.nrows() == 0 || a.clone().svd(false, false).rank(1e-9) == a.nrows()
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Maximum of the objective over all basic feasible solutions. Requires full
/// row rank and a bounded feasible region.
pub fn vertex_enumeration(lp: &LinearProgram) -> VertexOutcome {
    let (a, b) = standard_form(lp);
    let (m, cols) = (a.nrows(), a.ncols());
    let mut c = vec![0.0; cols];
    c[..lp.num_vars()].copy_from_slice(lp.objective());
    let mut bases = Vec::new();
    subsets(cols, m, 0, &mut Vec::new(), &mut bases);
    let mut best: Option<f64> = None;
    for basis in bases {
        let sub = DMatrix::from_fn(m, m, |i, j| a[(i, basis[j])]);
        let Some(x) = sub.clone().lu().solve(&b) else { continue };
        if sub.clone().svd(false, false).rank(1e-9) < m {
            continue;
        }
        if x.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let val: f64 = basis.iter().zip(x.iter()).map(|(&j, &v)| c[j] * v).sum();
        best = Some(best.map_or(val, |b: f64| b.max(val)));
    }
    match best {
        Some(v) => VertexOutcome::Optimal(v),
        None => VertexOutcome::Infeasible,
    }
}

/// Random bounded LP with at most `max_vars` variables and `max_rows` rows
/// (one of which caps the sum of variables), full row rank.
pub fn random_bounded_lp(rng: &mut TestRng, max_vars: usize, max_rows: usize) -> LinearProgram {
    loop {
        let n = rng.gen_range(1..=max_vars);
        let m = rng.gen_range(1..=max_rows);
        let mut lp = LinearProgram::new(n);
        lp.set_objective((0..n).map(|_| rng.gen_range(-4..=6) as f64).collect());
        lp.add_row(vec![-1.0; n], Relation::Ge, -(rng.gen_range(1..=8) as f64));
        for _ in 1..m {
            let coeffs = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
            let rel = if rng.gen_bool(0.3) { Relation::Eq } else { Relation::Ge };
            lp.add_row(coeffs, rel, rng.gen_range(-3..=4) as f64);
        }
        if full_row_rank(&lp) {
            return lp;
        }
    }
}

/// All labeled simple graphs on `n` vertices, as edge lists.
pub fn all_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j))).collect();
    (0u32..(1 << pairs.len()))
        .map(|mask| pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &e)| e).collect())
        .collect()
}

pub fn random_graph(rng: &mut TestRng, n: usize, density: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            if rng.gen_bool(density) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Exact two-agent checks written against the raw rational data only.
pub mod exact {
    use amd_core::reductions::ExactSetting;
    use num::{BigRational, Zero};

    pub struct TwoAgents<'a> {
        pub data: &'a ExactSetting,
        pub n1: usize,
        pub n2: usize,
    }

    impl TwoAgents<'_> {
        fn u(&self, agent: usize, own: usize, k: usize) -> &BigRational {
            self.data.utility(agent, own, k)
        }

        fn at(&self, choice: &[usize], t1: usize, t2: usize) -> usize {
            choice[t1 * self.n2 + t2]
        }

        pub fn dominant_strategy_truthful(&self, choice: &[usize]) -> bool {
            for t2 in 0..self.n2 {
                for t1 in 0..self.n1 {
                    for r1 in 0..self.n1 {
                        if self.u(0, t1, self.at(choice, r1, t2)) > self.u(0, t1, self.at(choice, t1, t2)) {
                            return false;
                        }
                    }
                }
            }
            for t1 in 0..self.n1 {
                for t2 in 0..self.n2 {
                    for r2 in 0..self.n2 {
                        if self.u(1, t2, self.at(choice, t1, r2)) > self.u(1, t2, self.at(choice, t1, t2)) {
                            return false;
                        }
                    }
                }
            }
            true
        }

        pub fn bayes_nash_truthful(&self, choice: &[usize]) -> bool {
            let (p1, p2) = (&self.data.priors()[0], &self.data.priors()[1]);
            for t1 in 0..self.n1 {
                for r1 in 0..self.n1 {
                    let mut gain = BigRational::zero();
                    for t2 in 0..self.n2 {
                        gain +=
                            &p2[t2] * (self.u(0, t1, self.at(choice, r1, t2)) - self.u(0, t1, self.at(choice, t1, t2)));
                    }
                    if gain > BigRational::zero() {
                        return false;
                    }
                }
            }
            for t2 in 0..self.n2 {
                for r2 in 0..self.n2 {
                    let mut gain = BigRational::zero();
                    for t1 in 0..self.n1 {
                        gain +=
                            &p1[t1] * (self.u(1, t2, self.at(choice, t1, r2)) - self.u(1, t2, self.at(choice, t1, t2)));
                    }
                    if gain > BigRational::zero() {
                        return false;
                    }
                }
            }
            true
        }

        pub fn welfare(&self, choice: &[usize]) -> BigRational {
            let (p1, p2) = (&self.data.priors()[0], &self.data.priors()[1]);
            let mut total = BigRational::zero();
            for t1 in 0..self.n1 {
                for t2 in 0..self.n2 {
                    let k = self.at(choice, t1, t2);
                    total += &p1[t1] * &p2[t2] * (self.u(0, t1, k) + self.u(1, t2, k));
                }
            }
            total
        }
    }
}
