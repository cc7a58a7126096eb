use std::collections::BTreeSet;

use super::{Graph, KnapsackInstance, ReductionError};

/// Exhaustive oracles enumerate all 2^size subsets.
pub const MAX_ORACLE_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependentSetAnswer {
    pub yes: bool,
    /// A maximum independent set (first found in ascending bitmask order).
    pub maximum: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnapsackAnswer {
    pub yes: bool,
    /// A feasible subset of maximum value (first found in ascending bitmask order).
    pub best: BTreeSet<usize>,
    pub best_value: u64,
}

fn members(mask: u32, size: usize) -> BTreeSet<usize> {
    (0..size).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect()
}

pub fn brute_force_independent_set(g: &Graph, k: usize) -> Result<IndependentSetAnswer, ReductionError> {
    let n = g.n();
    if n > MAX_ORACLE_SIZE {
        return Err(ReductionError::TooLarge { size: n, max: MAX_ORACLE_SIZE });
    }
    let edge_masks: Vec<u32> = g.edges().map(|(i, j)| (1 << (i - 1)) | (1 << (j - 1))).collect();
    let mut best = 0u32;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() > best.count_ones() && edge_masks.iter().all(|&e| mask & e != e) {
            best = mask;
        }
    }
    Ok(IndependentSetAnswer { yes: best.count_ones() as usize >= k, maximum: members(best, n) })
}

pub fn brute_force_knapsack(inst: &KnapsackInstance) -> Result<KnapsackAnswer, ReductionError> {
    let items = inst.items();
    let m = items.len();
    if m > MAX_ORACLE_SIZE {
        return Err(ReductionError::TooLarge { size: m, max: MAX_ORACLE_SIZE });
    }
    let mut best = (0u32, 0u64);
    for mask in 0u32..(1 << m) {
        let (mut w, mut v) = (0u64, 0u64);
        for (b, &(wi, vi)) in items.iter().enumerate() {
            if mask >> b & 1 == 1 {
                w += wi;
                v += vi;
            }
        }
        if w <= inst.capacity() && v > best.1 {
            best = (mask, v);
        }
    }
    Ok(KnapsackAnswer { yes: best.1 >= inst.goal(), best: members(best.0, m), best_value: best.1 })
}
