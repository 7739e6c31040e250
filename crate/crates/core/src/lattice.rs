//! Full truth table of a monotone oracle, enumerated level by level from the
//! empty set upward.
//!
//! A mask is only sent to the oracle when every immediate subset is
//! feasible: one infeasible subset already makes it infeasible. A feasible
//! subset's witness that also fits the added point certifies the mask
//! without a solve.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::ParamVector;
use crate::mask::SubsetMask;
use crate::oracle::BooleanOracle;
use crate::{Error, Result};

/// Default cap on `N` for full enumeration.
pub const DEFAULT_MAX_EXACT_N: usize = 20;
/// Hard ceiling regardless of configuration (table memory).
pub const HARD_MAX_EXACT_N: usize = 30;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeStats {
    /// Masks in the lattice, `2^N`.
    pub masks: u64,
    /// Oracle (minimax) evaluations.
    pub solver_calls: u64,
    /// Masks settled by an infeasible immediate subset.
    pub pruned_infeasible: u64,
    /// Masks settled by reusing a subset's witness.
    pub witness_reuse: u64,
    /// Masks settled because the full set was feasible.
    pub pruned_feasible: u64,
}

pub(crate) fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap.min(HARD_MAX_EXACT_N) {
        return Err(Error::usage(format!(
            "N = {n} exceeds the exact-enumeration cap of {} (raise it with RFIT_MAX_EXACT_N, \
             or use the sampled estimator)",
            cap.min(HARD_MAX_EXACT_N)
        )));
    }
    Ok(())
}

enum Settled {
    Pruned,
    Reused(ParamVector),
    Solved(bool, Option<ParamVector>),
}

/// `table[t] = f(t)` for every `t ∈ [0, 2^N)`, bit `i` of `t` being point `i`.
pub fn build_truth_table<O: BooleanOracle + ?Sized>(
    oracle: &O,
    cap: usize,
) -> Result<(Vec<bool>, LatticeStats)> {
    let n = oracle.len();
    check_cap(n, cap)?;
    let size = 1usize << n;
    let mut stats = LatticeStats {
        masks: size as u64,
        ..LatticeStats::default()
    };
    let mut table = vec![false; size];
    if n == 0 {
        return Ok((table, stats));
    }

    let full = oracle.query(&SubsetMask::full(n))?;
    stats.solver_calls += 1;
    if !full.infeasible {
        stats.pruned_feasible = size as u64 - 1;
        return Ok((table, stats));
    }

    let mut levels: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for t in 0..size as u32 {
        levels[t.count_ones() as usize].push(t);
    }

    let mut witnesses: HashMap<u32, ParamVector> = HashMap::new();
    for level in levels.iter().skip(1) {
        let settled: Vec<(u32, bool, Settled)> = level
            .par_iter()
            .map(|&t| -> Result<(u32, bool, Settled)> {
                let bits = (0..n).filter(|i| t >> i & 1 == 1);
                if bits.clone().any(|i| table[(t ^ (1 << i)) as usize]) {
                    return Ok((t, true, Settled::Pruned));
                }
                for i in bits {
                    if let Some(w) = witnesses.get(&(t ^ (1 << i))) {
                        if oracle.witness_admits(w, i) {
                            return Ok((t, false, Settled::Reused(w.clone())));
                        }
                    }
                }
                if t as usize == size - 1 {
                    return Ok((t, true, Settled::Pruned));
                }
                let q = oracle.query(&SubsetMask::from_index(t as u64, n))?;
                Ok((t, q.infeasible, Settled::Solved(q.infeasible, q.witness)))
            })
            .collect::<Result<_>>()?;

        witnesses.clear();
        for (t, infeasible, how) in settled {
            table[t as usize] = infeasible;
            match how {
                Settled::Pruned => {
                    if t as usize != size - 1 {
                        stats.pruned_infeasible += 1;
                    }
                }
                Settled::Reused(w) => {
                    stats.witness_reuse += 1;
                    witnesses.insert(t, w);
                }
                Settled::Solved(infeasible, w) => {
                    stats.solver_calls += 1;
                    if let (false, Some(w)) = (infeasible, w) {
                        witnesses.insert(t, w);
                    }
                }
            }
        }
    }
    Ok((table, stats))
}

/// Direct evaluation of every mask, no pruning. Test and benchmark baseline.
pub fn build_truth_table_naive<O: BooleanOracle + ?Sized>(
    oracle: &O,
    cap: usize,
) -> Result<Vec<bool>> {
    let n = oracle.len();
    check_cap(n, cap)?;
    (0..1u64 << n)
        .into_par_iter()
        .map(|t| oracle.eval(&SubsetMask::from_index(t, n)))
        .collect()
}

/// True if `t ⊆ t'` implies `table[t] ≤ table[t']`.
pub fn is_monotone(table: &[bool]) -> bool {
    let n = table.len().trailing_zeros();
    (0..table.len()).all(|t| {
        (0..n).all(|i| {
            let up = t | 1 << i;
            !table[t] || table[up]
        })
    })
}
