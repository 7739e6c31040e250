//! Influence `α_i = Pr_z[f(z ⊕ e_i) ≠ f(z)]`: exact enumeration over the
//! whole lattice, exhaustive expectation over `k`-subsets, and the sampled
//! estimator that draws `k`-subsets at random.

use bitvec::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::{build_truth_table, LatticeStats};
use crate::mask::SubsetMask;
use crate::minimax::sample_k_subset;
use crate::oracle::{BooleanOracle, CountingOracle};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfluenceMethod {
    /// Enumeration of all `2^N` masks.
    ExactFull,
    /// Theorem-style sum of squared Fourier coefficients; same estimand as
    /// `ExactFull`.
    ExactFourier,
    /// Exhaustive expectation of the sampled estimator over all `k`-subsets.
    ExactKSubset {
        k: usize,
    },
    ClassicalSampled {
        m: usize,
        seed: u64,
    },
    QuantumSampled {
        m: usize,
        seed: u64,
    },
}

impl InfluenceMethod {
    pub fn label(&self) -> &'static str {
        match self {
            InfluenceMethod::ExactFull => "exact",
            InfluenceMethod::ExactFourier => "exact-fourier",
            InfluenceMethod::ExactKSubset { .. } => "exact-k-subset",
            InfluenceMethod::ClassicalSampled { .. } => "classical",
            InfluenceMethod::QuantumSampled { .. } => "quantum",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceVector {
    pub alphas: Vec<f64>,
    pub method: InfluenceMethod,
    pub eps: Option<f64>,
}

impl InfluenceVector {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn normalized(&self) -> Vec<f64> {
        normalize(&self.alphas)
    }
}

/// Per-iteration record of the sampled estimator.
#[derive(Clone, Debug)]
pub struct EstimatorTrace {
    /// `z^[m]`.
    pub masks: Vec<SubsetMask>,
    /// `X^[m]`, one bit per point.
    pub indicators: Vec<BitVec<u64, Lsb0>>,
    /// Logical oracle queries issued.
    pub queries: u64,
}

impl EstimatorTrace {
    pub fn iterations(&self) -> usize {
        self.masks.len()
    }

    pub fn population(&self) -> usize {
        self.masks.first().map_or(0, SubsetMask::len)
    }

    /// `α̂_i = (1/M) Σ_m X_i^[m]`.
    pub fn estimate(&self) -> Vec<f64> {
        let n = self.population();
        let m = self.iterations() as f64;
        let mut sums = vec![0u64; n];
        for x in &self.indicators {
            for i in x.iter_ones() {
                sums[i] += 1;
            }
        }
        sums.into_iter().map(|s| s as f64 / m).collect()
    }
}

fn influence_from_bits(table: &[bool], n: usize) -> Vec<f64> {
    let size = table.len();
    (0..n)
        .map(|i| {
            let flips = (0..size)
                .filter(|&t| table[t] != table[t ^ (1 << i)])
                .count();
            flips as f64 / size as f64
        })
        .collect()
}

/// Influence from a full truth table, `α_i = 2^{-N} |{t : f(t ⊕ e_i) ≠ f(t)}|`.
pub fn influence_from_table(table: &[bool]) -> Result<Vec<f64>> {
    if !table.len().is_power_of_two() {
        return Err(Error::usage("truth table length must be a power of two"));
    }
    Ok(influence_from_bits(
        table,
        table.len().trailing_zeros() as usize,
    ))
}

/// Exact influences over all `2^N` masks, built with monotone pruning.
pub fn exact_influence_full<O: BooleanOracle + ?Sized>(
    oracle: &O,
    cap: usize,
) -> Result<(InfluenceVector, LatticeStats)> {
    let (table, stats) = build_truth_table(oracle, cap)?;
    Ok((
        InfluenceVector {
            alphas: influence_from_bits(&table, oracle.len()),
            method: InfluenceMethod::ExactFull,
            eps: oracle.eps(),
        },
        stats,
    ))
}

/// `X^[m]` for one mask: which points flip `f` when toggled.
/// Issues exactly `N + 1` queries.
pub fn flip_indicators<O: BooleanOracle + ?Sized>(
    oracle: &O,
    z: &SubsetMask,
) -> Result<BitVec<u64, Lsb0>> {
    let n = oracle.len();
    let base = oracle.eval(z)?;
    let mut x = bitvec![u64, Lsb0; 0; n];
    let mut flipped = z.clone();
    for i in 0..n {
        flipped.flip_in_place(i);
        if oracle.eval(&flipped)? != base {
            x.set(i, true);
        }
        flipped.flip_in_place(i);
    }
    Ok(x)
}

/// Stream seed for iteration `m`: ChaCha with the user seed as key and the
/// iteration index as stream, so the draw is independent of scheduling.
pub(crate) fn iteration_rng(seed: u64, m: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(m);
    rng
}

/// Sampled estimator over uniformly random `k`-subsets.
///
/// Each iteration evaluates `f(z)` once and reuses it for every flip, so the
/// trace records exactly `M (N + 1)` queries. Iterations run in parallel;
/// results do not depend on the thread count.
pub fn sample_influence_classical<O: BooleanOracle + ?Sized>(
    oracle: &O,
    k: usize,
    m: usize,
    seed: u64,
) -> Result<(InfluenceVector, EstimatorTrace)> {
    let n = oracle.len();
    if m == 0 {
        return Err(Error::usage("the sampled estimator needs M >= 1"));
    }
    if k > n {
        return Err(Error::usage(format!(
            "combinatorial dimension k = {k} exceeds N = {n}"
        )));
    }
    let counter = CountingOracle::new(oracle);
    let rows: Vec<(SubsetMask, BitVec<u64, Lsb0>)> = (0..m as u64)
        .into_par_iter()
        .map(|it| {
            let mut rng = iteration_rng(seed, it);
            let z = sample_k_subset(n, k, &mut rng)?;
            let x = flip_indicators(&counter, &z)?;
            Ok((z, x))
        })
        .collect::<Result<_>>()?;
    let (masks, indicators) = rows.into_iter().unzip();
    let trace = EstimatorTrace {
        masks,
        indicators,
        queries: counter.queries(),
    };
    Ok((
        InfluenceVector {
            alphas: trace.estimate(),
            method: InfluenceMethod::ClassicalSampled { m, seed },
            eps: oracle.eps(),
        },
        trace,
    ))
}

/// Exhaustive expectation of the sampled estimator: the mean of `X_i` over
/// all `C(N, k)` subsets.
pub fn exact_influence_k_subset<O: BooleanOracle + ?Sized>(
    oracle: &O,
    k: usize,
) -> Result<InfluenceVector> {
    let n = oracle.len();
    if k > n {
        return Err(Error::usage(format!(
            "combinatorial dimension k = {k} exceeds N = {n}"
        )));
    }
    let subsets = k_subsets(n, k);
    let count = subsets.len() as f64;
    let sums = subsets
        .par_iter()
        .map(|idx| {
            let z = SubsetMask::from_indices(n, idx.iter().copied())?;
            flip_indicators(oracle, &z)
        })
        .try_fold(
            || vec![0u64; n],
            |mut acc, x| -> Result<Vec<u64>> {
                for i in x?.iter_ones() {
                    acc[i] += 1;
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
                Ok(a)
            },
        )?;
    Ok(InfluenceVector {
        alphas: sums.into_iter().map(|s| s as f64 / count).collect(),
        method: InfluenceMethod::ExactKSubset { k },
        eps: oracle.eps(),
    })
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    if k == 0 {
        return vec![Vec::new()];
    }
    loop {
        out.push(current.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] < n - k + i {
                current[i] += 1;
                for j in i + 1..k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Hoeffding lower bound on `Pr(|α̂_i − α_i| < δ)` after `M` samples,
/// `1 − 2 exp(−2 M δ²)`, clamped to `[0, 1]`.
pub fn hoeffding_bound(m: usize, delta: f64) -> f64 {
    (1.0 - 2.0 * (-2.0 * m as f64 * delta * delta).exp()).clamp(0.0, 1.0)
}

/// Fraction of points whose estimate lies strictly within `delta` of the
/// reference.
pub fn within_delta_fraction(
    est: &InfluenceVector,
    exact: &InfluenceVector,
    delta: f64,
) -> Result<f64> {
    if est.len() != exact.len() {
        return Err(Error::usage(format!(
            "influence vectors cover {} and {} points",
            est.len(),
            exact.len()
        )));
    }
    if let (Some(a), Some(b)) = (est.eps, exact.eps) {
        if a != b {
            return Err(Error::usage(format!(
                "influences computed at different thresholds ({a} vs {b})"
            )));
        }
    }
    if est.is_empty() {
        return Ok(1.0);
    }
    let hits = est
        .alphas
        .iter()
        .zip(&exact.alphas)
        .filter(|(a, b)| (*a - *b).abs() < delta)
        .count();
    Ok(hits as f64 / est.len() as f64)
}

/// Divides by the largest influence; an all-zero vector is returned as is.
pub fn normalize(alphas: &[f64]) -> Vec<f64> {
    let max = alphas.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        alphas.iter().map(|a| a / max).collect()
    } else {
        alphas.to_vec()
    }
}
