//! Influence estimation followed by a least-squares refit on the points
//! whose normalised influence stays below `γ`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::instance::Instance;
use crate::geometry::{least_squares_fit, ModelKind, ParamVector};
use crate::influence::{exact_influence_full, sample_influence_classical, InfluenceVector};
use crate::mask::SubsetMask;
use crate::minimax::Dataset;
use crate::oracle::{BooleanOracle, FeasibilityOracle};
use crate::quantum::{build_oracle_table, bv_sample, fwht_spectrum, query_report, QueryReport};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Classical,
    Quantum,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "classical" => Ok(Method::Classical),
            "quantum" => Ok(Method::Quantum),
            other => Err(Error::usage(format!(
                "unknown method `{other}` (expected exact, classical or quantum)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub method: Method,
    /// Iterations of the sampled estimators; ignored by `Exact`.
    pub m: usize,
    pub gamma: f64,
    pub seed: u64,
    /// Overrides the instance threshold.
    pub eps: Option<f64>,
    pub max_exact_n: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            method: Method::Exact,
            m: 800,
            gamma: super::DEFAULT_GAMMA,
            seed: 0,
            eps: None,
            max_exact_n: crate::lattice::DEFAULT_MAX_EXACT_N,
        }
    }
}

/// Influences plus the cost of obtaining them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRun {
    pub influence: InfluenceVector,
    /// Logical oracle queries: table entries for the exact methods,
    /// `M (N + 1)` for the classical sampler, `M` for the quantum one.
    pub oracle_queries: u64,
    /// Minimax problems actually solved.
    pub solver_calls: u64,
}

pub fn estimate_influence(
    data: &Dataset,
    eps: f64,
    method: Method,
    m: usize,
    seed: u64,
    max_exact_n: usize,
) -> Result<InfluenceRun> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::usage(format!(
            "eps must be finite and >= 0, got {eps}"
        )));
    }
    let oracle = FeasibilityOracle::new(data, eps);
    match method {
        Method::Exact => {
            let (influence, stats) = exact_influence_full(&oracle, max_exact_n)?;
            Ok(InfluenceRun {
                influence,
                oracle_queries: stats.masks,
                solver_calls: stats.solver_calls,
            })
        }
        Method::Classical => {
            let k = data.kind().combinatorial_dim().min(oracle.len());
            let (influence, trace) = sample_influence_classical(&oracle, k, m, seed)?;
            Ok(InfluenceRun {
                influence,
                oracle_queries: trace.queries,
                solver_calls: trace.queries,
            })
        }
        Method::Quantum => {
            let table = build_oracle_table(&oracle, max_exact_n)?;
            let (influence, record) = bv_sample(&fwht_spectrum(&table), m, seed)?;
            Ok(InfluenceRun {
                influence,
                oracle_queries: record.queries,
                solver_calls: table.stats().solver_calls,
            })
        }
    }
}

/// Number of points with `r_i(x) ≤ eps`; points where `x` leaves the
/// positive-denominator region disagree.
pub fn consensus(data: &Dataset, x: &ParamVector, eps: f64) -> usize {
    if x.len() != data.kind().dim() {
        return 0;
    }
    data.forms()
        .iter()
        .filter(|f| f.residual(x.as_slice()).is_ok_and(|r| r <= eps))
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub kind: ModelKind,
    pub n: usize,
    pub eps: f64,
    pub method: Method,
    /// Sampled-estimator iterations; absent for `Exact`.
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub gamma: f64,
    pub alphas: Vec<f64>,
    pub alphas_normalized: Vec<f64>,
    /// `alphas_normalized[i] ≤ gamma`.
    pub inlier_mask: Vec<bool>,
    pub params: ParamVector,
    pub consensus: usize,
    pub oracle_queries: u64,
    pub solver_calls: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_true: Option<Vec<bool>>,
    /// Wall-clock time; kept out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl FitReport {
    /// Fraction of points whose predicted label matches the ground truth.
    pub fn label_accuracy(&self) -> Option<f64> {
        let truth = self.labels_true.as_ref()?;
        let hits = truth
            .iter()
            .zip(&self.inlier_mask)
            .filter(|(a, b)| a == b)
            .count();
        Some(hits as f64 / truth.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// Points kept at threshold `gamma`.
pub fn threshold_mask(normalized: &[f64], gamma: f64) -> Vec<bool> {
    normalized.iter().map(|&a| a <= gamma).collect()
}

pub fn robust_fit(instance: &Instance, opts: &FitOptions) -> Result<FitReport> {
    if !(opts.gamma > 0.0 && opts.gamma <= 1.0) {
        return Err(Error::usage(format!(
            "gamma must lie in (0, 1], got {}",
            opts.gamma
        )));
    }
    let start = Instant::now();
    let data = instance.dataset()?;
    let eps = opts.eps.unwrap_or(instance.eps);
    let run = estimate_influence(&data, eps, opts.method, opts.m, opts.seed, opts.max_exact_n)?;
    let normalized = run.influence.normalized();
    let inlier_mask = threshold_mask(&normalized, opts.gamma);
    let kept = inlier_mask.iter().filter(|&&b| b).count();
    let needed = instance.kind.min_fit_points();
    if kept < needed {
        return Err(Error::usage(format!(
            "only {kept} points have normalised influence <= {}, a {} fit needs {needed}; \
             try a larger gamma",
            opts.gamma,
            instance.kind.name()
        )));
    }
    let mask = SubsetMask::from_indices(
        instance.n(),
        inlier_mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i),
    )?;
    let params = least_squares_fit(instance.kind, &instance.points, &mask)?;
    let sampled = opts.method != Method::Exact;
    Ok(FitReport {
        kind: instance.kind,
        n: instance.n(),
        eps,
        method: opts.method,
        m: sampled.then_some(opts.m),
        seed: sampled.then_some(opts.seed),
        gamma: opts.gamma,
        consensus: consensus(&data, &params, eps),
        alphas: run.influence.alphas,
        alphas_normalized: normalized,
        inlier_mask,
        params,
        oracle_queries: run.oracle_queries,
        solver_calls: run.solver_calls,
        labels_true: instance.labels().map(<[bool]>::to_vec),
        elapsed: start.elapsed(),
    })
}

/// Query counts of both estimators at `M` iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub queries: QueryReport,
    /// The quantum column comes from the query model rather than a run when
    /// `N` exceeds the enumeration cap.
    pub quantum_simulated: bool,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut s = self.queries.to_table();
        if !self.quantum_simulated {
            s.push_str(&format!(
                "quantum column from the query model (N = {} is above the enumeration cap)\n",
                self.queries.n
            ));
        }
        s
    }
}

/// Runs the classical sampler for real and the circuit simulation whenever
/// the oracle table fits under `max_exact_n`.
pub fn bench(instance: &Instance, m: usize, seed: u64, max_exact_n: usize) -> Result<BenchReport> {
    let data = instance.dataset()?;
    let oracle = FeasibilityOracle::new(&data, instance.eps);
    let n = instance.n();
    let k = instance.kind.combinatorial_dim().min(n);
    let (_, trace) = sample_influence_classical(&oracle, k, m, seed)?;
    if n <= max_exact_n.min(crate::lattice::HARD_MAX_EXACT_N) {
        let table = build_oracle_table(&oracle, max_exact_n)?;
        let (_, record) = bv_sample(&fwht_spectrum(&table), m, seed)?;
        Ok(BenchReport {
            queries: query_report(&trace, &record)?,
            quantum_simulated: true,
        })
    } else {
        let mut queries = QueryReport::model(n, m, m);
        queries.classical_total = trace.queries;
        queries.ratio = trace.queries as f64 / queries.quantum_total as f64;
        Ok(BenchReport {
            queries,
            quantum_simulated: false,
        })
    }
}
