//! The Boolean feasibility function `f` behind a trait, so that estimators
//! can run on geometric datasets and on synthetic test functions alike.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::geometry::ParamVector;
use crate::mask::SubsetMask;
use crate::minimax::{f_test_with, Dataset, SolverConfig};
use crate::Result;

/// Answer to one oracle query.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    /// `f(z) = 1`.
    pub infeasible: bool,
    /// Certificate for feasible subsets, when the oracle has one.
    pub witness: Option<ParamVector>,
}

/// Monotone Boolean function `f : {0,1}^N → {0,1}` with `f(∅) = 0`.
pub trait BooleanOracle: Sync {
    /// Population size `N`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inlier threshold, for oracles backed by data.
    fn eps(&self) -> Option<f64> {
        None
    }

    fn query(&self, z: &SubsetMask) -> Result<Query>;

    fn eval(&self, z: &SubsetMask) -> Result<bool> {
        Ok(self.query(z)?.infeasible)
    }

    /// True if point `i` fits the witness of a feasible subset, which makes
    /// the subset plus `i` feasible without another solve.
    fn witness_admits(&self, _witness: &ParamVector, _i: usize) -> bool {
        false
    }
}

/// Feasibility test over a geometric dataset at threshold `eps`.
pub struct FeasibilityOracle<'a> {
    data: &'a Dataset,
    eps: f64,
    config: SolverConfig,
    ambiguous: AtomicU64,
    warnings: AtomicU64,
}

impl<'a> FeasibilityOracle<'a> {
    pub fn new(data: &'a Dataset, eps: f64) -> Self {
        Self::with_config(data, eps, SolverConfig::default())
    }

    pub fn with_config(data: &'a Dataset, eps: f64, config: SolverConfig) -> Self {
        Self {
            data,
            eps,
            config,
            ambiguous: AtomicU64::new(0),
            warnings: AtomicU64::new(0),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        self.data
    }

    /// Queries whose minimax value fell within the tolerance of `eps`.
    pub fn boundary_ambiguities(&self) -> u64 {
        self.ambiguous.load(Ordering::Relaxed)
    }

    pub fn solver_warnings(&self) -> u64 {
        self.warnings.load(Ordering::Relaxed)
    }
}

impl BooleanOracle for FeasibilityOracle<'_> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn eps(&self) -> Option<f64> {
        Some(self.eps)
    }

    fn query(&self, z: &SubsetMask) -> Result<Query> {
        let v = f_test_with(self.data, z, self.eps, &self.config)?;
        if v.boundary_ambiguous {
            self.ambiguous.fetch_add(1, Ordering::Relaxed);
        }
        if v.solver_warning {
            self.warnings.fetch_add(1, Ordering::Relaxed);
        }
        Ok(Query {
            infeasible: v.infeasible,
            witness: v.witness,
        })
    }

    fn witness_admits(&self, witness: &ParamVector, i: usize) -> bool {
        self.data.forms()[i]
            .residual(witness.as_slice())
            .is_ok_and(|r| r <= self.eps)
    }
}

/// Oracle defined by a closure over masks.
pub struct FnOracle<F> {
    n: usize,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&SubsetMask) -> bool + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F> BooleanOracle for FnOracle<F>
where
    F: Fn(&SubsetMask) -> bool + Sync,
{
    fn len(&self) -> usize {
        self.n
    }

    fn query(&self, z: &SubsetMask) -> Result<Query> {
        Ok(Query {
            infeasible: (self.f)(z),
            witness: None,
        })
    }
}

/// Counts logical queries made through it.
pub struct CountingOracle<'a, O: ?Sized> {
    inner: &'a O,
    queries: AtomicU64,
}

impl<'a, O: BooleanOracle + ?Sized> CountingOracle<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            queries: AtomicU64::new(0),
        }
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }
}

impl<O: BooleanOracle + ?Sized> BooleanOracle for CountingOracle<'_, O> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn eps(&self) -> Option<f64> {
        self.inner.eps()
    }

    fn query(&self, z: &SubsetMask) -> Result<Query> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        self.inner.query(z)
    }

    fn witness_admits(&self, witness: &ParamVector, i: usize) -> bool {
        self.inner.witness_admits(witness, i)
    }
}
