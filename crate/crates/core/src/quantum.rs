//! Classical simulation of the Bernstein-Vazirani influence circuit.
//!
//! After `H^{⊗N}`, the phase oracle `(−1)^{f(t)}` and `H^{⊗N}` again, the
//! top register holds `Σ_s I(s)|s⟩` with
//! `I(s) = 2^{-N} Σ_t (−1)^{f(t) + s·t}`, the normalised Walsh-Hadamard
//! transform of `(−1)^f`. The ancilla only contributes a global factor and
//! is not materialised. Measuring returns `s` with probability `I(s)²`, and
//! `Pr(s_i = 1)` is the influence of point `i`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::influence::{iteration_rng, EstimatorTrace, InfluenceMethod, InfluenceVector};
use crate::lattice::{build_truth_table, is_monotone, LatticeStats};
use crate::minimax::Dataset;
use crate::oracle::{BooleanOracle, FeasibilityOracle};
use crate::{Error, Result};
use rand::Rng;

/// Parseval tolerance for [`influence_from_spectrum`].
pub const PARSEVAL_TOL: f64 = 1e-9;

/// Truth table of the feasibility oracle over all `2^N` masks.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleTable {
    n: usize,
    eps: Option<f64>,
    bits: Vec<bool>,
    stats: LatticeStats,
}

impl OracleTable {
    /// Wraps an explicit table; it must be monotone with `f(∅) = 0`.
    pub fn from_bits(bits: Vec<bool>, eps: Option<f64>) -> Result<Self> {
        if !bits.len().is_power_of_two() {
            return Err(Error::usage("oracle table length must be a power of two"));
        }
        if bits[0] {
            return Err(Error::usage(
                "oracle table must mark the empty set feasible",
            ));
        }
        if !is_monotone(&bits) {
            return Err(Error::usage("oracle table is not monotone"));
        }
        Ok(Self {
            n: bits.len().trailing_zeros() as usize,
            eps,
            stats: LatticeStats {
                masks: bits.len() as u64,
                ..LatticeStats::default()
            },
            bits,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, t: usize) -> bool {
        self.bits[t]
    }

    /// Minimax solves and pruning counts spent building the table.
    pub fn stats(&self) -> &LatticeStats {
        &self.stats
    }

    /// One byte per entry (0 or 1) at `path`, header at `path.json`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.bits.iter().map(|&b| u8::from(b)).collect();
        fs::write(path, bytes)?;
        write_header(path, "table", "u8", self.n, self.eps)
    }
}

pub fn build_oracle_table<O: BooleanOracle + ?Sized>(
    oracle: &O,
    cap: usize,
) -> Result<OracleTable> {
    let (bits, stats) = build_truth_table(oracle, cap)?;
    Ok(OracleTable {
        n: oracle.len(),
        eps: oracle.eps(),
        bits,
        stats,
    })
}

/// Truth table of `f` for `data` at threshold `eps`.
pub fn build_dataset_table(data: &Dataset, eps: f64, cap: usize) -> Result<OracleTable> {
    build_oracle_table(&FeasibilityOracle::new(data, eps), cap)
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    #[serde(rename = "N")]
    n: usize,
    eps: Option<f64>,
    norm: String,
    content: String,
    dtype: String,
    endian: String,
}

fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_header(path: &Path, content: &str, dtype: &str, n: usize, eps: Option<f64>) -> Result<()> {
    let header = BinaryHeader {
        n,
        eps,
        norm: "2^-N".into(),
        content: content.into(),
        dtype: dtype.into(),
        endian: "little".into(),
    };
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::schema(e.to_string()))?;
    fs::write(header_path(path), json + "\n")?;
    Ok(())
}

/// In-place unnormalised Walsh-Hadamard butterfly; `v.len()` must be a power
/// of two.
pub fn fwht_in_place(v: &mut [f64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Amplitudes `I(s)` of the measured register; index `s` uses the same bit
/// layout as masks.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSpectrum {
    n: usize,
    eps: Option<f64>,
    coeffs: Vec<f64>,
}

impl FourierSpectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `Σ_s I(s)²`.
    pub fn parseval_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Little-endian `f64` array at `path`, header at `path.json`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.coeffs.len() * 8);
        for c in &self.coeffs {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        fs::write(path, bytes)?;
        write_header(path, "spectrum", "f64", self.n, self.eps)
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let header: BinaryHeader = serde_json::from_str(&fs::read_to_string(header_path(path))?)
            .map_err(|e| Error::schema(format!("{}: {e}", header_path(path).display())))?;
        if header.content != "spectrum" || header.dtype != "f64" || header.norm != "2^-N" {
            return Err(Error::schema(
                "header does not describe a 2^-N f64 spectrum",
            ));
        }
        let bytes = fs::read(path)?;
        if bytes.len() != 8 << header.n {
            return Err(Error::schema(format!(
                "spectrum file holds {} bytes, expected {}",
                bytes.len(),
                8usize << header.n
            )));
        }
        let coeffs = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            n: header.n,
            eps: header.eps,
            coeffs,
        })
    }
}

/// `I = 2^{-N} · WHT((−1)^f)`, in `O(N 2^N)`.
pub fn fwht_spectrum(table: &OracleTable) -> FourierSpectrum {
    let mut v: Vec<f64> = table
        .bits
        .iter()
        .map(|&b| if b { -1.0 } else { 1.0 })
        .collect();
    fwht_in_place(&mut v);
    let scale = 1.0 / v.len() as f64;
    v.iter_mut().for_each(|c| *c *= scale);
    FourierSpectrum {
        n: table.n,
        eps: table.eps,
        coeffs: v,
    }
}

/// `α_i = Σ_{s : s_i = 1} I(s)²`.
pub fn influence_from_spectrum(spec: &FourierSpectrum) -> Result<InfluenceVector> {
    let total = spec.parseval_sum();
    if (total - 1.0).abs() > PARSEVAL_TOL {
        return Err(Error::Consistency(format!(
            "spectrum violates Parseval: Σ I(s)² = {total}"
        )));
    }
    let mut alphas = vec![0.0; spec.n];
    for (s, c) in spec.coeffs.iter().enumerate() {
        let p = c * c;
        let mut bits = s;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            alphas[i] += p;
            bits &= bits - 1;
        }
    }
    Ok(InfluenceVector {
        alphas,
        method: InfluenceMethod::ExactFourier,
        eps: spec.eps,
    })
}

/// Measurement outcomes of `M` independent circuit runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementRecord {
    pub n: usize,
    /// `s^[m]` as packed indices.
    pub samples: Vec<u64>,
    /// Logical `U_f` invocations, one per run.
    pub queries: u64,
    pub seed: u64,
}

/// Draws from `I(s)²` by inverse CDF. Draw `m` uses its own random stream,
/// so batches can be split arbitrarily.
pub struct MeasurementSampler {
    n: usize,
    eps: Option<f64>,
    cdf: Vec<f64>,
}

impl MeasurementSampler {
    pub fn new(spec: &FourierSpectrum) -> Self {
        let mut acc = 0.0;
        let cdf = spec
            .coeffs
            .iter()
            .map(|c| {
                acc += c * c;
                acc
            })
            .collect();
        Self {
            n: spec.n,
            eps: spec.eps,
            cdf,
        }
    }

    /// First index whose cumulative mass exceeds `u · total`; ties go to the
    /// lower index and zero-probability outcomes are never returned.
    pub fn outcome(&self, u: f64) -> u64 {
        let total = *self.cdf.last().expect("non-empty spectrum");
        let target = u * total;
        let idx = self.cdf.partition_point(|&c| c <= target);
        idx.min(self.cdf.len() - 1) as u64
    }

    pub fn draw(&self, seed: u64, m: u64) -> u64 {
        self.outcome(iteration_rng(seed, m).random::<f64>())
    }

    pub fn sample(&self, m: usize, seed: u64) -> Result<(InfluenceVector, MeasurementRecord)> {
        if m == 0 {
            return Err(Error::usage("the quantum estimator needs M >= 1"));
        }
        let samples: Vec<u64> = (0..m as u64)
            .into_par_iter()
            .map(|it| self.draw(seed, it))
            .collect();
        let mut counts = vec![0u64; self.n];
        for &s in &samples {
            let mut bits = s;
            while bits != 0 {
                counts[bits.trailing_zeros() as usize] += 1;
                bits &= bits - 1;
            }
        }
        let alphas = counts.into_iter().map(|c| c as f64 / m as f64).collect();
        Ok((
            InfluenceVector {
                alphas,
                method: InfluenceMethod::QuantumSampled { m, seed },
                eps: self.eps,
            },
            MeasurementRecord {
                n: self.n,
                samples,
                queries: m as u64,
                seed,
            },
        ))
    }
}

/// Runs the circuit `M` times and averages the measured bits.
pub fn bv_sample(
    spec: &FourierSpectrum,
    m: usize,
    seed: u64,
) -> Result<(InfluenceVector, MeasurementRecord)> {
    MeasurementSampler::new(spec).sample(m, seed)
}

/// Logical oracle-query accounting for the two estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub n: usize,
    pub classical_iterations: usize,
    pub quantum_iterations: usize,
    /// `N + 1` with `f(z)` cached across the flips.
    pub classical_per_iteration: u64,
    pub classical_total: u64,
    /// `N M`, counting only the flipped evaluations.
    pub classical_total_nm: u64,
    pub quantum_per_iteration: u64,
    pub quantum_total: u64,
    /// `classical_total / quantum_total`; `N + 1` for equal `M`.
    pub ratio: f64,
    /// `classical_total_nm / quantum_total`; `N` for equal `M`.
    pub ratio_nm: f64,
}

impl QueryReport {
    /// Accounting implied by the query model alone.
    pub fn model(n: usize, classical_m: usize, quantum_m: usize) -> Self {
        let classical_total = classical_m as u64 * (n as u64 + 1);
        let classical_total_nm = classical_m as u64 * n as u64;
        let quantum_total = quantum_m as u64;
        Self {
            n,
            classical_iterations: classical_m,
            quantum_iterations: quantum_m,
            classical_per_iteration: n as u64 + 1,
            classical_total,
            classical_total_nm,
            quantum_per_iteration: 1,
            quantum_total,
            ratio: classical_total as f64 / quantum_total as f64,
            ratio_nm: classical_total_nm as f64 / quantum_total as f64,
        }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("N = {}\n", self.n));
        out.push_str("estimator             M        per-iter       total\n");
        out.push_str(&format!(
            "classical (N+1)  {:>6}  {:>14}  {:>10}\n",
            self.classical_iterations, self.classical_per_iteration, self.classical_total
        ));
        out.push_str(&format!(
            "classical (N)    {:>6}  {:>14}  {:>10}\n",
            self.classical_iterations, self.n, self.classical_total_nm
        ));
        out.push_str(&format!(
            "quantum          {:>6}  {:>14}  {:>10}\n",
            self.quantum_iterations, self.quantum_per_iteration, self.quantum_total
        ));
        out.push_str(&format!(
            "ratio (N+1 accounting) = {}\n",
            fmt_ratio(self.ratio)
        ));
        out.push_str(&format!(
            "ratio (N accounting)   = {}\n",
            fmt_ratio(self.ratio_nm)
        ));
        out
    }
}

fn fmt_ratio(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{r:.0}")
    } else {
        format!("{r:.4}")
    }
}

/// Compares the logical queries recorded by both estimators on one instance.
pub fn query_report(
    classical: &EstimatorTrace,
    quantum: &MeasurementRecord,
) -> Result<QueryReport> {
    let n = classical.population();
    if n != quantum.n {
        return Err(Error::usage(format!(
            "classical trace covers {n} points, quantum record {}",
            quantum.n
        )));
    }
    let m = classical.iterations();
    let mut report = QueryReport::model(n, m, quantum.samples.len());
    report.classical_total = classical.queries;
    report.quantum_total = quantum.queries;
    report.ratio = classical.queries as f64 / quantum.queries as f64;
    report.ratio_nm = report.classical_total_nm as f64 / quantum.queries as f64;
    Ok(report)
}
