//! Minimax fitting `g(C) = min_x max_{i∈C} r_i(x)` over quasiconvex
//! fractional residuals, and the Boolean feasibility test built on it.
//!
//! Vertical-distance line residuals are solved exactly (Chebyshev
//! equioscillation over triples). Every other form goes through bisection
//! on the residual level, where each level is a second-order-cone
//! feasibility problem
//!
//! ```text
//! min_{x,s} s   subject to   ‖A_i x + b_i‖ ≤ α (c_iᵀx + d_i) + s
//! ```
//!
//! solved with a log-barrier Newton method. The level is feasible iff the
//! optimal `s` is at most the feasibility slack. The program is posed in
//! homogeneous coordinates, so subsets whose best fit lies at infinity (a
//! homography whose bottom-right entry tends to zero) still get a value.

use std::borrow::Borrow;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::geometry::{to_fractional_forms, DataPoint, FractionalForm, ModelKind, ParamVector};
use crate::mask::SubsetMask;
use crate::{Error, Result};

/// Bisection width `τ_g`.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Feasibility slack `σ`.
pub const FEASIBILITY_SLACK: f64 = 1e-8;
/// Witnesses with a smaller denominator are rejected as degenerate.
pub const MIN_WITNESS_DENOMINATOR: f64 = 1e-9;

const FEASIBILITY_RESTARTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub slack: f64,
    /// Newton iterations allowed per feasibility level.
    pub newton_budget: usize,
    /// Upper-level doublings before giving up on bracketing.
    pub max_doublings: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            slack: FEASIBILITY_SLACK,
            newton_budget: 2000,
            max_doublings: 60,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Closed-form Chebyshev solution passed its optimality check.
    Exact,
    /// Bisection result; `warning` means some level hit the Newton budget and
    /// the value is only an upper bound.
    Bisection {
        iterations: usize,
        warning: bool,
    },
    EmptySet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxResult {
    pub value: f64,
    /// Empty for [`SolveStatus::EmptySet`].
    pub witness: ParamVector,
    pub status: SolveStatus,
}

impl MinimaxResult {
    pub fn has_warning(&self) -> bool {
        matches!(self.status, SolveStatus::Bisection { warning: true, .. })
    }
}

/// Solves the minimax problem over `forms` to within `tol`.
pub fn solve_minimax<F: Borrow<FractionalForm>>(forms: &[F], tol: f64) -> Result<MinimaxResult> {
    solve_minimax_with(forms, &SolverConfig::with_tol(tol))
}

pub fn solve_minimax_with<F: Borrow<FractionalForm>>(
    forms: &[F],
    config: &SolverConfig,
) -> Result<MinimaxResult> {
    validate(forms, config)?;
    if forms.is_empty() {
        return Ok(empty_result());
    }
    if let Some(points) = line_points(forms) {
        if let Some(res) = chebyshev_line(&points) {
            return Ok(res);
        }
    }
    solve_minimax_bisection_with(forms, config)
}

/// Forces the bisection path, regardless of the residual family.
pub fn solve_minimax_bisection<F: Borrow<FractionalForm>>(
    forms: &[F],
    tol: f64,
) -> Result<MinimaxResult> {
    solve_minimax_bisection_with(forms, &SolverConfig::with_tol(tol))
}

pub fn solve_minimax_bisection_with<F: Borrow<FractionalForm>>(
    forms: &[F],
    config: &SolverConfig,
) -> Result<MinimaxResult> {
    validate(forms, config)?;
    if forms.is_empty() {
        return Ok(empty_result());
    }
    let program = ConeProgram::new(forms);
    let mut warning = false;
    let mut iterations = 0usize;

    let seed = program.seed(forms);
    let (mut hi, mut witness) = match program.max_residual(&seed) {
        Some(r) => (r, seed),
        None => {
            let mut alpha = 1.0;
            let mut found = None;
            for _ in 0..=config.max_doublings {
                iterations += 1;
                let outcome = program.feasibility(alpha, &seed, config);
                warning |= outcome.exhausted;
                if let Some(x) = outcome.witness(&program, config) {
                    let r = program.max_residual(&x).unwrap_or(alpha);
                    found = Some((r, x));
                    break;
                }
                alpha *= 2.0;
            }
            found.ok_or(Error::Unbounded { alpha_hi: alpha })?
        }
    };

    let mut lo = 0.0f64;
    while hi - lo > config.tol {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let outcome = program.feasibility(mid, &witness, config);
        warning |= outcome.exhausted;
        match outcome.witness(&program, config) {
            Some(x) => {
                let r = program
                    .max_residual(&x)
                    .expect("witness has positive denominators");
                if r < hi {
                    hi = r;
                    witness = x;
                } else {
                    // slack-feasible without improving the incumbent
                    lo = lo.max(mid.min(hi - config.tol));
                }
            }
            None => lo = mid,
        }
    }
    Ok(MinimaxResult {
        value: hi,
        witness: ParamVector(program.unscale(&witness)),
        status: SolveStatus::Bisection {
            iterations,
            warning,
        },
    })
}

fn empty_result() -> MinimaxResult {
    MinimaxResult {
        value: 0.0,
        witness: ParamVector(Vec::new()),
        status: SolveStatus::EmptySet,
    }
}

fn validate<F: Borrow<FractionalForm>>(forms: &[F], config: &SolverConfig) -> Result<()> {
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(Error::usage("minimax tolerance must be positive"));
    }
    if let Some(first) = forms.first() {
        let d = first.borrow().dim();
        if forms.iter().any(|f| f.borrow().dim() != d) {
            return Err(Error::usage("fractional forms of mixed dimension"));
        }
    }
    Ok(())
}

fn line_points<F: Borrow<FractionalForm>>(forms: &[F]) -> Option<Vec<(f64, f64)>> {
    forms.iter().map(|f| f.borrow().as_line_point()).collect()
}

/// Chebyshev fit of a line through at most three points, `(g, [slope, intercept])`.
fn chebyshev_triple(pts: &mut [(f64, f64)]) -> (f64, [f64; 2]) {
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let through = |p: (f64, f64), q: (f64, f64)| -> [f64; 2] {
        let slope = (q.1 - p.1) / (q.0 - p.0);
        [slope, p.1 - slope * p.0]
    };
    match *pts {
        [(_, b)] => (0.0, [0.0, b]),
        [p, q] if p.0 == q.0 => ((p.1 - q.1).abs() / 2.0, [0.0, 0.5 * (p.1 + q.1)]),
        [p, q] => (0.0, through(p, q)),
        [p, _, r] if p.0 == r.0 => {
            let (lo, hi) = pts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.1), hi.max(p.1))
                });
            ((hi - lo) / 2.0, [0.0, 0.5 * (lo + hi)])
        }
        [p, q, r] if p.0 == q.0 => (
            (p.1 - q.1).abs() / 2.0,
            through((p.0, 0.5 * (p.1 + q.1)), r),
        ),
        [p, q, r] if q.0 == r.0 => (
            (q.1 - r.1).abs() / 2.0,
            through(p, (q.0, 0.5 * (q.1 + r.1))),
        ),
        [p, q, r] => {
            // Equioscillation: shift the chord through the outer points by half
            // the middle point's offset.
            let chord = through(p, r);
            let e = q.1 - (chord[0] * q.0 + chord[1]);
            (e.abs() / 2.0, [chord[0], chord[1] + e / 2.0])
        }
        _ => unreachable!("at most three points"),
    }
}

/// Exact line minimax: the combinatorial dimension is three, so `g(C)` is the
/// largest triple value and the maximising triple's fit is a witness.
/// Returns `None` when the witness check fails (repeated abscissae).
fn chebyshev_line(points: &[(f64, f64)]) -> Option<MinimaxResult> {
    let n = points.len();
    let (value, line) = if n <= 3 {
        chebyshev_triple(&mut points.to_vec())
    } else {
        let mut best = (f64::NEG_INFINITY, [0.0; 2]);
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let cand = chebyshev_triple(&mut [points[i], points[j], points[k]]);
                    if cand.0 > best.0 {
                        best = cand;
                    }
                }
            }
        }
        best
    };
    let scale = points
        .iter()
        .map(|p| p.0.abs().max(p.1.abs()))
        .fold(1.0, f64::max);
    let worst = points
        .iter()
        .map(|&(a, b)| (line[0] * a + line[1] - b).abs())
        .fold(0.0, f64::max);
    (worst <= value + 1e-12 * scale).then(|| MinimaxResult {
        value,
        witness: ParamVector(line.to_vec()),
        status: SolveStatus::Exact,
    })
}

/// Forms in homogeneous coordinates. With `z = (S x̂, κ)` the residual
/// `‖Â z‖ / ĉᵀz` equals `r(x)` for `x = x̂ / κ` whenever `κ > 0`, so the
/// program works on the slice `ℓᵀz = 1` (`ℓ` the mean of the `ĉ_i`),
/// parametrised as `z = z₀ + Q y` with `Q` an orthonormal basis of `ℓ^⊥`.
/// The slice is bounded, so optima with `κ → 0` (parameters running off to
/// infinity) are still attained; `κ > 0` is kept by a barrier term.
struct ConeProgram {
    d: usize,
    /// Column scales of `x` and of the homogeneous coordinate.
    scale: Vec<f64>,
    scale_h: f64,
    z0: Vec<f64>,
    /// Row-major `(d+1) × d`.
    basis: Vec<f64>,
    cones: Vec<Cone>,
}

struct Cone {
    /// Row-major `m × d`.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d0: f64,
}

impl Cone {
    fn rows(&self) -> usize {
        self.b.len()
    }

    fn numerator(&self, y: &[f64]) -> f64 {
        let d = y.len();
        (0..self.rows())
            .map(|r| {
                let v = self.b[r] + dot(&self.a[r * d..(r + 1) * d], y);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    fn denominator(&self, y: &[f64]) -> f64 {
        self.d0 + dot(&self.c, y)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct FeasibilityOutcome {
    /// Best iterate `(y, s)`.
    y: Vec<f64>,
    s: f64,
    verdict: Verdict,
    exhausted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Verdict {
    Feasible,
    Infeasible { lower: f64 },
    Undecided,
}

impl FeasibilityOutcome {
    /// The iterate if it certifies the level and has usable denominators.
    fn witness(&self, program: &ConeProgram, config: &SolverConfig) -> Option<Vec<f64>> {
        let accept = match self.verdict {
            Verdict::Feasible => true,
            Verdict::Infeasible { .. } => false,
            Verdict::Undecided => self.s <= config.slack,
        };
        (accept && program.usable(&self.y)).then(|| self.y.clone())
    }
}

impl ConeProgram {
    fn new<F: Borrow<FractionalForm>>(forms: &[F]) -> Self {
        let d = forms[0].borrow().dim();
        let dh = d + 1;
        let mut col_max = vec![0.0f64; dh];
        for f in forms {
            let f = f.borrow();
            for r in 0..f.rows() {
                for (j, m) in col_max[..d].iter_mut().enumerate() {
                    *m = m.max(f.a()[(r, j)].abs());
                }
                col_max[d] = col_max[d].max(f.b()[r].abs());
            }
            for (m, c) in col_max.iter_mut().zip(f.c().iter()) {
                *m = m.max(c.abs());
            }
            col_max[d] = col_max[d].max(f.d0().abs());
        }
        let col_scale: Vec<f64> = col_max
            .iter()
            .map(|&m| if m > 0.0 { 1.0 / m } else { 1.0 })
            .collect();

        // homogeneous rows [A S | b s_h] and [cᵀS | d₀ s_h]
        let lifted: Vec<(Vec<f64>, Vec<f64>)> = forms
            .iter()
            .map(|f| {
                let f = f.borrow();
                let m = f.rows();
                let mut a = vec![0.0; m * dh];
                for r in 0..m {
                    for j in 0..d {
                        a[r * dh + j] = f.a()[(r, j)] * col_scale[j];
                    }
                    a[r * dh + d] = f.b()[r] * col_scale[d];
                }
                let mut c: Vec<f64> = (0..d).map(|j| f.c()[j] * col_scale[j]).collect();
                c.push(f.d0() * col_scale[d]);
                (a, c)
            })
            .collect();

        let mut ell = vec![0.0; dh];
        for (_, c) in &lifted {
            for (e, v) in ell.iter_mut().zip(c) {
                *e += v / lifted.len() as f64;
            }
        }
        let norm2 = dot(&ell, &ell);
        let (z0, basis) = if norm2 > 0.0 {
            (
                ell.iter().map(|e| e / norm2).collect(),
                complement_basis(&ell),
            )
        } else {
            // no denominator information; fall back to the affine chart
            let mut z0 = vec![0.0; dh];
            z0[d] = 1.0;
            let mut basis = vec![0.0; dh * d];
            for j in 0..d {
                basis[j * d + j] = 1.0;
            }
            (z0, basis)
        };

        let cones = lifted
            .into_iter()
            .map(|(a, c)| {
                let m = a.len() / dh;
                let mut ay = vec![0.0; m * d];
                let mut b = vec![0.0; m];
                for r in 0..m {
                    let row = &a[r * dh..(r + 1) * dh];
                    b[r] = dot(row, &z0);
                    for k in 0..d {
                        ay[r * d + k] = (0..dh).map(|j| row[j] * basis[j * d + k]).sum();
                    }
                }
                Cone {
                    a: ay,
                    b,
                    c: (0..d)
                        .map(|k| (0..dh).map(|j| c[j] * basis[j * d + k]).sum())
                        .collect(),
                    d0: dot(&c, &z0),
                }
            })
            .collect();
        Self {
            d,
            scale: col_scale[..d].to_vec(),
            scale_h: col_scale[d],
            z0,
            basis,
            cones,
        }
    }

    fn lift(&self, y: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..=d)
            .map(|j| self.z0[j] + dot(&self.basis[j * d..(j + 1) * d], y))
            .collect()
    }

    /// Homogeneous coordinate `κ(y)`.
    fn kappa(&self, y: &[f64]) -> f64 {
        let d = self.d;
        self.z0[d] + dot(&self.basis[d * d..(d + 1) * d], y)
    }

    fn kappa_gradient(&self) -> &[f64] {
        &self.basis[self.d * self.d..]
    }

    /// Model parameters at `y`; requires `κ(y) > 0`.
    fn unscale(&self, y: &[f64]) -> Vec<f64> {
        let z = self.lift(y);
        let kappa = z[self.d];
        (0..self.d)
            .map(|j| z[j] * self.scale[j] / (kappa * self.scale_h))
            .collect()
    }

    /// `y` on the slice representing parameters `x`, if `x` has a positive
    /// mean denominator.
    fn project(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = self.d;
        let mut z: Vec<f64> = x.iter().zip(&self.scale).map(|(x, s)| x / s).collect();
        z.push(1.0 / self.scale_h);
        let ell: Vec<f64> = {
            let norm2 = dot(&self.z0, &self.z0);
            self.z0.iter().map(|v| v / norm2).collect()
        };
        let level = dot(&ell, &z);
        if level.is_nan() || level <= 0.0 {
            return None;
        }
        z.iter_mut().for_each(|v| *v /= level);
        let y: Vec<f64> = (0..d)
            .map(|k| {
                (0..=d)
                    .map(|j| self.basis[j * d + k] * (z[j] - self.z0[j]))
                    .sum()
            })
            .collect();
        (self.kappa(&y) > 0.0 && y.iter().all(|v| v.is_finite())).then_some(y)
    }

    /// Point of the slice with `κ > 0`: along the projection of the
    /// homogeneous axis onto the slice directions.
    fn interior_point(&self) -> Vec<f64> {
        let g = self.kappa_gradient();
        let k0 = self.kappa(&vec![0.0; self.d]);
        let gg = dot(g, g);
        if k0 > 0.0 || gg == 0.0 {
            return vec![0.0; self.d];
        }
        let step = (1.0 - k0) / gg;
        g.iter().map(|v| v * step).collect()
    }

    /// Denominators of every form at `y` in parameter units, if usable.
    fn usable(&self, y: &[f64]) -> bool {
        let kappa = self.kappa(y);
        kappa > 0.0
            && self
                .cones
                .iter()
                .all(|c| c.denominator(y) / kappa >= MIN_WITNESS_DENOMINATOR * self.scale_h)
    }

    /// `max_i r_i(y)`, or `None` if some denominator is not usable.
    fn max_residual(&self, y: &[f64]) -> Option<f64> {
        self.usable(y).then(|| {
            self.cones
                .iter()
                .map(|c| c.numerator(y) / c.denominator(y))
                .fold(0.0, f64::max)
        })
    }

    /// Start point: the ridge-regularised minimiser of `Σ ‖A_i x + b_i‖²`
    /// when it has a positive mean denominator.
    fn seed<F: Borrow<FractionalForm>>(&self, forms: &[F]) -> Vec<f64> {
        let d = self.d;
        let mut ata = DMatrix::<f64>::zeros(d, d);
        let mut atb = DVector::<f64>::zeros(d);
        for f in forms {
            let f = f.borrow();
            for r in 0..f.rows() {
                for i in 0..d {
                    let ai = f.a()[(r, i)] * self.scale[i];
                    atb[i] -= ai * f.b()[r];
                    for j in 0..d {
                        ata[(i, j)] += ai * f.a()[(r, j)] * self.scale[j];
                    }
                }
            }
        }
        let ridge = 1e-9 * (ata.trace() / d as f64).max(1e-12);
        for i in 0..d {
            ata[(i, i)] += ridge;
        }
        ata.cholesky()
            .map(|ch| {
                ch.solve(&atb)
                    .iter()
                    .zip(&self.scale)
                    .map(|(v, s)| v * s)
                    .collect::<Vec<f64>>()
            })
            .and_then(|x| self.project(&x))
            .unwrap_or_else(|| self.interior_point())
    }

    /// `max_i (‖A_i y + b_i‖ − α D_i(y))`.
    fn gap(&self, alpha: f64, y: &[f64]) -> f64 {
        self.cones
            .iter()
            .map(|c| c.numerator(y) - alpha * c.denominator(y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Barrier objective `t s − log κ − Σ log(u_i² − ‖r_i‖²)`; `None` outside
    /// the domain.
    fn barrier(&self, alpha: f64, t: f64, y: &[f64], s: f64) -> Option<f64> {
        let kappa = self.kappa(y);
        if kappa.is_nan() || kappa <= 0.0 {
            return None;
        }
        let mut total = t * s - kappa.ln();
        for c in &self.cones {
            let u = alpha * c.denominator(y) + s;
            let nr = c.numerator(y);
            if u <= 0.0 || u <= nr {
                return None;
            }
            let w = (u - nr) * (u + nr);
            if w.is_nan() || w <= 0.0 {
                return None;
            }
            total -= w.ln();
        }
        Some(total)
    }

    /// Decides whether level `alpha` is feasible, starting from `y0`; a run
    /// that spends its Newton budget without a verdict is continued from its
    /// last iterate.
    fn feasibility(&self, alpha: f64, y0: &[f64], config: &SolverConfig) -> FeasibilityOutcome {
        let mut outcome = self.feasibility_once(alpha, y0, config);
        for _ in 0..FEASIBILITY_RESTARTS {
            if !(outcome.exhausted && outcome.verdict == Verdict::Undecided) {
                break;
            }
            outcome = self.feasibility_once(alpha, &outcome.y, config);
        }
        outcome
    }

    fn feasibility_once(
        &self,
        alpha: f64,
        y0: &[f64],
        config: &SolverConfig,
    ) -> FeasibilityOutcome {
        let d = self.d;
        let nv = d + 1;
        let theta = 2.0 * self.cones.len() as f64 + 1.0;
        let mut y = y0.to_vec();

        let g0 = self.gap(alpha, &y);
        if g0 < 0.0 {
            return FeasibilityOutcome {
                y,
                s: g0,
                verdict: Verdict::Feasible,
                exhausted: false,
            };
        }
        let margin = g0.abs().max(1e-6);
        let mut s = g0 + margin;
        let mut t = theta / margin;

        let mut grad = vec![0.0; nv];
        let mut hess = DMatrix::<f64>::zeros(nv, nv);
        let mut du = vec![0.0; nv];
        let mut dw = vec![0.0; nv];
        let mut atr = vec![0.0; d];
        let mut r = [0.0; 2];
        let mut newton_steps = 0usize;

        loop {
            // centering
            let mut centered = false;
            let mut last_decrement = 0.0;
            loop {
                if newton_steps >= config.newton_budget {
                    return FeasibilityOutcome {
                        y,
                        s,
                        verdict: Verdict::Undecided,
                        exhausted: true,
                    };
                }
                newton_steps += 1;

                grad.iter_mut().for_each(|g| *g = 0.0);
                hess.fill(0.0);
                grad[d] = t;
                for c in &self.cones {
                    let m = c.rows();
                    for (row, rv) in r.iter_mut().enumerate().take(m) {
                        *rv = c.b[row] + dot(&c.a[row * d..(row + 1) * d], &y);
                    }
                    let u = alpha * c.denominator(&y) + s;
                    let rr: f64 = r[..m].iter().map(|v| v * v).sum();
                    let w = u * u - rr;
                    for j in 0..d {
                        atr[j] = (0..m).map(|row| c.a[row * d + j] * r[row]).sum();
                        du[j] = alpha * c.c[j];
                    }
                    du[d] = 1.0;
                    for j in 0..d {
                        dw[j] = 2.0 * u * du[j] - 2.0 * atr[j];
                    }
                    dw[d] = 2.0 * u;
                    let inv_w = 1.0 / w;
                    let inv_w2 = inv_w * inv_w;
                    for i in 0..nv {
                        grad[i] -= dw[i] * inv_w;
                        for j in 0..=i {
                            let mut h = dw[i] * dw[j] * inv_w2 - 2.0 * du[i] * du[j] * inv_w;
                            if i < d && j < d {
                                let ata: f64 =
                                    (0..m).map(|row| c.a[row * d + i] * c.a[row * d + j]).sum();
                                h += 2.0 * ata * inv_w;
                            }
                            hess[(i, j)] += h;
                        }
                    }
                }
                let kappa = self.kappa(&y);
                let kg = self.kappa_gradient();
                for i in 0..d {
                    grad[i] -= kg[i] / kappa;
                    for j in 0..=i {
                        hess[(i, j)] += kg[i] * kg[j] / (kappa * kappa);
                    }
                }
                for i in 0..nv {
                    for j in 0..i {
                        hess[(j, i)] = hess[(i, j)];
                    }
                }
                let step = match solve_spd(&mut hess, &grad) {
                    Some(step) => step,
                    None => {
                        return FeasibilityOutcome {
                            y,
                            s,
                            verdict: Verdict::Undecided,
                            exhausted: false,
                        }
                    }
                };
                let decrement = -dot(&grad, &step);
                if !decrement.is_finite() {
                    break;
                }
                last_decrement = decrement;
                if decrement <= 1e-10 {
                    centered = true;
                    break;
                }
                let f0 = self
                    .barrier(alpha, t, &y, s)
                    .expect("iterate stays in the barrier domain");
                let mut h = 1.0;
                let mut moved = false;
                while h > 1e-14 {
                    let yn: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + h * b).collect();
                    let sn = s + h * step[d];
                    if let Some(f) = self.barrier(alpha, t, &yn, sn) {
                        if f <= f0 - 0.25 * h * decrement {
                            y = yn;
                            s = sn;
                            moved = true;
                            break;
                        }
                    }
                    h *= 0.5;
                }
                if s < 0.0 {
                    return FeasibilityOutcome {
                        y,
                        s,
                        verdict: Verdict::Feasible,
                        exhausted: false,
                    };
                }
                // below 1e-6 the barrier values are at rounding level and the
                // line search stalls; the decrement enters the bound instead
                if decrement < 1e-6 {
                    centered = true;
                    break;
                }
                if !moved || h < 1e-10 {
                    break;
                }
            }
            if !centered {
                // the bound below only holds on the central path
                return FeasibilityOutcome {
                    y,
                    s,
                    verdict: Verdict::Undecided,
                    exhausted: false,
                };
            }

            let duality_gap = (theta + last_decrement) / t;
            let lower = s - duality_gap;
            if lower > config.slack {
                return FeasibilityOutcome {
                    y,
                    s,
                    verdict: Verdict::Infeasible { lower },
                    exhausted: false,
                };
            }
            if duality_gap < 0.1 * config.slack {
                let verdict = if s <= config.slack {
                    Verdict::Feasible
                } else {
                    Verdict::Infeasible { lower }
                };
                return FeasibilityOutcome {
                    y,
                    s,
                    verdict,
                    exhausted: false,
                };
            }
            t *= 8.0;
        }
    }
}

/// Orthonormal basis of the complement of `v` as a row-major
/// `len × (len − 1)` matrix, from the Householder reflection taking `v` to a
/// multiple of the coordinate axis it is most aligned with.
fn complement_basis(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let norm = dot(v, v).sqrt();
    let k = (0..n)
        .max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()))
        .expect("nonempty vector");
    let mut h: Vec<f64> = v.iter().map(|x| x / norm).collect();
    h[k] += h[k].signum();
    let hh = dot(&h, &h);
    let mut basis = vec![0.0; n * (n - 1)];
    for (col, j) in (0..n).filter(|&j| j != k).enumerate() {
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            basis[i * (n - 1) + col] = e - 2.0 * h[i] * h[j] / hh;
        }
    }
    basis
}

/// Solves `H x = −g` for symmetric positive semidefinite `H`, regularising
/// the diagonal until the Cholesky factorisation succeeds.
fn solve_spd(hess: &mut DMatrix<f64>, grad: &[f64]) -> Option<Vec<f64>> {
    let n = grad.len();
    let diag_max = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max);
    let mut reg = 1e-13 * diag_max.max(1e-300);
    let rhs = DVector::from_iterator(n, grad.iter().map(|g| -g));
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            let x = ch.solve(&rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x.iter().copied().collect());
            }
        }
        reg *= 100.0;
    }
    None
}

/// Decision problem "is `g(C) ≤ eps`?" for `forms`, without a full bisection.
struct Decision {
    infeasible: bool,
    value: Option<f64>,
    witness: Option<ParamVector>,
    ambiguous: bool,
    warning: bool,
}

fn decide<F: Borrow<FractionalForm>>(
    forms: &[F],
    eps: f64,
    config: &SolverConfig,
) -> Result<Decision> {
    if forms.is_empty() {
        return Ok(Decision {
            infeasible: false,
            value: Some(0.0),
            witness: None,
            ambiguous: false,
            warning: false,
        });
    }
    if let Some(points) = line_points(forms) {
        if let Some(res) = chebyshev_line(&points) {
            return Ok(Decision {
                infeasible: res.value > eps,
                value: Some(res.value),
                ambiguous: (res.value - eps).abs() < config.tol,
                witness: Some(res.witness),
                warning: false,
            });
        }
    }
    let program = ConeProgram::new(forms);
    let seed = program.seed(forms);
    let level = |alpha: f64, start: &[f64]| {
        let outcome = program.feasibility(alpha, start, config);
        let witness = outcome.witness(&program, config);
        (outcome, witness)
    };
    let (outcome, witness) = level(eps, &seed);
    let mut warning = outcome.exhausted;
    let mut ambiguous = false;
    match witness {
        Some(y) => {
            let r = program.max_residual(&y).unwrap_or(f64::INFINITY);
            if r > eps - config.tol && eps > config.tol {
                let (below, below_witness) = level(eps - config.tol, &y);
                warning |= below.exhausted;
                ambiguous = below_witness.is_none();
            }
            Ok(Decision {
                infeasible: false,
                value: None,
                witness: Some(ParamVector(program.unscale(&y))),
                ambiguous,
                warning,
            })
        }
        None => {
            let near = match outcome.verdict {
                Verdict::Infeasible { lower } => {
                    let den = program
                        .cones
                        .iter()
                        .map(|c| c.denominator(&outcome.y).abs())
                        .fold(1.0, f64::max);
                    lower <= config.tol * den
                }
                _ => true,
            };
            if near {
                let (above, above_witness) = level(eps + config.tol, &outcome.y);
                warning |= above.exhausted;
                ambiguous = above_witness.is_some();
            }
            Ok(Decision {
                infeasible: true,
                value: None,
                witness: None,
                ambiguous,
                warning,
            })
        }
    }
}

/// Immutable population of residual forms for one model kind.
#[derive(Clone, Debug)]
pub struct Dataset {
    kind: ModelKind,
    forms: Vec<FractionalForm>,
}

impl Dataset {
    pub fn new(kind: ModelKind, points: &[DataPoint]) -> Result<Self> {
        Ok(Self {
            kind,
            forms: to_fractional_forms(points, kind)?,
        })
    }

    pub fn from_forms(kind: ModelKind, forms: Vec<FractionalForm>) -> Result<Self> {
        if forms.iter().any(|f| f.dim() != kind.dim()) {
            return Err(Error::usage(format!(
                "forms do not match the {} parameter dimension",
                kind.name()
            )));
        }
        Ok(Self { kind, forms })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn forms(&self) -> &[FractionalForm] {
        &self.forms
    }

    pub fn subset(&self, z: &SubsetMask) -> Vec<&FractionalForm> {
        z.ones().map(|i| &self.forms[i]).collect()
    }

    pub fn solve(&self, z: &SubsetMask, config: &SolverConfig) -> Result<MinimaxResult> {
        self.check_mask(z)?;
        solve_minimax_with(&self.subset(z), config)
    }

    fn check_mask(&self, z: &SubsetMask) -> Result<()> {
        if z.len() != self.len() {
            return Err(Error::usage(format!(
                "mask has {} bits, dataset has {} points",
                z.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Outcome of the feasibility test `f(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityVerdict {
    /// `f(z) = 1`: the subset is not a consensus set.
    pub infeasible: bool,
    /// `g(C_z)` when the decision computed it exactly.
    pub value: Option<f64>,
    /// Parameters fitting every selected point within `eps` (feasible only).
    pub witness: Option<ParamVector>,
    /// `g` lies within the bisection tolerance of `eps`.
    pub boundary_ambiguous: bool,
    /// The solver exhausted its iteration budget somewhere.
    pub solver_warning: bool,
}

impl FeasibilityVerdict {
    pub fn bit(&self) -> u8 {
        u8::from(self.infeasible)
    }
}

/// `f(z)`: 0 iff the points selected by `z` fit one model within `eps`.
pub fn f_test(data: &Dataset, z: &SubsetMask, eps: f64) -> Result<FeasibilityVerdict> {
    f_test_with(data, z, eps, &SolverConfig::default())
}

pub fn f_test_with(
    data: &Dataset,
    z: &SubsetMask,
    eps: f64,
    config: &SolverConfig,
) -> Result<FeasibilityVerdict> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::usage(format!("eps must be nonnegative, got {eps}")));
    }
    data.check_mask(z)?;
    let decision = decide(&data.subset(z), eps, config)?;
    Ok(FeasibilityVerdict {
        infeasible: decision.infeasible,
        value: decision.value,
        witness: decision.witness,
        boundary_ambiguous: decision.ambiguous,
        solver_warning: decision.warning,
    })
}

/// Uniform `k`-of-`N` mask by partial Fisher-Yates.
pub fn sample_k_subset<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<SubsetMask> {
    if k > n {
        return Err(Error::usage(format!("cannot draw {k} of {n} points")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    SubsetMask::from_indices(n, idx[..k].iter().copied())
}
