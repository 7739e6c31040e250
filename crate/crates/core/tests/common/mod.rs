//! Reference implementations used as independent oracles. Residuals are
//! written out from their geometric definitions, not through
//! `FractionalForm`.
#![allow(dead_code)]

use nalgebra::{Matrix3x4, Vector2, Vector3, Vector4};
use rfit_core::pipeline::{default_sigma, generate, GeneratorParams, Instance};
use rfit_core::{DataPoint, ModelKind};

/// `|a x₁ + x₂ − b|`.
pub fn line_residual(a: f64, b: f64, x: &[f64]) -> f64 {
    (a * x[0] + x[1] - b).abs()
}

/// Pixel distance between the observation and the projection of `x`;
/// infinite behind the camera.
pub fn reprojection_error(camera: &Matrix3x4<f64>, u: f64, v: f64, x: &[f64]) -> f64 {
    let q = camera * Vector4::new(x[0], x[1], x[2], 1.0);
    if q.z <= 0.0 {
        return f64::INFINITY;
    }
    (q.x / q.z - u).hypot(q.y / q.z - v)
}

/// `‖H(u) − v‖` with `H₃₃ = 1`; infinite where the mapped point is at or
/// beyond infinity.
pub fn transfer_error(u: &Vector2<f64>, v: &Vector2<f64>, x: &[f64]) -> f64 {
    let h = nalgebra::Matrix3::new(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], 1.0);
    let q = h * Vector3::new(u.x, u.y, 1.0);
    if q.z <= 0.0 {
        return f64::INFINITY;
    }
    (q.x / q.z - v.x).hypot(q.y / q.z - v.y)
}

pub fn direct_residual(p: &DataPoint, x: &[f64]) -> f64 {
    match p {
        DataPoint::Line { a, b } => line_residual(*a, *b, x),
        DataPoint::Triang { camera, u, v } => reprojection_error(camera, *u, *v, x),
        DataPoint::Homog { u, v } => transfer_error(u, v, x),
    }
}

pub fn max_residual(points: &[&DataPoint], x: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| direct_residual(p, x))
        .fold(0.0, f64::max)
}

/// Minimum of `objective` over the box `center ± half` by repeated dense
/// grids, each centred on the previous best point with half the width.
/// Returns the best value and point.
pub fn zooming_grid_min(
    objective: impl Fn(&[f64]) -> f64,
    center: &[f64],
    half: &[f64],
    per_dim: usize,
    min_half: f64,
) -> (f64, Vec<f64>) {
    let d = center.len();
    let mut center = center.to_vec();
    let mut half = half.to_vec();
    let mut best = (objective(&center), center.clone());
    let total = per_dim.pow(d as u32);
    let mut x = vec![0.0; d];
    while half.iter().any(|&h| h > min_half) {
        for idx in 0..total {
            let mut rest = idx;
            for j in 0..d {
                let k = rest % per_dim;
                rest /= per_dim;
                x[j] = center[j] - half[j] + 2.0 * half[j] * k as f64 / (per_dim - 1) as f64;
            }
            let val = objective(&x);
            if val < best.0 {
                best = (val, x.clone());
            }
        }
        center.clone_from(&best.1);
        for h in half.iter_mut() {
            *h *= 0.5;
        }
    }
    best
}

pub fn line_instance(n: usize, inliers: usize, seed: u64) -> Instance {
    let mut inst = generate(&GeneratorParams {
        kind: ModelKind::Line2D,
        n,
        inliers,
        sigma: 0.1,
        spread: 10.0,
        seed,
    })
    .unwrap();
    inst.eps = 0.3;
    inst
}

pub fn image_instance(kind: ModelKind, n: usize, inliers: usize, seed: u64) -> Instance {
    generate(&GeneratorParams {
        kind,
        n,
        inliers,
        sigma: default_sigma(kind),
        spread: 640.0,
        seed,
    })
    .unwrap()
}

/// Central-cut ellipsoid minimisation of a quasiconvex function over the
/// ball `‖x − center‖ ≤ radius`. `oracle(x)` returns the value at `x` and a
/// vector `g` with every better point in `{y : gᵀ(y − x) ≤ 0}`. Returns the
/// best value and point seen.
pub fn ellipsoid_min(
    oracle: impl Fn(&[f64]) -> (f64, Vec<f64>),
    center: &[f64],
    radius: f64,
    iterations: usize,
) -> (f64, Vec<f64>) {
    let n = center.len();
    let nf = n as f64;
    let mut x = nalgebra::DVector::from_column_slice(center);
    let mut p = nalgebra::DMatrix::<f64>::identity(n, n) * (radius * radius);
    let mut best = (f64::INFINITY, center.to_vec());
    for _ in 0..iterations {
        let (val, g) = oracle(x.as_slice());
        if val < best.0 {
            best = (val, x.as_slice().to_vec());
        }
        let g = nalgebra::DVector::from_vec(g);
        let pg = &p * &g;
        let gpg = g.dot(&pg);
        if gpg.is_nan() || gpg <= 0.0 || gpg.sqrt() < 1e-13 {
            break;
        }
        let step = &pg / gpg.sqrt();
        x -= &step / (nf + 1.0);
        p = (&p - (&step * step.transpose()) * (2.0 / (nf + 1.0))) * (nf * nf / (nf * nf - 1.0));
        p = (&p + p.transpose()) * 0.5;
    }
    best
}

/// Reprojection error and a cut for the ellipsoid method: the gradient of
/// the worst residual, or the depth constraint a point behind some camera
/// violates.
pub fn triangulation_cut(points: &[&DataPoint], x: &[f64]) -> (f64, Vec<f64>) {
    let mut worst = (f64::NEG_INFINITY, vec![0.0; 3]);
    for p in points {
        let DataPoint::Triang { camera, u, v } = p else {
            panic!("triangulation points expected");
        };
        let q = camera * Vector4::new(x[0], x[1], x[2], 1.0);
        if q.z <= 0.0 {
            // better points are in front of this camera
            let row = camera.row(2);
            return (f64::INFINITY, vec![-row[0], -row[1], -row[2]]);
        }
        let (ex, ey) = (q.x / q.z - u, q.y / q.z - v);
        let r = ex.hypot(ey);
        if r > worst.0 {
            let mut g = vec![0.0; 3];
            for (j, gj) in g.iter_mut().enumerate() {
                let dx = (camera[(0, j)] - (q.x / q.z) * camera[(2, j)]) / q.z;
                let dy = (camera[(1, j)] - (q.y / q.z) * camera[(2, j)]) / q.z;
                *gj = ex * dx + ey * dy;
            }
            worst = (r, g);
        }
    }
    worst
}
