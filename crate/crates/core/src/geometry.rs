//! Model families, data points and the unified fractional residual
//! `‖A x + b‖ / (cᵀx + d0)` shared by line fitting, triangulation and
//! homography estimation.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, SymmetricEigen, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::mask::SubsetMask;
use crate::{Error, Result};

/// Homography instances whose true bottom-right entry falls below this are
/// outside the dehomogenised parametrisation.
pub const MIN_ABS_H33: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "line")]
    Line2D,
    #[serde(rename = "triangulation")]
    Triangulation,
    #[serde(rename = "homography")]
    Homography,
}

impl ModelKind {
    /// Parameter dimension `d`.
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Line2D => 2,
            ModelKind::Triangulation => 3,
            ModelKind::Homography => 8,
        }
    }

    /// Combinatorial dimension `k = d + 1`.
    pub fn combinatorial_dim(self) -> usize {
        self.dim() + 1
    }

    /// Fewest points `least_squares_fit` accepts.
    pub fn min_fit_points(self) -> usize {
        match self {
            ModelKind::Line2D => 2,
            ModelKind::Triangulation => 2,
            ModelKind::Homography => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Line2D => "line",
            ModelKind::Triangulation => "triangulation",
            ModelKind::Homography => "homography",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" | "line2d" => Ok(ModelKind::Line2D),
            "triangulation" => Ok(ModelKind::Triangulation),
            "homography" => Ok(ModelKind::Homography),
            other => Err(Error::usage(format!(
                "unknown model kind `{other}` (expected line, triangulation or homography)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataPoint {
    /// `(a, b)` with vertical residual `|a x₁ + x₂ − b|`.
    Line { a: f64, b: f64 },
    /// Pixel observation `(u, v)` of the unknown point in a calibrated camera.
    Triang {
        camera: Matrix3x4<f64>,
        u: f64,
        v: f64,
    },
    /// Correspondence `u ↦ v` between two images.
    Homog { u: Vector2<f64>, v: Vector2<f64> },
}

impl DataPoint {
    pub fn kind(&self) -> ModelKind {
        match self {
            DataPoint::Line { .. } => ModelKind::Line2D,
            DataPoint::Triang { .. } => ModelKind::Triangulation,
            DataPoint::Homog { .. } => ModelKind::Homography,
        }
    }
}

/// True when the 3×4 camera has full row rank.
pub fn camera_has_full_rank(camera: &Matrix3x4<f64>) -> bool {
    let sv = camera.svd(false, false).singular_values;
    let max = sv.max();
    max > 0.0 && sv.min() > 1e-12 * max
}

/// Model parameters: line coefficients, a 3D point, or the eight free
/// homography entries in row-major order with `H₃₃ = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(d: usize) -> Self {
        ParamVector(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    /// Dehomogenises `h` by its bottom-right entry.
    pub fn from_homography(h: &Matrix3<f64>) -> Result<Self> {
        let h33 = h[(2, 2)];
        if h33.abs() < MIN_ABS_H33 {
            return Err(Error::SingularFit(format!(
                "homography bottom-right entry {h33:e} too close to zero"
            )));
        }
        let h = h / h33;
        Ok(ParamVector(vec![
            h[(0, 0)],
            h[(0, 1)],
            h[(0, 2)],
            h[(1, 0)],
            h[(1, 1)],
            h[(1, 2)],
            h[(2, 0)],
            h[(2, 1)],
        ]))
    }

    pub fn to_homography(&self) -> Matrix3<f64> {
        let x = &self.0;
        Matrix3::new(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], 1.0)
    }
}

/// `‖A x + b‖₂ / (cᵀx + d0)`, defined where the denominator is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    d0: f64,
}

impl FractionalForm {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, d0: f64) -> Result<Self> {
        let (m, d) = a.shape();
        if !(1..=2).contains(&m) || b.len() != m || c.len() != d {
            return Err(Error::usage(format!(
                "fractional form shape mismatch: A is {m}x{d}, b has {}, c has {}",
                b.len(),
                c.len()
            )));
        }
        if c.iter().all(|&ci| ci == 0.0) && d0 <= 0.0 {
            return Err(Error::usage("form with c = 0 needs d0 > 0"));
        }
        Ok(Self { a, b, c, d0 })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    /// Parameter dimension `d`.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn numerator(&self, x: &[f64]) -> f64 {
        let mut sq = 0.0;
        for r in 0..self.a.nrows() {
            let mut v = self.b[r];
            for (j, xj) in x.iter().enumerate() {
                v += self.a[(r, j)] * xj;
            }
            sq += v * v;
        }
        sq.sqrt()
    }

    pub fn denominator(&self, x: &[f64]) -> f64 {
        self.d0 + self.c.iter().zip(x).map(|(ci, xi)| ci * xi).sum::<f64>()
    }

    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        let den = self.denominator(x);
        if den <= 0.0 {
            return Err(Error::Domain { denominator: den });
        }
        Ok(self.numerator(x) / den)
    }

    /// Residual, or `+∞` outside the positive-denominator region.
    pub fn residual_or_inf(&self, x: &[f64]) -> f64 {
        self.residual(x).unwrap_or(f64::INFINITY)
    }

    /// `(a, b)` when the form is a vertical line residual `|a x₁ + x₂ − b|`.
    pub fn as_line_point(&self) -> Option<(f64, f64)> {
        let linear = self.a.shape() == (1, 2)
            && self.a[(0, 1)] == 1.0
            && self.d0 == 1.0
            && self.c.iter().all(|&ci| ci == 0.0);
        linear.then(|| (self.a[(0, 0)], -self.b[0]))
    }
}

pub fn to_fractional_form(p: &DataPoint, kind: ModelKind) -> Result<FractionalForm> {
    if p.kind() != kind {
        return Err(Error::usage(format!(
            "data point of kind {} used with model kind {}",
            p.kind().name(),
            kind.name()
        )));
    }
    match *p {
        DataPoint::Line { a, b } => FractionalForm::new(
            DMatrix::from_row_slice(1, 2, &[a, 1.0]),
            DVector::from_element(1, -b),
            DVector::zeros(2),
            1.0,
        ),
        DataPoint::Triang { ref camera, u, v } => {
            if !camera_has_full_rank(camera) {
                return Err(Error::RankDeficientCamera { index: 0 });
            }
            // (P^{1:2} − p P^3) x̃ over P^3 x̃
            let p3 = camera.row(2);
            let r0 = camera.row(0) - p3 * u;
            let r1 = camera.row(1) - p3 * v;
            FractionalForm::new(
                DMatrix::from_row_slice(2, 3, &[r0[0], r0[1], r0[2], r1[0], r1[1], r1[2]]),
                DVector::from_column_slice(&[r0[3], r1[3]]),
                DVector::from_column_slice(&[p3[0], p3[1], p3[2]]),
                p3[3],
            )
        }
        DataPoint::Homog { u, v } => {
            let (u1, u2) = (u.x, u.y);
            let (v1, v2) = (v.x, v.y);
            #[rustfmt::skip]
            let a = DMatrix::from_row_slice(2, 8, &[
                u1, u2, 1.0, 0.0, 0.0, 0.0, -v1 * u1, -v1 * u2,
                0.0, 0.0, 0.0, u1, u2, 1.0, -v2 * u1, -v2 * u2,
            ]);
            let mut c = DVector::zeros(8);
            c[6] = u1;
            c[7] = u2;
            FractionalForm::new(a, DVector::from_column_slice(&[-v1, -v2]), c, 1.0)
        }
    }
}

/// Converts every point, attaching the point index to ingestion errors.
pub fn to_fractional_forms(points: &[DataPoint], kind: ModelKind) -> Result<Vec<FractionalForm>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            to_fractional_form(p, kind).map_err(|e| match e {
                Error::RankDeficientCamera { .. } => Error::RankDeficientCamera { index: i },
                other => other,
            })
        })
        .collect()
}

pub fn residual(form: &FractionalForm, x: &ParamVector) -> Result<f64> {
    if x.len() != form.dim() {
        return Err(Error::usage(format!(
            "parameter vector has length {}, form expects {}",
            x.len(),
            form.dim()
        )));
    }
    form.residual(x.as_slice())
}

/// Least-squares refit on the points selected by `mask`.
///
/// Lines use ordinary least squares on vertical residuals; homographies use
/// the normalised DLT; triangulation uses the linear cross-product system
/// followed by one Gauss-Newton step on reprojection error.
pub fn least_squares_fit(
    kind: ModelKind,
    data: &[DataPoint],
    mask: &SubsetMask,
) -> Result<ParamVector> {
    if mask.len() != data.len() {
        return Err(Error::usage(format!(
            "mask covers {} points but the data has {}",
            mask.len(),
            data.len()
        )));
    }
    let selected: Vec<&DataPoint> = mask.ones().map(|i| &data[i]).collect();
    if let Some(p) = selected.iter().find(|p| p.kind() != kind) {
        return Err(Error::usage(format!(
            "data point of kind {} in a {} fit",
            p.kind().name(),
            kind.name()
        )));
    }
    if selected.len() < kind.min_fit_points() {
        return Err(Error::usage(format!(
            "{} fit needs at least {} points, mask selects {}",
            kind.name(),
            kind.min_fit_points(),
            selected.len()
        )));
    }
    match kind {
        ModelKind::Line2D => fit_line(&selected),
        ModelKind::Homography => fit_homography(&selected),
        ModelKind::Triangulation => fit_triangulation(&selected),
    }
}

fn fit_line(points: &[&DataPoint]) -> Result<ParamVector> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| match **p {
            DataPoint::Line { a, b } => (a, b),
            _ => unreachable!(),
        })
        .collect();
    let n = pts.len() as f64;
    let mean_a = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let saa: f64 = pts.iter().map(|p| (p.0 - mean_a).powi(2)).sum();
    let sab: f64 = pts.iter().map(|p| (p.0 - mean_a) * (p.1 - mean_b)).sum();
    let scale = pts.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    if saa <= 1e-24 * scale * scale * n {
        return Err(Error::SingularFit(
            "all selected line points share the same abscissa".into(),
        ));
    }
    let slope = sab / saa;
    Ok(ParamVector(vec![slope, mean_b - slope * mean_a]))
}

/// Isotropic normalisation: centroid to origin, mean distance √2.
fn hartley_normalizer(pts: &[Vector2<f64>]) -> Result<Matrix3<f64>> {
    let n = pts.len() as f64;
    let centroid = pts.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let mean_dist = pts.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    if mean_dist <= 1e-300 {
        return Err(Error::SingularFit("coincident homography points".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s,
        0.0,
        -s * centroid.x,
        0.0,
        s,
        -s * centroid.y,
        0.0,
        0.0,
        1.0,
    ))
}

fn fit_homography(points: &[&DataPoint]) -> Result<ParamVector> {
    let (us, vs): (Vec<Vector2<f64>>, Vec<Vector2<f64>>) = points
        .iter()
        .map(|p| match **p {
            DataPoint::Homog { u, v } => (u, v),
            _ => unreachable!(),
        })
        .unzip();
    let t1 = hartley_normalizer(&us)?;
    let t2 = hartley_normalizer(&vs)?;

    let mut ata = DMatrix::<f64>::zeros(9, 9);
    for (u, v) in us.iter().zip(&vs) {
        let un = t1 * Vector3::new(u.x, u.y, 1.0);
        let vn = t2 * Vector3::new(v.x, v.y, 1.0);
        let (x, y) = (un.x / un.z, un.y / un.z);
        let (xp, yp) = (vn.x / vn.z, vn.y / vn.z);
        let rows = [
            [0.0, 0.0, 0.0, -x, -y, -1.0, yp * x, yp * y, yp],
            [x, y, 1.0, 0.0, 0.0, 0.0, -xp * x, -xp * y, -xp],
        ];
        for row in rows {
            let r = DVector::from_row_slice(&row);
            ata += &r * r.transpose();
        }
    }
    let eig = SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (smallest, second) = (order[0], order[1]);
    let largest = eig.eigenvalues[order[8]];
    if eig.eigenvalues[second] <= 1e-18 * largest {
        return Err(Error::SingularFit(
            "degenerate correspondence configuration (collinear or repeated points)".into(),
        ));
    }
    let h = eig.eigenvectors.column(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t2_inv = t2
        .try_inverse()
        .ok_or_else(|| Error::SingularFit("normalizer not invertible".into()))?;
    let h = t2_inv * hn * t1;
    if h[(2, 2)].abs() < 1e-12 * h.norm() {
        return Err(Error::SingularFit(
            "fitted homography has vanishing bottom-right entry".into(),
        ));
    }
    ParamVector::from_homography(&(h / h.norm()))
}

fn fit_triangulation(points: &[&DataPoint]) -> Result<ParamVector> {
    let obs: Vec<(&Matrix3x4<f64>, f64, f64)> = points
        .iter()
        .map(|p| match p {
            DataPoint::Triang { camera, u, v } => (camera, *u, *v),
            _ => unreachable!(),
        })
        .collect();

    // Each row is scaled to unit norm so that every view weighs the same.
    let mut ata = nalgebra::Matrix4::<f64>::zeros();
    for (cam, u, v) in &obs {
        for row in [cam.row(2) * *u - cam.row(0), cam.row(2) * *v - cam.row(1)] {
            let norm = row.norm();
            if norm == 0.0 {
                continue;
            }
            let r: Vector4<f64> = (row / norm).transpose();
            ata += r * r.transpose();
        }
    }
    let eig = SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let largest = eig.eigenvalues[order[3]];
    if eig.eigenvalues[order[1]] <= 1e-18 * largest {
        return Err(Error::SingularFit(
            "triangulation rays are parallel or coincident".into(),
        ));
    }
    let xh = eig.eigenvectors.column(order[0]);
    if xh[3].abs() < 1e-12 * xh.norm() {
        return Err(Error::SingularFit("triangulated point at infinity".into()));
    }
    let mut x = Vector3::new(xh[0] / xh[3], xh[1] / xh[3], xh[2] / xh[3]);

    let cost = |x: &Vector3<f64>| -> f64 {
        obs.iter()
            .map(|(cam, u, v)| {
                let q = *cam * x.push(1.0);
                (u - q.x / q.z).powi(2) + (v - q.y / q.z).powi(2)
            })
            .sum()
    };

    // One Gauss-Newton pass on reprojection error.
    let mut jtj = Matrix3::<f64>::zeros();
    let mut jte = Vector3::<f64>::zeros();
    for (cam, u, v) in &obs {
        let q = *cam * x.push(1.0);
        if q.z.abs() < 1e-300 {
            continue;
        }
        let p0 = cam.fixed_view::<1, 3>(0, 0).transpose();
        let p1 = cam.fixed_view::<1, 3>(1, 0).transpose();
        let p2 = cam.fixed_view::<1, 3>(2, 0).transpose();
        let z2 = q.z * q.z;
        let j0 = (p0 * q.z - p2 * q.x) / z2;
        let j1 = (p1 * q.z - p2 * q.y) / z2;
        let e0 = u - q.x / q.z;
        let e1 = v - q.y / q.z;
        jtj += j0 * j0.transpose() + j1 * j1.transpose();
        jte += j0 * e0 + j1 * e1;
    }
    if let Some(step) = jtj.cholesky().map(|c| c.solve(&jte)) {
        let candidate = x + step;
        if candidate.iter().all(|v| v.is_finite()) && cost(&candidate) <= cost(&x) {
            x = candidate;
        }
    }
    Ok(ParamVector(vec![x.x, x.y, x.z]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(a: f64, b: f64) -> DataPoint {
        DataPoint::Line { a, b }
    }

    fn look_at_camera(center: Vector3<f64>, focal: f64) -> Matrix3x4<f64> {
        let forward = (-center).normalize();
        let up = Vector3::new(0.0, 0.0, 1.0);
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let k = Matrix3::new(focal, 0.0, 320.0, 0.0, focal, 240.0, 0.0, 0.0, 1.0);
        let t = -(r * center);
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.set_column(3, &t);
        k * rt
    }

    fn project(cam: &Matrix3x4<f64>, x: &Vector3<f64>) -> (f64, f64) {
        let q = cam * x.push(1.0);
        (q.x / q.z, q.y / q.z)
    }

    #[test]
    fn line_form_layout() {
        let f = to_fractional_form(&line(2.0, 3.0), ModelKind::Line2D).unwrap();
        assert_eq!(f.a().as_slice(), &[2.0, 1.0]);
        assert_eq!(f.b()[0], -3.0);
        assert!(f.c().iter().all(|&c| c == 0.0));
        assert_eq!(f.d0(), 1.0);
        assert_eq!(f.residual(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(f.as_line_point(), Some((2.0, 3.0)));
    }

    #[test]
    fn line_residual_examples() {
        let f = to_fractional_form(&line(1.0, 0.0), ModelKind::Line2D).unwrap();
        assert_eq!(residual(&f, &ParamVector(vec![0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(residual(&f, &ParamVector(vec![1.0, 0.0])).unwrap(), 1.0);
        let f = to_fractional_form(&line(1.0, 3.0), ModelKind::Line2D).unwrap();
        assert_eq!(residual(&f, &ParamVector(vec![1.0, 0.0])).unwrap(), 2.0);
    }

    #[test]
    fn identity_homography_has_zero_transfer_error() {
        let u = Vector2::new(12.5, -3.0);
        let f = to_fractional_form(&DataPoint::Homog { u, v: u }, ModelKind::Homography).unwrap();
        let x = ParamVector(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(residual(&f, &x).unwrap(), 0.0);
    }

    #[test]
    fn homography_on_vanishing_denominator_is_a_domain_error() {
        let u = Vector2::new(2.0, 0.0);
        let f = to_fractional_form(
            &DataPoint::Homog {
                u,
                v: Vector2::new(1.0, 1.0),
            },
            ModelKind::Homography,
        )
        .unwrap();
        // h31 = -0.5 puts H³ũ = -0.5·2 + 1 = 0.
        let x = ParamVector(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -0.5, 0.0]);
        match residual(&f, &x) {
            Err(Error::Domain { denominator }) => assert_eq!(denominator, 0.0),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn exact_projection_has_zero_reprojection_error() {
        let cam = look_at_camera(Vector3::new(4.0, 1.0, 0.5), 500.0);
        let x0 = Vector3::new(0.1, -0.2, 0.3);
        let (u, v) = project(&cam, &x0);
        let f = to_fractional_form(
            &DataPoint::Triang { camera: cam, u, v },
            ModelKind::Triangulation,
        )
        .unwrap();
        assert!(f.residual(x0.as_slice()).unwrap() < 1e-10);
    }

    #[test]
    fn mismatched_kind_is_a_usage_error() {
        let err = to_fractional_form(&line(0.0, 0.0), ModelKind::Homography).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rank_deficient_camera_is_rejected() {
        let mut cam = Matrix3x4::zeros();
        cam[(0, 0)] = 1.0;
        cam[(1, 0)] = 2.0;
        cam[(2, 3)] = 1.0;
        let pts = vec![
            DataPoint::Triang {
                camera: look_at_camera(Vector3::new(3.0, 0.0, 0.0), 1.0),
                u: 0.0,
                v: 0.0,
            },
            DataPoint::Triang {
                camera: cam,
                u: 0.0,
                v: 0.0,
            },
        ];
        match to_fractional_forms(&pts, ModelKind::Triangulation) {
            Err(Error::RankDeficientCamera { index }) => assert_eq!(index, 1),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn two_line_points_are_interpolated() {
        let data = vec![line(0.0, 1.0), line(2.0, 5.0)];
        let x = least_squares_fit(ModelKind::Line2D, &data, &SubsetMask::full(2)).unwrap();
        for p in &data {
            let f = to_fractional_form(p, ModelKind::Line2D).unwrap();
            assert!(residual(&f, &x).unwrap() < 1e-12);
        }
    }

    #[test]
    fn underdetermined_and_degenerate_fits_fail() {
        let data = vec![line(1.0, 1.0), line(1.0, 2.0), line(3.0, 0.0)];
        let one = SubsetMask::from_indices(3, [0]).unwrap();
        assert!(matches!(
            least_squares_fit(ModelKind::Line2D, &data, &one),
            Err(Error::Usage(_))
        ));
        let same_a = SubsetMask::from_indices(3, [0, 1]).unwrap();
        assert!(matches!(
            least_squares_fit(ModelKind::Line2D, &data, &same_a),
            Err(Error::SingularFit(_))
        ));

        // Four collinear correspondences cannot pin down a homography.
        let corr: Vec<DataPoint> = (0..4)
            .map(|i| {
                let u = Vector2::new(i as f64, 2.0 * i as f64);
                DataPoint::Homog { u, v: u * 1.5 }
            })
            .collect();
        assert!(matches!(
            least_squares_fit(ModelKind::Homography, &corr, &SubsetMask::full(4)),
            Err(Error::SingularFit(_))
        ));
    }

    #[test]
    fn homography_round_trip_from_four_correspondences() {
        let truth = ParamVector(vec![1.1, 0.05, 12.0, -0.03, 0.95, -7.0, 2e-4, -1e-4]);
        let h = truth.to_homography();
        let data: Vec<DataPoint> = [(10.0, 20.0), (600.0, 35.0), (580.0, 450.0), (40.0, 470.0)]
            .iter()
            .map(|&(x, y)| {
                let w = h * Vector3::new(x, y, 1.0);
                DataPoint::Homog {
                    u: Vector2::new(x, y),
                    v: Vector2::new(w.x / w.z, w.y / w.z),
                }
            })
            .collect();
        let x = least_squares_fit(ModelKind::Homography, &data, &SubsetMask::full(4)).unwrap();
        for (got, want) in x.as_slice().iter().zip(truth.as_slice()) {
            assert!(
                (got - want).abs() <= 1e-8 * want.abs().max(1e-3),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn triangulation_round_trip_from_three_views() {
        let x0 = Vector3::new(0.3, -0.1, 0.2);
        let data: Vec<DataPoint> = [0.0f64, 1.9, 4.1]
            .iter()
            .map(|&t| {
                let cam = look_at_camera(Vector3::new(5.0 * t.cos(), 5.0 * t.sin(), 0.7), 600.0);
                let (u, v) = project(&cam, &x0);
                DataPoint::Triang { camera: cam, u, v }
            })
            .collect();
        let x = least_squares_fit(ModelKind::Triangulation, &data, &SubsetMask::full(3)).unwrap();
        for (got, want) in x.as_slice().iter().zip(x0.iter()) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    // Direct residual formulas, written independently of the form layout.
    fn direct_triang(cam: &Matrix3x4<f64>, u: f64, v: f64, x: &[f64]) -> f64 {
        let xt = [x[0], x[1], x[2], 1.0];
        let q: Vec<f64> = (0..3)
            .map(|r| (0..4).map(|c| cam[(r, c)] * xt[c]).sum())
            .collect();
        ((u - q[0] / q[2]).powi(2) + (v - q[1] / q[2]).powi(2)).sqrt()
    }

    fn direct_homog(u: [f64; 2], v: [f64; 2], x: &[f64]) -> f64 {
        let w = x[6] * u[0] + x[7] * u[1] + 1.0;
        let e0 = x[0] * u[0] + x[1] * u[1] + x[2] - v[0] * w;
        let e1 = x[3] * u[0] + x[4] * u[1] + x[5] - v[1] * w;
        (e0 * e0 + e1 * e1).sqrt() / w
    }

    #[test]
    fn forms_agree_with_direct_formulas() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
        let mut checked = [0usize; 3];
        while checked.iter().any(|&c| c < 1000) {
            // line
            let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let f = to_fractional_form(&line(a, b), ModelKind::Line2D).unwrap();
            let want = (a * x[0] + x[1] - b).abs();
            assert!((f.residual(&x).unwrap() - want).abs() <= 1e-10 * want.max(1.0));
            checked[0] += 1;

            // triangulation
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let cam = look_at_camera(Vector3::new(4.0 * t.cos(), 4.0 * t.sin(), 0.3), 500.0);
            let (u, v) = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = to_fractional_form(
                &DataPoint::Triang { camera: cam, u, v },
                ModelKind::Triangulation,
            )
            .unwrap();
            if f.denominator(&x) > 1e-3 {
                assert!(rel(f.residual(&x).unwrap(), direct_triang(&cam, u, v, &x)) < 1e-10);
                checked[1] += 1;
            }

            // homography
            let u = [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)];
            let v = [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)];
            let mut x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            x[6] *= 1e-3;
            x[7] *= 1e-3;
            let f = to_fractional_form(
                &DataPoint::Homog {
                    u: Vector2::from(u),
                    v: Vector2::from(v),
                },
                ModelKind::Homography,
            )
            .unwrap();
            if f.denominator(&x) > 1e-3 {
                assert!(rel(f.residual(&x).unwrap(), direct_homog(u, v, &x)) < 1e-10);
                checked[2] += 1;
            }
        }
    }

    fn form_strategy() -> impl Strategy<Value = FractionalForm> {
        (1usize..=2, 1usize..=4).prop_flat_map(|(m, d)| {
            (
                proptest::collection::vec(-3.0f64..3.0, m * d),
                proptest::collection::vec(-3.0f64..3.0, m),
                proptest::collection::vec(-1.0f64..1.0, d),
                0.5f64..2.0,
            )
                .prop_map(move |(a, b, c, d0)| {
                    FractionalForm::new(
                        DMatrix::from_row_slice(m, d, &a),
                        DVector::from_vec(b),
                        DVector::from_vec(c),
                        d0,
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn residual_is_quasiconvex_along_segments(
            form in form_strategy(),
            x1 in proptest::collection::vec(-2.0f64..2.0, 4),
            x2 in proptest::collection::vec(-2.0f64..2.0, 4),
        ) {
            let d = form.dim();
            let (x1, x2) = (&x1[..d], &x2[..d]);
            let mid: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| 0.5 * (a + b)).collect();
            // the denominator is affine, so positivity at both ends covers the segment
            prop_assume!(form.denominator(x1) > 0.0 && form.denominator(x2) > 0.0);
            let r1 = form.residual(x1).unwrap();
            let r2 = form.residual(x2).unwrap();
            let rm = form.residual(&mid).unwrap();
            prop_assert!(rm <= r1.max(r2) + 1e-12);
        }
    }
}
