//! Seeded synthetic instances for the three model families.

use nalgebra::{Matrix3, Matrix3x4, Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::instance::{GroundTruth, Instance, Provenance};
use crate::geometry::{DataPoint, ModelKind, ParamVector};
use crate::{Error, Result};

/// Re-draws allowed for a degenerate model or a misplaced outlier.
const MAX_REDRAWS: usize = 100;

/// Default image width in pixels for the image-based families.
pub const DEFAULT_IMAGE_WIDTH: f64 = 640.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub kind: ModelKind,
    pub n: usize,
    pub inliers: usize,
    pub sigma: f64,
    /// Box side for lines; image width in pixels otherwise.
    pub spread: f64,
    pub seed: u64,
}

/// Noise level used when none is given: 0.1 for lines, 1 px for
/// homographies and 0.25 px for triangulation, so the default threshold
/// covers the noise of every kind.
pub fn default_sigma(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::Line2D => 0.1,
        ModelKind::Homography => 1.0,
        ModelKind::Triangulation => 0.25,
    }
}

/// Inlier threshold used when none is given: `3σ` for lines (floored at
/// `1e-3 · spread`), 4 px for homographies and 1 px for triangulation.
pub fn default_eps(kind: ModelKind, sigma: f64, spread: f64) -> f64 {
    match kind {
        ModelKind::Line2D => (3.0 * sigma).max(1e-3 * spread),
        ModelKind::Homography => 4.0,
        ModelKind::Triangulation => 1.0,
    }
}

/// Outliers are re-drawn until their residual to the true model is at least
/// this far from zero, so every labelled outlier is a genuine one.
fn outlier_margin(kind: ModelKind, sigma: f64, spread: f64) -> f64 {
    let relative = match kind {
        ModelKind::Line2D => 0.2,
        _ => 0.05,
    };
    (relative * spread).max(5.0 * sigma)
}

pub fn generate(params: &GeneratorParams) -> Result<Instance> {
    let GeneratorParams {
        kind,
        n,
        inliers,
        sigma,
        spread,
        seed,
    } = *params;
    if n == 0 {
        return Err(Error::usage("an instance needs at least one point"));
    }
    if inliers > n {
        return Err(Error::usage(format!(
            "{inliers} inliers requested out of N = {n}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::usage(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::usage(format!(
            "spread must be finite and > 0, got {spread}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<bool> = (0..n).map(|i| i < inliers).collect();
    labels.shuffle(&mut rng);
    let noise = Normal::new(0.0, sigma).expect("sigma validated");
    let margin = outlier_margin(kind, sigma, spread);

    let (x, points) = match kind {
        ModelKind::Line2D => gen_line(&mut rng, &labels, noise, spread, margin)?,
        ModelKind::Homography => gen_homography(&mut rng, &labels, noise, spread, margin)?,
        ModelKind::Triangulation => gen_triangulation(&mut rng, &labels, noise, spread, margin)?,
    };

    Ok(Instance {
        kind,
        eps: default_eps(kind, sigma, spread),
        points,
        truth: Some(GroundTruth { x, labels }),
        provenance: Provenance::Generated {
            seed,
            sigma,
            spread,
            outlier_fraction: (n - inliers) as f64 / n as f64,
        },
    })
}

fn redraw<T>(what: &str, mut draw: impl FnMut() -> Option<T>) -> Result<T> {
    (0..MAX_REDRAWS)
        .find_map(|_| draw())
        .ok_or_else(|| Error::Degenerate(format!("no valid {what} after {MAX_REDRAWS} draws")))
}

fn gen_line(
    rng: &mut ChaCha8Rng,
    labels: &[bool],
    noise: Normal<f64>,
    spread: f64,
    margin: f64,
) -> Result<(ParamVector, Vec<DataPoint>)> {
    let half = spread / 2.0;
    let slope = rng.random_range(-1.0..1.0);
    let intercept = rng.random_range(-0.25 * spread..0.25 * spread);
    let line = |a: f64| slope * a + intercept;
    let points = labels
        .iter()
        .map(|&inlier| {
            if inlier {
                let a = rng.random_range(-half..half);
                Ok(DataPoint::Line {
                    a,
                    b: line(a) + noise.sample(rng),
                })
            } else {
                redraw("line outlier", || {
                    let a = rng.random_range(-half..half);
                    let b = rng.random_range(-half..half);
                    ((b - line(a)).abs() >= margin).then_some(DataPoint::Line { a, b })
                })
            }
        })
        .collect::<Result<_>>()?;
    Ok((ParamVector(vec![slope, intercept]), points))
}

/// Pixel frame `[0, W] × [0, 0.75 W]` and the map to coordinates centred on
/// the image with the half-width as unit.
fn image_frame(width: f64) -> (f64, Matrix3<f64>) {
    let height = 0.75 * width;
    let s = 2.0 / width;
    let t = Matrix3::new(s, 0.0, -1.0, 0.0, s, -height / width, 0.0, 0.0, 1.0);
    (height, t)
}

fn apply(h: &Matrix3<f64>, u: &Vector2<f64>) -> Option<Vector2<f64>> {
    let q = h * Vector3::new(u.x, u.y, 1.0);
    (q.z > 0.0).then(|| Vector2::new(q.x / q.z, q.y / q.z))
}

fn gen_homography(
    rng: &mut ChaCha8Rng,
    labels: &[bool],
    noise: Normal<f64>,
    width: f64,
    margin: f64,
) -> Result<(ParamVector, Vec<DataPoint>)> {
    let (height, t) = image_frame(width);
    let t_inv = t.try_inverse().expect("scaling matrix");
    let corners = [(0.0, 0.0), (width, 0.0), (0.0, height), (width, height)];

    let h = redraw("homography", || {
        let mut r = |s: f64| rng.random_range(-s..s);
        let hn = Matrix3::new(
            1.0 + r(0.2),
            r(0.2),
            r(0.2),
            r(0.2),
            1.0 + r(0.2),
            r(0.2),
            r(0.15),
            r(0.15),
            1.0,
        );
        let sv = hn.singular_values();
        let well_conditioned = sv.min() > 0.1 * sv.max();
        let h33_ok = hn[(2, 2)].abs() / hn.norm() >= 0.5;
        let h = t_inv * hn * t;
        let front = corners
            .iter()
            .all(|&(x, y)| (h * Vector3::new(x, y, 1.0)).z > 0.0);
        (well_conditioned && h33_ok && front).then_some(h)
    })?;
    let truth = ParamVector::from_homography(&h)?;
    let h = truth.to_homography();

    let points = labels
        .iter()
        .map(|&inlier| {
            let u = Vector2::new(rng.random_range(0.0..width), rng.random_range(0.0..height));
            let mapped = apply(&h, &u).expect("positive over the whole frame");
            if inlier {
                let v = mapped + Vector2::new(noise.sample(rng), noise.sample(rng));
                Ok(DataPoint::Homog { u, v })
            } else {
                redraw("homography outlier", || {
                    let v =
                        Vector2::new(rng.random_range(0.0..width), rng.random_range(0.0..height));
                    ((v - mapped).norm() >= margin).then_some(DataPoint::Homog { u, v })
                })
            }
        })
        .collect::<Result<_>>()?;
    Ok((truth, points))
}

/// Pinhole camera at `center` looking at the origin, square pixels, focal
/// length `focal` and principal point at the frame centre.
pub(crate) fn look_at_camera(center: Vector3<f64>, focal: f64, width: f64) -> Matrix3x4<f64> {
    let forward = (-center).normalize();
    let up = Vector3::new(0.0, 0.0, 1.0);
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let k = Matrix3::new(
        focal,
        0.0,
        width / 2.0,
        0.0,
        focal,
        0.375 * width,
        0.0,
        0.0,
        1.0,
    );
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    rt.set_column(3, &-(r * center));
    k * rt
}

fn gen_triangulation(
    rng: &mut ChaCha8Rng,
    labels: &[bool],
    noise: Normal<f64>,
    width: f64,
    margin: f64,
) -> Result<(ParamVector, Vec<DataPoint>)> {
    let (height, _) = image_frame(width);
    let x0 = Vector3::new(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
    );
    let n = labels.len();
    let points = labels
        .iter()
        .enumerate()
        .map(|(i, &inlier)| {
            let theta = std::f64::consts::TAU * i as f64 / n as f64 + rng.random_range(-0.1..0.1);
            let center = Vector3::new(
                5.0 * theta.cos(),
                5.0 * theta.sin(),
                rng.random_range(-1.0..1.0),
            );
            let camera = look_at_camera(center, width, width);
            let q = camera * x0.push(1.0);
            let (pu, pv) = (q.x / q.z, q.y / q.z);
            if inlier {
                Ok(DataPoint::Triang {
                    camera,
                    u: pu + noise.sample(rng),
                    v: pv + noise.sample(rng),
                })
            } else {
                redraw("triangulation outlier", || {
                    let u = rng.random_range(0.0..width);
                    let v = rng.random_range(0.0..height);
                    ((u - pu).hypot(v - pv) >= margin).then_some(DataPoint::Triang { camera, u, v })
                })
            }
        })
        .collect::<Result<_>>()?;
    Ok((ParamVector(x0.as_slice().to_vec()), points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{least_squares_fit, to_fractional_forms};
    use crate::mask::SubsetMask;

    fn params(kind: ModelKind, n: usize, inliers: usize, sigma: f64, seed: u64) -> GeneratorParams {
        GeneratorParams {
            kind,
            n,
            inliers,
            sigma,
            spread: if kind == ModelKind::Line2D {
                10.0
            } else {
                DEFAULT_IMAGE_WIDTH
            },
            seed,
        }
    }

    #[test]
    fn labels_and_residuals_match_the_truth() {
        for kind in [
            ModelKind::Line2D,
            ModelKind::Homography,
            ModelKind::Triangulation,
        ] {
            for seed in 0..5 {
                let inst = generate(&params(kind, 30, 20, 0.0, seed)).unwrap();
                let truth = inst.truth.as_ref().unwrap();
                assert_eq!(truth.labels.iter().filter(|&&l| l).count(), 20);
                let forms = to_fractional_forms(&inst.points, kind).unwrap();
                let margin = outlier_margin(kind, 0.0, params(kind, 1, 0, 0.0, 0).spread);
                for (form, &inlier) in forms.iter().zip(&truth.labels) {
                    let r = form.residual(truth.x.as_slice()).unwrap();
                    if inlier {
                        assert!(r < 1e-8, "{kind:?} inlier residual {r}");
                    } else {
                        assert!(r >= margin * (1.0 - 1e-9), "{kind:?} outlier residual {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_inliers_refit_to_the_truth() {
        for kind in [
            ModelKind::Line2D,
            ModelKind::Homography,
            ModelKind::Triangulation,
        ] {
            let inst = generate(&params(kind, 12, 12, 0.0, 3)).unwrap();
            let x = least_squares_fit(kind, &inst.points, &SubsetMask::full(12)).unwrap();
            let truth = &inst.truth.as_ref().unwrap().x;
            for (a, b) in x.as_slice().iter().zip(truth.as_slice()) {
                assert!(
                    (a - b).abs() < 1e-6 * b.abs().max(1.0),
                    "{kind:?}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn seed_determines_the_instance() {
        let p = params(ModelKind::Homography, 15, 10, 1.0, 42);
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        let other = GeneratorParams { seed: 43, ..p };
        assert_ne!(generate(&p).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn invalid_requests() {
        assert_eq!(
            generate(&params(ModelKind::Line2D, 5, 6, 0.1, 0))
                .unwrap_err()
                .exit_code(),
            2
        );
        assert!(generate(&params(ModelKind::Line2D, 0, 0, 0.1, 0)).is_err());
        assert!(generate(&params(ModelKind::Line2D, 5, 5, -1.0, 0)).is_err());
    }

    #[test]
    fn default_thresholds() {
        assert!((default_eps(ModelKind::Line2D, 0.1, 10.0) - 0.3).abs() < 1e-15);
        assert_eq!(default_eps(ModelKind::Line2D, 0.0, 10.0), 0.01);
        assert_eq!(default_eps(ModelKind::Homography, 1.0, 640.0), 4.0);
        assert_eq!(default_eps(ModelKind::Triangulation, 1.0, 640.0), 1.0);
    }
}
