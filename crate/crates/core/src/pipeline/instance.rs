//! Instance files.
//!
//! ```json
//! { "kind": "line", "eps": 0.3,
//!   "points": [[a, b], ...],
//!   "cameras": [[[p00, p01, p02, p03], [..], [..]], ...],
//!   "truth": { "x": [...], "labels": [true, false, ...] },
//!   "seed": 7,
//!   "generator": { "sigma": 0.1, "spread": 10.0, "outlier_fraction": 0.4 } }
//! ```
//!
//! Points are `[a, b]` for lines, `[u1, u2, v1, v2]` for homographies and
//! `[u, v]` for triangulation, where `cameras[i]` is the 3×4 matrix of
//! observation `i`. `cameras`, `truth`, `seed` and `generator` are optional
//! except that triangulation requires `cameras`. Labels are `true` for
//! inliers.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3x4, Vector2};
use serde::{Deserialize, Serialize};

use crate::geometry::{to_fractional_forms, DataPoint, ModelKind, ParamVector};
use crate::minimax::Dataset;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub x: ParamVector,
    /// `true` for inliers.
    pub labels: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Generated {
        seed: u64,
        sigma: f64,
        spread: f64,
        outlier_fraction: f64,
    },
    Ingested {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub kind: ModelKind,
    pub eps: f64,
    pub points: Vec<DataPoint>,
    pub truth: Option<GroundTruth>,
    pub provenance: Provenance,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.truth.as_ref().map(|t| t.labels.as_slice())
    }

    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(self.kind, &self.points)
    }

    /// Checks the structural invariants: at least one point, `eps > 0`, all
    /// points of the instance's kind, full-rank cameras and consistent
    /// ground truth.
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::schema("`points` must hold at least one point"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::schema(format!(
                "`eps` must be positive, got {}",
                self.eps
            )));
        }
        if let Some(i) = self.points.iter().position(|p| p.kind() != self.kind) {
            return Err(Error::schema(format!(
                "points[{i}] is not a {} point",
                self.kind.name()
            )));
        }
        to_fractional_forms(&self.points, self.kind)?;
        if let Some(t) = &self.truth {
            if t.x.len() != self.kind.dim() {
                return Err(Error::schema(format!(
                    "truth.x has {} entries, a {} model has {}",
                    t.x.len(),
                    self.kind.name(),
                    self.kind.dim()
                )));
            }
            if t.labels.len() != self.points.len() {
                return Err(Error::schema(format!(
                    "truth.labels has {} entries for {} points",
                    t.labels.len(),
                    self.points.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile::from(self);
        let mut s =
            serde_json::to_string_pretty(&file).map_err(|e| Error::schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Parses an instance; `origin` becomes the provenance of files without a
    /// generator block.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)
            .map_err(|e| Error::schema(format!("{}: {e}", origin.display())))?;
        let inst = file.into_instance(origin).map_err(|e| match e {
            Error::Schema(msg) => Error::schema(format!("{}: {msg}", origin.display())),
            other => other,
        })?;
        inst.validate()?;
        Ok(inst)
    }
}

pub fn ingest(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)?;
    Instance::from_json(&text, path)
}

pub fn emit_instance(inst: &Instance, path: &Path) -> Result<()> {
    inst.validate()?;
    fs::write(path, inst.to_json()?)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    kind: ModelKind,
    eps: f64,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cameras: Option<Vec<[[f64; 4]; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<TruthFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<GeneratorFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthFile {
    x: Vec<f64>,
    labels: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorFile {
    sigma: f64,
    spread: f64,
    outlier_fraction: f64,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        let points = inst
            .points
            .iter()
            .map(|p| match p {
                DataPoint::Line { a, b } => vec![*a, *b],
                DataPoint::Homog { u, v } => vec![u.x, u.y, v.x, v.y],
                DataPoint::Triang { u, v, .. } => vec![*u, *v],
            })
            .collect();
        let cameras = (inst.kind == ModelKind::Triangulation).then(|| {
            inst.points
                .iter()
                .filter_map(|p| match p {
                    DataPoint::Triang { camera, .. } => Some(std::array::from_fn(|r| {
                        std::array::from_fn(|c| camera[(r, c)])
                    })),
                    _ => None,
                })
                .collect()
        });
        let (seed, generator) = match inst.provenance {
            Provenance::Generated {
                seed,
                sigma,
                spread,
                outlier_fraction,
            } => (
                Some(seed),
                Some(GeneratorFile {
                    sigma,
                    spread,
                    outlier_fraction,
                }),
            ),
            Provenance::Ingested { .. } => (None, None),
        };
        InstanceFile {
            kind: inst.kind,
            eps: inst.eps,
            points,
            cameras,
            truth: inst.truth.as_ref().map(|t| TruthFile {
                x: t.x.0.clone(),
                labels: t.labels.clone(),
            }),
            seed,
            generator,
        }
    }
}

impl InstanceFile {
    fn into_instance(self, origin: &Path) -> Result<Instance> {
        let kind = self.kind;
        let width = match kind {
            ModelKind::Line2D => 2,
            ModelKind::Homography => 4,
            ModelKind::Triangulation => 2,
        };
        if let Some((i, p)) = self
            .points
            .iter()
            .enumerate()
            .find(|(_, p)| p.len() != width)
        {
            return Err(Error::schema(format!(
                "points[{i}] has {} numbers, kind `{}` expects {width}",
                p.len(),
                kind.name()
            )));
        }
        let cameras = match (kind, self.cameras) {
            (ModelKind::Triangulation, None) => {
                return Err(Error::schema(
                    "missing field `cameras` (required for kind `triangulation`)",
                ))
            }
            (ModelKind::Triangulation, Some(c)) if c.len() != self.points.len() => {
                return Err(Error::schema(format!(
                    "`cameras` has {} entries for {} points",
                    c.len(),
                    self.points.len()
                )))
            }
            (ModelKind::Triangulation, Some(c)) => c,
            (_, Some(_)) => {
                return Err(Error::schema(format!(
                    "field `cameras` is only valid for kind `triangulation`, not `{}`",
                    kind.name()
                )))
            }
            (_, None) => Vec::new(),
        };
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| match kind {
                ModelKind::Line2D => DataPoint::Line { a: p[0], b: p[1] },
                ModelKind::Homography => DataPoint::Homog {
                    u: Vector2::new(p[0], p[1]),
                    v: Vector2::new(p[2], p[3]),
                },
                ModelKind::Triangulation => DataPoint::Triang {
                    camera: Matrix3x4::from_fn(|r, c| cameras[i][r][c]),
                    u: p[0],
                    v: p[1],
                },
            })
            .collect();
        let provenance = match (self.seed, self.generator) {
            (Some(seed), Some(g)) => Provenance::Generated {
                seed,
                sigma: g.sigma,
                spread: g.spread,
                outlier_fraction: g.outlier_fraction,
            },
            _ => Provenance::Ingested {
                path: origin.to_path_buf(),
            },
        };
        Ok(Instance {
            kind,
            eps: self.eps,
            points,
            truth: self.truth.map(|t| GroundTruth {
                x: ParamVector(t.x),
                labels: t.labels,
            }),
            provenance,
        })
    }
}
