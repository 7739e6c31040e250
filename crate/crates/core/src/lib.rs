//! Influence-based robust fitting of lines, homographies and triangulated
//! points.
//!
//! A point's influence is the probability that toggling it in a uniformly
//! random subset changes whether the subset can be fitted within the inlier
//! threshold. Outliers have high influence. This crate computes influences
//! exactly (lattice enumeration, or the Fourier spectrum of the feasibility
//! function), approximately by sampling `k`-subsets, and by simulating
//! measurements of the Bernstein-Vazirani circuit, then refits on the
//! low-influence points.

pub mod error;
pub mod geometry;
pub mod influence;
pub mod lattice;
pub mod mask;
pub mod minimax;
pub mod oracle;
pub mod pipeline;
pub mod quantum;

pub use error::{Error, Result};
pub use geometry::{DataPoint, FractionalForm, ModelKind, ParamVector};
pub use mask::SubsetMask;
pub use minimax::{Dataset, MinimaxResult};
