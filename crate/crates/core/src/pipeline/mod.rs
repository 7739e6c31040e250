//! End-to-end orchestration: synthetic instances, instance files, the
//! two-step influence-then-refit procedure and report emission.

mod fit;
mod generate;
mod instance;
mod report;

pub use fit::{
    bench, consensus, estimate_influence, robust_fit, threshold_mask, BenchReport, FitOptions,
    FitReport, InfluenceRun, Method,
};
pub use generate::{default_eps, default_sigma, generate, GeneratorParams, DEFAULT_IMAGE_WIDTH};
pub use instance::{emit_instance, ingest, GroundTruth, Instance, Provenance};
pub use report::{
    emit_report, influence_csv, read_influence_csv, read_report, write_influence_csv,
    write_plot_data, InfluenceRow,
};

use crate::lattice::DEFAULT_MAX_EXACT_N;
use crate::{Error, Result};

/// Environment variable overriding the exact-enumeration cap.
pub const MAX_EXACT_N_ENV: &str = "RFIT_MAX_EXACT_N";

/// Default threshold on normalised influence.
pub const DEFAULT_GAMMA: f64 = 0.3;

/// Exact-enumeration cap, honouring `RFIT_MAX_EXACT_N`.
pub fn max_exact_n() -> Result<usize> {
    match std::env::var(MAX_EXACT_N_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::usage(format!(
                "{MAX_EXACT_N_ENV} must be a positive integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(DEFAULT_MAX_EXACT_N),
    }
}
