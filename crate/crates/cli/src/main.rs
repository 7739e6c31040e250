//! `rfit`: generate instances, compute influences, fit robustly and compare
//! query counts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfit_core::pipeline::{
    bench, default_sigma, emit_instance, emit_report, estimate_influence, generate, influence_csv,
    ingest, max_exact_n, read_report, robust_fit, write_influence_csv, write_plot_data, FitOptions,
    FitReport, GeneratorParams, Method, DEFAULT_GAMMA, DEFAULT_IMAGE_WIDTH,
};
use rfit_core::{Error, ModelKind, Result};

#[derive(Parser)]
#[command(
    name = "rfit",
    version,
    about = "Influence-based robust geometric fitting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance file.
    Gen {
        /// line, triangulation or homography.
        #[arg(long)]
        kind: ModelKind,
        #[arg(long)]
        n: usize,
        /// Inlier count; defaults to all points.
        #[arg(long)]
        inliers: Option<usize>,
        /// Noise standard deviation [default: 0.1 for lines, 1 px for
        /// homographies, 0.25 px for triangulation].
        #[arg(long)]
        sigma: Option<f64>,
        /// Outlier box side for lines, image width in pixels otherwise
        /// [default: 10 for lines, 640 otherwise].
        #[arg(long)]
        spread: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inlier threshold stored in the file [default: depends on kind].
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute influences and write them as CSV.
    Influence {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "exact")]
        method: Method,
        #[arg(long, default_value_t = 800)]
        m: usize,
        /// Overrides the instance threshold.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Threshold used for the `label_pred` column.
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        /// Output path; the CSV goes to stdout when omitted.
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Threshold influences at gamma and refit on the retained points.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "exact")]
        method: Method,
        #[arg(long, default_value_t = 800)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fit-report JSON path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print logical oracle-query counts of the classical and quantum
    /// estimators.
    Bench {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 800)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn a fit report into an influence CSV and plot data.
    Report {
        /// Fit-report JSON written by `fit --report`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory for `influence_sorted.csv` and `influence.gp`.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            kind,
            n,
            inliers,
            sigma,
            spread,
            seed,
            eps,
            out,
        } => {
            let image = kind != ModelKind::Line2D;
            let mut inst = generate(&GeneratorParams {
                kind,
                n,
                inliers: inliers.unwrap_or(n),
                sigma: sigma.unwrap_or_else(|| default_sigma(kind)),
                spread: spread.unwrap_or(if image { DEFAULT_IMAGE_WIDTH } else { 10.0 }),
                seed,
            })?;
            if let Some(eps) = eps {
                inst.eps = eps;
            }
            emit_instance(&inst, &out)?;
            println!(
                "wrote {} {} points (eps = {}) to {}",
                inst.n(),
                kind.name(),
                inst.eps,
                out.display()
            );
        }
        Command::Influence {
            input,
            method,
            m,
            eps,
            seed,
            gamma,
            out_csv,
        } => {
            let inst = ingest(&input)?;
            let data = inst.dataset()?;
            let eps = eps.unwrap_or(inst.eps);
            let run = estimate_influence(&data, eps, method, m, seed, max_exact_n()?)?;
            let labels = inst.labels();
            match out_csv {
                Some(path) => {
                    write_influence_csv(&path, &run.influence.alphas, gamma, labels)?;
                    eprintln!(
                        "{} influences, {} oracle queries, {} minimax solves",
                        run.influence.method.label(),
                        run.oracle_queries,
                        run.solver_calls
                    );
                }
                None => influence_csv(
                    std::io::stdout().lock(),
                    &run.influence.alphas,
                    gamma,
                    labels,
                )?,
            }
        }
        Command::Fit {
            input,
            method,
            m,
            gamma,
            seed,
            report,
        } => {
            let inst = ingest(&input)?;
            let fit = robust_fit(
                &inst,
                &FitOptions {
                    method,
                    m,
                    gamma,
                    seed,
                    eps: None,
                    max_exact_n: max_exact_n()?,
                },
            )?;
            print_fit(&fit);
            eprintln!("elapsed: {:.3} s", fit.elapsed.as_secs_f64());
            if let Some(path) = report {
                emit_report(&fit, &path)?;
            }
        }
        Command::Bench { input, m, seed } => {
            let inst = ingest(&input)?;
            print!("{}", bench(&inst, m, seed, max_exact_n()?)?.to_table());
        }
        Command::Report { input, csv, plots } => {
            let fit = read_report(&input)?;
            if csv.is_none() && plots.is_none() {
                return Err(Error::usage("report needs --csv and/or --plots"));
            }
            if let Some(path) = csv {
                write_influence_csv(&path, &fit.alphas, fit.gamma, fit.labels_true.as_deref())?;
            }
            if let Some(dir) = plots {
                write_plot_data(&dir, &fit)?;
            }
            print_fit(&fit);
        }
    }
    Ok(())
}

fn print_fit(fit: &FitReport) {
    let kept = fit.inlier_mask.iter().filter(|&&b| b).count();
    println!(
        "kind: {}  N = {}  eps = {}",
        fit.kind.name(),
        fit.n,
        fit.eps
    );
    println!(
        "method: {:?}  oracle queries: {}  minimax solves: {}",
        fit.method, fit.oracle_queries, fit.solver_calls
    );
    println!("kept {kept}/{} points at gamma = {}", fit.n, fit.gamma);
    println!("params: {:?}", fit.params.as_slice());
    println!("consensus: {}", fit.consensus);
    if let Some(acc) = fit.label_accuracy() {
        println!("label accuracy: {acc:.4}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
