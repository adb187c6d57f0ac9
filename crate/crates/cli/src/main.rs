//! `jbas`: run beamforming / antenna-selection experiments from a JSON config
//! with optional command-line overrides.
//!
//! Exit codes: 0 success, 1 runtime/IO error, 2 configuration error,
//! 3 at least one infeasible seed, 4 at least one solver failure (which takes
//! precedence over 3).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jbas_cli::config::{apply_overrides, ExperimentConfig, Overrides};
use jbas_cli::experiment::{run_experiment, RunError, SeedOutcome};

#[derive(Parser, Debug)]
#[command(name = "jbas", version, about = "Energy-efficiency experiments for multicast beamforming with antenna selection")]
struct Cli {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Algorithm: alg1, alg1-simple, alg2-f1, alg2-f2, alg2-f3, alg3, pwee, no-as.
    #[arg(long)]
    algorithm: Option<String>,

    /// Run a single seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Comma-separated seed list (mutually exclusive with --seed).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Activation-exponent parameter of the selection relaxation.
    #[arg(long)]
    chi: Option<f64>,

    /// Sparsity surcharge weight (alg2 only).
    #[arg(long)]
    rho: Option<f64>,

    /// Smoothing exponent (alg2 f2/f3 only).
    #[arg(long)]
    varsigma: Option<f64>,

    /// Rate weight in [0, 1] of the power-weighted objective (pwee only).
    #[arg(long)]
    kappa: Option<f64>,

    /// Efficiency weight >= 0 of the trade-off scalarization (alg3 only).
    #[arg(long)]
    varrho: Option<f64>,

    /// Rounding threshold for soft activations.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Iteration cap per successive-approximation phase.
    #[arg(long)]
    max_iter: Option<usize>,

    /// Relative objective-change convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Conic formulation: socp (cone rows only) or generic (exponential rate rows).
    #[arg(long)]
    backend: Option<String>,

    /// Output directory for traces, summary, and manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Also dump each design point's first convex program as text.
    #[arg(long)]
    dump_programs: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };

    let overrides = Overrides {
        algorithm: cli.algorithm.clone(),
        seed: cli.seed,
        seeds: cli.seeds.clone(),
        chi: cli.chi,
        rho: cli.rho,
        varsigma: cli.varsigma,
        kappa: cli.kappa,
        varrho: cli.varrho,
        epsilon: cli.epsilon,
        max_iter: cli.max_iter,
        tol: cli.tol,
        backend: cli.backend.clone(),
    };
    if let Err(e) = apply_overrides(&mut cfg, &overrides) {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }

    let report = match run_experiment(&cfg, &cli.out, cli.dump_programs) {
        Ok(r) => r,
        Err(RunError::Config(e)) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
        Err(RunError::Io(e)) => {
            eprintln!("io error: {e}");
            return ExitCode::from(1);
        }
    };

    let mut ok = 0usize;
    let mut infeasible = 0usize;
    let mut failed = 0usize;
    for cell in &report.cells {
        for outcome in &cell.outcomes {
            match outcome {
                SeedOutcome::Done(_) => ok += 1,
                SeedOutcome::Infeasible { seed, message } => {
                    infeasible += 1;
                    eprintln!("point {} seed {seed}: infeasible: {message}", cell.plan.index);
                }
                SeedOutcome::Failed { seed, message, .. } => {
                    failed += 1;
                    eprintln!("point {} seed {seed}: failed: {message}", cell.plan.index);
                }
            }
        }
    }
    println!(
        "{} design points x {} seeds: {ok} ok, {infeasible} infeasible, {failed} failed; artifacts in {}",
        report.cells.len(),
        report.seeds.len(),
        report.out_dir.display()
    );

    if report.any_failed {
        ExitCode::from(4)
    } else if report.any_infeasible {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}
