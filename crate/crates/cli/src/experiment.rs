//! Experiment execution and artifact emission.
//!
//! A run expands the config into design-point cells (the cartesian product of
//! the sweep axes), executes every (cell, seed) job, and then writes all
//! artifacts in one pass: one trace CSV per job with iterates, a summary CSV
//! with per-cell means and standard errors, a trade-off CSV when any
//! weighted-objective cells ran, and a manifest tying the outputs to the
//! config hash and code versions. Nothing is written until the config has
//! validated, so a rejected config leaves no files behind.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jbas_core::algorithms::{
    self, AlgoError, BackendPath, IterRecord, RunStatus, SolveOptions,
};
use jbas_core::conic;
use jbas_core::model::{generate_scenario, ScenarioConfig};
use jbas_core::subproblems::{
    build_cc_subproblem, build_masked_refit, build_scalarization_subproblem,
    build_sparsity_subproblem, minimum_power, CcOptions, RatePath,
};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{
    apply_axis, parse_algo, AlgoName, AlgorithmConfig, ConfigError, ExperimentConfig,
};

/// Errors surfaced by a run, split so the binary can map them to exit codes.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// One design point: a fully resolved scenario and algorithm.
#[derive(Debug, Clone)]
pub struct CellPlan {
    pub index: usize,
    /// `"-"` without a sweep, else `"param=value;param=value"`.
    pub label: String,
    pub scenario: ScenarioConfig,
    pub algorithm: AlgorithmConfig,
}

fn value_label(v: &serde_json::Value) -> String {
    match v.as_str() {
        Some(s) => s.to_string(),
        None => v.to_string(),
    }
}

/// Expand the sweep into cells, first axis slowest.
pub fn expand_cells(cfg: &ExperimentConfig) -> Result<Vec<CellPlan>, ConfigError> {
    let axes = match &cfg.sweep {
        None => {
            return Ok(vec![CellPlan {
                index: 0,
                label: "-".to_string(),
                scenario: cfg.scenario.clone(),
                algorithm: cfg.algorithm.clone(),
            }])
        }
        Some(sweep) => sweep.axes(),
    };
    let counts: Vec<usize> = axes.iter().map(|a| a.values.len()).collect();
    let total: usize = counts.iter().product();
    let mut cells = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut scenario = cfg.scenario.clone();
        let mut algorithm = cfg.algorithm.clone();
        let mut parts = Vec::with_capacity(axes.len());
        for (ai, axis) in axes.iter().enumerate() {
            let stride: usize = counts[ai + 1..].iter().product();
            let pick = rem / stride;
            rem %= stride;
            let v = &axis.values[pick];
            apply_axis(&mut scenario, &mut algorithm, &axis.parameter, v)?;
            parts.push(format!("{}={}", axis.parameter, value_label(v)));
        }
        cells.push(CellPlan { index: flat, label: parts.join(";"), scenario, algorithm });
    }
    Ok(cells)
}

/// Metrics of one successful (cell, seed) job.
#[derive(Debug, Clone)]
pub struct SeedMetrics {
    pub seed: u64,
    pub ee_bits_per_joule: f64,
    pub sum_rate_bps: f64,
    pub power_w: f64,
    pub active_antennas: f64,
    pub records: Vec<IterRecord>,
}

#[derive(Debug, Clone)]
pub enum SeedOutcome {
    Done(SeedMetrics),
    /// No feasible point exists (or none was found); excluded from means.
    Infeasible { seed: u64, message: String },
    /// The backend gave up; excluded from means and fails the run.
    Failed { seed: u64, message: String, records: Vec<IterRecord> },
}

/// Run one algorithm on one seeded scenario draw.
pub fn run_seed(cell: &CellPlan, seed: u64) -> SeedOutcome {
    let kind = match parse_algo(&cell.algorithm.name) {
        Ok(k) => k,
        Err(e) => return SeedOutcome::Failed { seed, message: e.to_string(), records: vec![] },
    };
    let s = match generate_scenario(&cell.scenario, seed) {
        Ok(s) => s,
        Err(e) => {
            return SeedOutcome::Failed {
                seed,
                message: format!("scenario generation: {e}"),
                records: vec![],
            }
        }
    };
    let opts = cell.algorithm.to_solve_options();
    let out = match kind {
        AlgoName::Alg1 => algorithms::run_algorithm1(&s, &opts),
        AlgoName::Alg1Simple => algorithms::run_algorithm1_simple(&s, &opts),
        AlgoName::Alg2(k) => algorithms::run_algorithm2(&s, k, &opts),
        AlgoName::Alg3 => algorithms::run_algorithm3(&s, cell.algorithm.varrho, &opts),
        AlgoName::Pwee => algorithms::run_pwee(&s, cell.algorithm.kappa, &opts),
        AlgoName::NoAs => algorithms::run_no_as_baseline(&s, &opts),
    };
    match out {
        Err(e @ AlgoError::Infeasible { .. }) => {
            SeedOutcome::Infeasible { seed, message: e.to_string() }
        }
        Err(e) => SeedOutcome::Failed { seed, message: e.to_string(), records: vec![] },
        Ok(res) => {
            if res.trace.status == RunStatus::SolverFailure {
                return SeedOutcome::Failed {
                    seed,
                    message: "solver failure before a usable iterate".to_string(),
                    records: res.trace.records,
                };
            }
            SeedOutcome::Done(SeedMetrics {
                seed,
                ee_bits_per_joule: res.ee_bits_per_joule,
                sum_rate_bps: res.sum_rate_bps,
                power_w: s.total_power(&res.beamformers, &res.selection),
                active_antennas: res.selection.active_count() as f64,
                records: res.trace.records,
            })
        }
    }
}

#[derive(Debug)]
pub struct CellReport {
    pub plan: CellPlan,
    pub outcomes: Vec<SeedOutcome>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
    pub seeds: Vec<u64>,
    pub any_infeasible: bool,
    pub any_failed: bool,
    pub out_dir: PathBuf,
}

/// Stable content hash of the config: sha256 over its canonical JSON form.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

#[derive(Serialize)]
struct ManifestVersions {
    harness: &'static str,
    core: &'static str,
}

#[derive(Serialize)]
struct Manifest {
    config_sha256: String,
    seed_count: usize,
    versions: ManifestVersions,
}

const TRACE_HEADER: &str =
    "seed,iter,phase,objective,ee_bits_per_joule,sum_rate_bps,power_w,active_antennas,solve_ms";

fn trace_csv(seed: u64, records: &[IterRecord]) -> String {
    let mut out = String::with_capacity(64 + 128 * records.len());
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{seed},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.3}",
            r.iter,
            r.phase,
            r.objective,
            r.ee_bits_per_joule,
            r.sum_rate_bps,
            r.power_w,
            r.active_antennas,
            r.solve_ms
        );
    }
    out
}

struct Moments {
    n: usize,
    mean: f64,
    stderr: f64,
}

/// Sample mean and standard error (sample std over sqrt n); stderr is 0 for
/// fewer than two points and the mean is NaN for zero points.
fn moments(xs: &[f64]) -> Moments {
    let n = xs.len();
    if n == 0 {
        return Moments { n, mean: f64::NAN, stderr: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Moments { n, mean, stderr: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Moments { n, mean, stderr: (var / n as f64).sqrt() }
}

fn cell_done_metrics(report: &CellReport) -> Vec<&SeedMetrics> {
    report
        .outcomes
        .iter()
        .filter_map(|o| match o {
            SeedOutcome::Done(m) => Some(m),
            _ => None,
        })
        .collect()
}

const SUMMARY_HEADER: &str = "point,label,algorithm,seeds_ok,seeds_infeasible,seeds_failed,\
mean_ee_bits_per_joule,stderr_ee_bits_per_joule,mean_sum_rate_bps,stderr_sum_rate_bps,\
mean_power_w,stderr_power_w,mean_active_antennas,stderr_active_antennas,note";

fn summary_csv(cells: &[CellReport]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for cell in cells {
        let done = cell_done_metrics(cell);
        let infeasible =
            cell.outcomes.iter().filter(|o| matches!(o, SeedOutcome::Infeasible { .. })).count();
        let failed =
            cell.outcomes.iter().filter(|o| matches!(o, SeedOutcome::Failed { .. })).count();
        let ee = moments(&done.iter().map(|m| m.ee_bits_per_joule).collect::<Vec<_>>());
        let sr = moments(&done.iter().map(|m| m.sum_rate_bps).collect::<Vec<_>>());
        let pw = moments(&done.iter().map(|m| m.power_w).collect::<Vec<_>>());
        let act = moments(&done.iter().map(|m| m.active_antennas).collect::<Vec<_>>());
        let mut notes = Vec::new();
        if infeasible > 0 {
            notes.push(format!("{infeasible} infeasible seeds excluded"));
        }
        if failed > 0 {
            notes.push(format!("{failed} failed seeds excluded"));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{}",
            cell.plan.index,
            cell.plan.label,
            cell.plan.algorithm.name,
            ee.n,
            infeasible,
            failed,
            ee.mean,
            ee.stderr,
            sr.mean,
            sr.stderr,
            pw.mean,
            pw.stderr,
            act.mean,
            act.stderr,
            notes.join("; ")
        );
    }
    out
}

const TRADEOFF_HEADER: &str =
    "algorithm,control,mean_ee_bits_per_joule,mean_sum_rate_bps,mean_active_antennas";

/// Trade-off rows: one per weighted-objective cell, keyed by its control
/// weight (`kappa` for the power-weighted objective, `varrho` for the
/// scalarization). Returns None when no such cell ran.
fn tradeoff_csv(cells: &[CellReport]) -> Option<String> {
    let mut rows: Vec<(String, f64, f64, f64, f64)> = Vec::new();
    for cell in cells {
        let control = match cell.plan.algorithm.name.as_str() {
            "pwee" => cell.plan.algorithm.kappa,
            "alg3" => cell.plan.algorithm.varrho,
            _ => continue,
        };
        let done = cell_done_metrics(cell);
        let ee = moments(&done.iter().map(|m| m.ee_bits_per_joule).collect::<Vec<_>>());
        let sr = moments(&done.iter().map(|m| m.sum_rate_bps).collect::<Vec<_>>());
        let act = moments(&done.iter().map(|m| m.active_antennas).collect::<Vec<_>>());
        rows.push((cell.plan.algorithm.name.clone(), control, ee.mean, sr.mean, act.mean));
    }
    if rows.is_empty() {
        return None;
    }
    rows.sort_by(|a, b| (a.0.as_str(), a.1).partial_cmp(&(b.0.as_str(), b.1)).unwrap());
    let mut out = String::new();
    out.push_str(TRADEOFF_HEADER);
    out.push('\n');
    for (name, control, ee, sr, act) in rows {
        let _ = writeln!(out, "{name},{control},{ee:.10e},{sr:.10e},{act:.10e}");
    }
    Some(out)
}

fn rate_path_of(opts: &SolveOptions) -> RatePath {
    match opts.backend_path {
        BackendPath::Socp => RatePath::Soc,
        BackendPath::Generic => {
            if conic::supports_exponential() {
                RatePath::Exponential
            } else {
                RatePath::Soc
            }
        }
    }
}

/// Text dump of the phase-1 program each cell would solve first on the given
/// seed. Initialization failures are recorded in the file instead.
fn dump_cell_program(cell: &CellPlan, seed: u64) -> String {
    let kind = match parse_algo(&cell.algorithm.name) {
        Ok(k) => k,
        Err(e) => return format!("{e}\n"),
    };
    let s = match generate_scenario(&cell.scenario, seed) {
        Ok(s) => s,
        Err(e) => return format!("scenario generation failed: {e}\n"),
    };
    let opts = cell.algorithm.to_solve_options();
    let ep = match algorithms::initialize_feasible(&s, &opts) {
        Ok(ep) => ep,
        Err(e) => return format!("initialization failed: {e}\n"),
    };
    let sn = s.noise_normalized();
    let rate_path = rate_path_of(&opts);
    let cc = |kappa: f64| CcOptions { kappa, min_active_rows: true, rate_path };
    let built = match kind {
        AlgoName::Alg1 | AlgoName::Alg1Simple => build_cc_subproblem(&sn, &ep, opts.chi, &cc(1.0)),
        AlgoName::Pwee => build_cc_subproblem(&sn, &ep, opts.chi, &cc(cell.algorithm.kappa)),
        AlgoName::Alg2(k) => {
            build_sparsity_subproblem(&sn, &ep, k, opts.rho, opts.varsigma, rate_path)
        }
        AlgoName::Alg3 => build_scalarization_subproblem(
            &sn,
            &ep,
            opts.chi,
            cell.algorithm.varrho,
            minimum_power(&sn),
            &cc(1.0),
        ),
        AlgoName::NoAs => {
            let mask = vec![true; sn.config.antennas_per_bs.iter().sum()];
            build_masked_refit(&sn, &ep, &mask, 1.0, rate_path)
        }
    };
    conic::dump(&built.prog)
}

/// Validate, execute every (cell, seed) job, and write all artifacts under
/// `out_dir`. Returns the in-memory report for callers that inspect results.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    dump_programs: bool,
) -> Result<ExperimentReport, RunError> {
    cfg.validate()?;
    let cells = expand_cells(cfg)?;
    let seeds = cfg.seeds();

    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c.index, s)))
        .collect();
    let results: Vec<SeedOutcome> =
        jobs.par_iter().map(|&(ci, seed)| run_seed(&cells[ci], seed)).collect();

    let mut reports: Vec<CellReport> =
        cells.into_iter().map(|plan| CellReport { plan, outcomes: Vec::new() }).collect();
    for (&(ci, _), outcome) in jobs.iter().zip(results) {
        reports[ci].outcomes.push(outcome);
    }

    std::fs::create_dir_all(out_dir)?;
    for cell in &reports {
        for outcome in &cell.outcomes {
            let (seed, records) = match outcome {
                SeedOutcome::Done(m) => (m.seed, &m.records),
                SeedOutcome::Failed { seed, records, .. } => (*seed, records),
                SeedOutcome::Infeasible { .. } => continue,
            };
            if records.is_empty() {
                continue;
            }
            let name = format!("trace_p{:03}_s{}.csv", cell.plan.index, seed);
            std::fs::write(out_dir.join(name), trace_csv(seed, records))?;
        }
    }
    std::fs::write(out_dir.join("summary.csv"), summary_csv(&reports))?;
    if let Some(text) = tradeoff_csv(&reports) {
        std::fs::write(out_dir.join("tradeoff.csv"), text)?;
    }
    let manifest = Manifest {
        config_sha256: config_hash(cfg),
        seed_count: seeds.len(),
        versions: ManifestVersions {
            harness: env!("CARGO_PKG_VERSION"),
            core: jbas_core::VERSION,
        },
    };
    let manifest_text =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out_dir.join("manifest.json"), manifest_text + "\n")?;

    if dump_programs {
        let dir = out_dir.join("programs");
        std::fs::create_dir_all(&dir)?;
        for cell in &reports {
            let text = dump_cell_program(&cell.plan, seeds[0]);
            std::fs::write(dir.join(format!("p{:03}.txt", cell.plan.index)), text)?;
        }
    }

    let any_infeasible = reports
        .iter()
        .any(|c| c.outcomes.iter().any(|o| matches!(o, SeedOutcome::Infeasible { .. })));
    let any_failed = reports
        .iter()
        .any(|c| c.outcomes.iter().any(|o| matches!(o, SeedOutcome::Failed { .. })));
    Ok(ExperimentReport {
        cells: reports,
        seeds,
        any_infeasible,
        any_failed,
        out_dir: out_dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_expansion_orders_first_axis_slowest() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"sweep": [{"parameter": "algorithm", "values": ["alg1", "no-as"]},
                          {"parameter": "antennas_per_bs", "values": [2, 3, 4]}]}"#,
        )
        .unwrap();
        let cells = expand_cells(&cfg).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].label, "algorithm=alg1;antennas_per_bs=2");
        assert_eq!(cells[2].label, "algorithm=alg1;antennas_per_bs=4");
        assert_eq!(cells[3].label, "algorithm=no-as;antennas_per_bs=2");
        assert_eq!(cells[3].scenario.antennas_per_bs, vec![2, 2]);
        assert_eq!(cells[5].algorithm.name, "no-as");
        for (i, c) in cells.iter().enumerate() {
            assert_eq!(c.index, i);
        }
    }

    #[test]
    fn hash_is_stable_and_config_sensitive() {
        let a = ExperimentConfig::from_json_str(r#"{"algorithm": {"chi": 2.0}}"#).unwrap();
        let b = ExperimentConfig::from_json_str(r#"{"algorithm": {"chi": 2.0}}"#).unwrap();
        let c = ExperimentConfig::from_json_str(r#"{"algorithm": {"chi": 3.0}}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn moments_match_hand_computation() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.n, 4);
        assert!((m.mean - 2.5).abs() < 1e-12);
        // sample variance 5/3, stderr sqrt(5/12)
        assert!((m.stderr - (5.0_f64 / 12.0).sqrt()) < 1e-12);
        let single = moments(&[7.0]);
        assert_eq!(single.stderr, 0.0);
        assert!(moments(&[]).mean.is_nan());
    }

    #[test]
    fn trace_csv_has_exact_header_and_row_shape() {
        let rec = IterRecord {
            iter: 1,
            phase: 1,
            objective: 0.5,
            ee_bits_per_joule: 1e6,
            sum_rate_bps: 2e7,
            power_w: 11.0,
            active_antennas: 12.0,
            solve_ms: 3.25,
        };
        let text = trace_csv(42, &[rec]);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "seed,iter,phase,objective,ee_bits_per_joule,sum_rate_bps,power_w,active_antennas,solve_ms"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("42,1,1,"));
        assert_eq!(row.split(',').count(), 9);
        assert!(row.ends_with(",3.250"));
    }
}
