//! Successive-convex-approximation drivers: slack-penalized feasibility
//! initialization, the phase-1 iterate loop shared by all methods, Boolean
//! rounding with restoration, and the fixed-mask phase-2 refit.
//!
//! Every driver solves on a noise-normalized copy of the scenario (rates,
//! powers, and efficiency are invariant under that scaling) and reports
//! final figures by exact re-evaluation through the model module, never
//! from subproblem objectives.

use crate::bounds::ExpansionPoint;
use crate::conic::{solve, SolveStatus, TolSpec};
use crate::model::{BeamformerSet, Scenario, SelectionState, LN2};
use crate::subproblems::{
    build_cc_subproblem, build_feasibility_subproblem, build_masked_refit,
    build_masked_scalarization, build_scalarization_subproblem, build_sparsity_subproblem,
    build_socp_subproblem, extract_slacks, minimum_power, recover_point, BuiltProgram, CcOptions,
    RatePath,
};
pub use crate::bounds::SmoothingKind;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error("no feasible point found (worst slack {worst_slack:.3e}, violated groups {violated_groups:?})")]
    Infeasible { violated_groups: Vec<usize>, worst_slack: f64 },
    #[error("solver failure during {0}")]
    Solver(String),
    #[error("invalid options: {0}")]
    Options(String),
}

/// Which conic formulation the drivers request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendPath {
    /// Second-order-cone rows only.
    Socp,
    /// Exponential-cone rate rows when the backend supports them.
    Generic,
}

/// Driver knobs. `rho` and `varsigma` only affect the sparsity driver;
/// method-specific weights (`kappa`, `varrho`) are explicit run arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub chi: f64,
    /// Rounding threshold for soft activations and normalized norms.
    pub epsilon: f64,
    /// Iteration cap per SCA phase.
    pub max_iter: usize,
    /// Relative objective-change convergence tolerance.
    pub rel_tol: f64,
    pub backend_path: BackendPath,
    /// Emit per-BS minimum-activation rows.
    pub min_active_rows: bool,
    /// Sparsity surcharge on the RF price.
    pub rho: f64,
    /// Smoothing sharpness for the concave antenna-count surrogates.
    pub varsigma: f64,
    /// Seed for the random initial beamformers; derived from the scenario
    /// seed when absent.
    pub init_seed: Option<u64>,
    pub solver_tol: TolSpec,
    pub feas_lambda: f64,
    pub feas_max_iter: usize,
    pub slack_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            chi: 2.0,
            epsilon: 1e-3,
            max_iter: 50,
            rel_tol: 1e-4,
            backend_path: BackendPath::Socp,
            min_active_rows: true,
            rho: 0.0,
            varsigma: 2.0,
            init_seed: None,
            solver_tol: TolSpec { feas: 1e-9, gap: 1e-10 },
            feas_lambda: 10.0,
            feas_max_iter: 100,
            slack_tol: 1e-6,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), AlgoError> {
        let fail = |m: &str| Err(AlgoError::Options(m.to_string()));
        if !(self.chi >= 1.0) {
            return fail("chi must be >= 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return fail("epsilon must lie in (0, 0.5)");
        }
        if self.max_iter < 1 {
            return fail("max_iter must be >= 1");
        }
        if !(self.rel_tol > 0.0) {
            return fail("rel_tol must be positive");
        }
        if !(self.rho >= 0.0) {
            return fail("rho must be nonnegative");
        }
        if !(self.varsigma >= 1.0) {
            return fail("varsigma must be >= 1");
        }
        Ok(())
    }

    fn rate_path(&self) -> RatePath {
        match self.backend_path {
            BackendPath::Socp => RatePath::Soc,
            BackendPath::Generic => {
                if crate::conic::supports_exponential() {
                    RatePath::Exponential
                } else {
                    RatePath::Soc
                }
            }
        }
    }
}

/// One row of a run trace. `objective` is the relaxed subproblem objective
/// rescaled to bits-per-joule-compatible units; efficiency, rate, and power
/// are exact re-evaluations of the recovered iterate with the thresholded
/// antenna mask.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub phase: u8,
    pub objective: f64,
    pub ee_bits_per_joule: f64,
    pub sum_rate_bps: f64,
    pub power_w: f64,
    /// Soft activation sum in phase 1, active count in phase 2.
    pub active_antennas: f64,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    IterationLimit,
    SolverFailure,
    /// Phase 2 could not be made feasible; phase-1 point reported instead.
    RoundingFallback,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
}

/// Final output of a driver run. For the full drivers, rows of switched-off
/// antennas are exactly zero; the phase-1-only driver reports the relaxed
/// beamformers with a thresholded mask for accounting.
#[derive(Debug, Clone)]
pub struct JbasResult {
    pub beamformers: BeamformerSet,
    pub selection: SelectionState,
    pub ee_bits_per_joule: f64,
    pub sum_rate_bps: f64,
    pub group_rates_bps: Vec<f64>,
    pub trace: RunTrace,
    /// Final per-user SINR variables (for activity audits).
    pub final_gamma: Vec<f64>,
    pub final_beta: Vec<f64>,
}

pub(crate) fn derived_seed(s: &Scenario, opts: &SolveOptions) -> u64 {
    opts.init_seed.unwrap_or(s.seed ^ 0x9E37_79B9_7F4A_7C15)
}

/// Finds a strictly feasible starting point by iterating the slack-penalized
/// feasibility problem from random small beamformers until every slack drops
/// below `slack_tol`. The activation vector starts all-ones.
pub fn initialize_feasible(s: &Scenario, opts: &SolveOptions) -> Result<ExpansionPoint, AlgoError> {
    opts.validate()?;
    let sn = s.noise_normalized();
    feasible_start(&sn, opts, None, derived_seed(s, opts))
}

/// Random-restart wrapper: a numerically failed attempt retries from the
/// next draw of the same seeded stream with smaller starting beamformers.
/// Infeasibility verdicts are final; only solver breakdowns are retried.
fn feasible_start(
    sn: &Scenario,
    opts: &SolveOptions,
    mask: Option<&[bool]>,
    seed: u64,
) -> Result<ExpansionPoint, AlgoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for attempt in 0..4 {
        match feasible_attempt(sn, opts, mask, &mut rng, 0.5f64.powi(attempt)) {
            Ok(ep) => return Ok(ep),
            Err(e @ AlgoError::Infeasible { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("attempt loop ran"))
}

fn feasible_attempt(
    sn: &Scenario,
    opts: &SolveOptions,
    mask: Option<&[bool]>,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> Result<ExpansionPoint, AlgoError> {
    let a01: Vec<f64> = match mask {
        Some(m) => m.iter().map(|&on| if on { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0; sn.num_antennas_total()],
    };

    let mut w = BeamformerSet::zeros(sn);
    for (g, grp) in sn.groups.iter().enumerate() {
        let b = grp.serving_bs;
        let g_b = sn.groups_of_bs(b).len() as f64;
        let sigma = scale * (0.25 * sn.config.power.p_max / g_b).sqrt();
        let off = sn.antenna_offset(b);
        for i in 0..sn.config.antennas_per_bs[b] {
            // Draw for every antenna to keep the stream layout-independent,
            // then zero the switched-off rows.
            let re: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
            let im: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
            if mask.map_or(true, |m| m[off + i]) {
                w.per_group[g][i] =
                    num_complex::Complex64::new(re * sigma / 2f64.sqrt(), im * sigma / 2f64.sqrt());
            }
        }
    }

    let mut ep = ExpansionPoint::from_beamformers(sn, &w, &a01);
    let mut lambda = opts.feas_lambda;
    let mut escalations = 0usize;
    let mut stall = 0usize;
    let mut best_total = f64::INFINITY;
    let mut last_slacks = None;

    for _ in 0..opts.feas_max_iter {
        // Always the cone rate path here: the initializer only has to hand
        // back a deterministic feasible point, and keeping it independent of
        // the backend flag lets both backends start from the same iterate.
        let built = build_feasibility_subproblem(sn, &ep, lambda, RatePath::Soc, mask);
        let sol = solve(&built.prog, &opts.solver_tol);
        if sol.status != SolveStatus::Optimal {
            return Err(AlgoError::Solver(format!(
                "feasibility initialization ({:?})",
                sol.status
            )));
        }
        let rec = recover_point(&built.layout, &sol.x);
        let slacks = extract_slacks(&built.layout, &sol.x).expect("feasibility layout has slacks");

        // Interference-plus-noise can never drop below the noise floor;
        // clamping the expansion there keeps surrogate coefficients tame.
        let n0 = sn.n0_linear();
        ep = ExpansionPoint {
            w: rec.w,
            beta: rec.beta.iter().map(|&b| b.max(n0)).collect(),
            gamma: rec.gamma.iter().map(|&g| g.max(0.0)).collect(),
            a: a01.clone(),
            r: ep.r,
            x: ep.x,
        };

        if slacks.worst() <= opts.slack_tol {
            // Re-derive exact per-user terms so phase 1 starts from true
            // SINR values rather than solver variables.
            return Ok(ExpansionPoint::from_beamformers(sn, &ep.w, &a01));
        }

        let total = slacks.total();
        if total < best_total * (1.0 - 0.01) {
            best_total = total;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 5 {
                if escalations < 3 {
                    lambda *= 10.0;
                    escalations += 1;
                    stall = 0;
                } else {
                    last_slacks = Some(slacks);
                    break;
                }
            }
        }
        last_slacks = Some(slacks);
    }

    let slacks = last_slacks.ok_or_else(|| AlgoError::Solver("empty feasibility loop".into()))?;
    let mut violated: Vec<usize> = (0..sn.num_groups())
        .filter(|&g| slacks.mu[g] > opts.slack_tol)
        .collect();
    for (k, q) in slacks.q1.iter().enumerate() {
        if (*q > opts.slack_tol || slacks.q2[k] > opts.slack_tol)
            && !violated.contains(&sn.group_of_user(k))
        {
            violated.push(sn.group_of_user(k));
        }
    }
    violated.sort_unstable();
    Err(AlgoError::Infeasible { violated_groups: violated, worst_slack: slacks.worst() })
}

/// What the SCA loop builds each iteration.
enum ProgramSpec<'a> {
    Efficiency { chi: f64, kappa: f64 },
    Sparsity { kind: SmoothingKind, rho: f64, varsigma: f64 },
    Scalarization { chi: f64, varrho: f64, p_min: f64 },
    MaskedRefit { mask: &'a [bool], kappa: f64 },
    MaskedScalarization { mask: &'a [bool], varrho: f64, p_min: f64 },
}

impl<'a> ProgramSpec<'a> {
    fn build(&self, sn: &Scenario, ep: &ExpansionPoint, opts: &SolveOptions) -> BuiltProgram {
        let cc = CcOptions {
            kappa: 1.0,
            min_active_rows: opts.min_active_rows,
            rate_path: opts.rate_path(),
        };
        match self {
            ProgramSpec::Efficiency { chi, kappa } => match opts.backend_path {
                BackendPath::Socp => {
                    build_socp_subproblem(sn, ep, *chi, &CcOptions { kappa: *kappa, ..cc })
                }
                BackendPath::Generic => {
                    build_cc_subproblem(sn, ep, *chi, &CcOptions { kappa: *kappa, ..cc })
                }
            },
            ProgramSpec::Sparsity { kind, rho, varsigma } => {
                build_sparsity_subproblem(sn, ep, *kind, *rho, *varsigma, opts.rate_path())
            }
            ProgramSpec::Scalarization { chi, varrho, p_min } => {
                build_scalarization_subproblem(sn, ep, *chi, *varrho, *p_min, &cc)
            }
            ProgramSpec::MaskedRefit { mask, kappa } => {
                build_masked_refit(sn, ep, mask, *kappa, opts.rate_path())
            }
            ProgramSpec::MaskedScalarization { mask, varrho, p_min } => {
                build_masked_scalarization(sn, ep, mask, *varrho, *p_min, opts.rate_path())
            }
        }
    }

    /// Per-antenna activity estimate used for rounding and tracing.
    fn metric(&self, sn: &Scenario, w: &BeamformerSet, a: &[f64]) -> Vec<f64> {
        match self {
            ProgramSpec::Efficiency { .. } | ProgramSpec::Scalarization { .. } => a.to_vec(),
            ProgramSpec::Sparsity { .. } => {
                let sqrt_pmax = sn.config.power.p_max.sqrt();
                (0..sn.num_bs())
                    .flat_map(|b| {
                        (0..sn.config.antennas_per_bs[b])
                            .map(move |i| (b, i))
                            .collect::<Vec<_>>()
                    })
                    .map(|(b, i)| (w.antenna_row_norm(sn, b, i) / sqrt_pmax).min(1.0))
                    .collect()
            }
            ProgramSpec::MaskedRefit { mask, .. }
            | ProgramSpec::MaskedScalarization { mask, .. } => {
                mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
            }
        }
    }

    fn is_masked(&self) -> bool {
        matches!(
            self,
            ProgramSpec::MaskedRefit { .. } | ProgramSpec::MaskedScalarization { .. }
        )
    }
}

struct LoopOut {
    ep: ExpansionPoint,
    metric: Vec<f64>,
    status: RunStatus,
    /// The very first solve came back infeasible (phase-2 restoration cue).
    first_infeasible: bool,
}

/// Shared SCA loop: build, solve, recover, safeguard, trace, converge.
///
/// A solved objective strictly below the previous iterate's can only come
/// from solver noise (each program contains the previous iterate), so the
/// step is rejected and the loop declares convergence at the prior point.
fn sca_loop(
    sn: &Scenario,
    sp: &Scenario,
    spec: &ProgramSpec,
    mut ep: ExpansionPoint,
    opts: &SolveOptions,
    phase: u8,
    iter_start: usize,
    records: &mut Vec<IterRecord>,
) -> LoopOut {
    let w_hz = sp.config.power.bandwidth_hz;
    let mut prev_obj: Option<f64> = None;
    let mut metric = spec.metric(sn, &ep.w, &ep.a);
    let mut status = RunStatus::IterationLimit;
    let mut first_infeasible = false;

    for it in 0..opts.max_iter {
        let t0 = Instant::now();
        let built = spec.build(sn, &ep, opts);
        let mut sol = solve(&built.prog, &opts.solver_tol);
        if sol.status != SolveStatus::Optimal {
            // Near convergence the subproblems turn degenerate (activation
            // rows collapse); one re-solve at looser tolerances usually
            // rides it out and the monotone safeguard vets the step.
            let relaxed = TolSpec {
                feas: opts.solver_tol.feas * 100.0,
                gap: opts.solver_tol.gap * 100.0,
            };
            sol = solve(&built.prog, &relaxed);
        }
        let ms = t0.elapsed().as_secs_f64() * 1e3;

        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible if it == 0 => {
                first_infeasible = true;
                status = RunStatus::SolverFailure;
                break;
            }
            _ => {
                status = RunStatus::SolverFailure;
                break;
            }
        }

        let rec = recover_point(&built.layout, &sol.x);
        if !rec.w.is_finite() {
            status = RunStatus::SolverFailure;
            break;
        }
        let native = sol.objective;
        if let Some(p) = prev_obj {
            if native < p {
                status = RunStatus::Converged;
                break;
            }
        }

        metric = spec.metric(sn, &rec.w, &rec.a);
        let mask_est: Vec<bool> = metric.iter().map(|&m| m >= opts.epsilon).collect();
        let state = SelectionState {
            a: metric.iter().map(|&m| m.clamp(0.0, 1.0)).collect(),
            v: per_antenna_power(sp, &rec.w),
            mask: mask_est,
        };
        let active = if spec.is_masked() {
            state.active_count() as f64
        } else {
            metric.iter().sum()
        };
        records.push(IterRecord {
            iter: iter_start + it,
            phase,
            objective: native * w_hz / LN2,
            ee_bits_per_joule: sp.energy_efficiency(&rec.w, &state),
            sum_rate_bps: sp.sum_rate_bps(&rec.w),
            power_w: sp.total_power(&rec.w, &state),
            active_antennas: active,
            solve_ms: ms,
        });

        let n0 = sn.n0_linear();
        ep = ExpansionPoint {
            w: rec.w,
            beta: rec.beta.iter().map(|&b| b.max(n0)).collect(),
            gamma: rec.gamma.iter().map(|&g| g.max(0.0)).collect(),
            a: rec.a.iter().map(|&a| a.clamp(1e-9, 1.0)).collect(),
            r: rec.r_tot.map_or(ep.r, |r| r.max(1e-12)),
            x: rec.x_ee.map_or(ep.x, |x| x.max(1e-12)),
        };

        if let Some(p) = prev_obj {
            if (native - p).abs() <= opts.rel_tol * p.abs().max(1.0) {
                status = RunStatus::Converged;
                break;
            }
        }
        prev_obj = Some(native);
    }

    LoopOut { ep, metric, status, first_infeasible }
}

fn per_antenna_power(s: &Scenario, w: &BeamformerSet) -> Vec<f64> {
    (0..s.num_bs())
        .flat_map(|b| (0..s.config.antennas_per_bs[b]).map(move |i| (b, i)).collect::<Vec<_>>())
        .map(|(b, i)| w.antenna_row(s, b, i).iter().map(|c| c.norm_sqr()).sum())
        .collect()
}

/// Threshold a soft-activity vector into a mask, keeping at least the
/// per-BS minimum active count (taking the largest metrics) and at least
/// one antenna overall.
fn threshold_mask(s: &Scenario, metric: &[f64], epsilon: f64) -> Vec<bool> {
    let mut mask: Vec<bool> = metric.iter().map(|&m| m >= epsilon).collect();
    for (b, &need) in s.min_active_antennas().iter().enumerate() {
        let off = s.antenna_offset(b);
        let n_b = s.config.antennas_per_bs[b];
        let have = (0..n_b).filter(|&i| mask[off + i]).count();
        if have < need {
            let mut order: Vec<usize> = (0..n_b).collect();
            order.sort_by(|&i, &j| metric[off + j].total_cmp(&metric[off + i]));
            for &i in order.iter().take(need) {
                mask[off + i] = true;
            }
        }
    }
    if mask.iter().all(|&m| !m) {
        let best = (0..metric.len())
            .max_by(|&i, &j| metric[i].total_cmp(&metric[j]))
            .expect("at least one antenna");
        mask[best] = true;
    }
    mask
}

fn project_masked(s: &Scenario, w: &BeamformerSet, mask: &[bool]) -> BeamformerSet {
    let mut out = w.clone();
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            if !mask[off + i] {
                for &g in &s.groups_of_bs(b) {
                    out.per_group[g][i] = num_complex::Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    out
}

fn meets_targets(sn: &Scenario, w: &BeamformerSet) -> bool {
    let targets = sn.rate_targets_nats();
    sn.groups.iter().all(|grp| {
        let t_g = grp.users.iter().map(|&k| targets[k]).fold(0.0f64, f64::max);
        if t_g <= 0.0 {
            return true;
        }
        let rate = grp
            .users
            .iter()
            .map(|&k| sn.user_rate_nats(w, k))
            .fold(f64::INFINITY, f64::min);
        rate >= t_g * (1.0 - 1e-9)
    })
}

enum RefitMode {
    Efficiency { kappa: f64 },
    Tradeoff { varrho: f64, p_min: f64 },
}

enum Phase2Out {
    Done { ep: ExpansionPoint, mask: Vec<bool>, status: RunStatus },
    Fallback,
    Failure,
}

/// Round the phase-1 metric into a mask and refit with the mask frozen.
/// On an infeasible mask, restore the largest removed antennas one at a
/// time (up to three) before giving up.
fn phase2(
    sn: &Scenario,
    sp: &Scenario,
    p1_ep: &ExpansionPoint,
    metric: &[f64],
    opts: &SolveOptions,
    mode: &RefitMode,
    iter_start: usize,
    records: &mut Vec<IterRecord>,
) -> Phase2Out {
    let base_mask = threshold_mask(sn, metric, opts.epsilon);
    let mut removed: Vec<usize> =
        (0..base_mask.len()).filter(|&j| !base_mask[j]).collect();
    removed.sort_by(|&i, &j| metric[j].total_cmp(&metric[i]));

    for attempt in 0..=3usize {
        if attempt > removed.len() {
            break;
        }
        let mut mask = base_mask.clone();
        for &j in removed.iter().take(attempt) {
            mask[j] = true;
        }

        let a01: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        let w_proj = project_masked(sn, &p1_ep.w, &mask);
        let ep2 = if meets_targets(sn, &w_proj) {
            ExpansionPoint::from_beamformers(sn, &w_proj, &a01)
        } else {
            let seed = derived_seed(sp, opts)
                .wrapping_mul(0x5851_F42D_4C95_7F2D)
                .wrapping_add(attempt as u64);
            match feasible_start(sn, opts, Some(&mask), seed) {
                Ok(ep) => ep,
                Err(AlgoError::Infeasible { .. }) => continue,
                Err(_) => return Phase2Out::Failure,
            }
        };

        let spec = match mode {
            RefitMode::Efficiency { kappa } => {
                ProgramSpec::MaskedRefit { mask: &mask, kappa: *kappa }
            }
            RefitMode::Tradeoff { varrho, p_min } => {
                ProgramSpec::MaskedScalarization { mask: &mask, varrho: *varrho, p_min: *p_min }
            }
        };
        let mark = records.len();
        let out = sca_loop(sn, sp, &spec, ep2, opts, 2, iter_start, records);
        if out.first_infeasible {
            records.truncate(mark);
            continue;
        }
        return Phase2Out::Done { ep: out.ep, mask, status: out.status };
    }
    Phase2Out::Fallback
}

fn assemble(
    sp: &Scenario,
    w: BeamformerSet,
    soft_a: Vec<f64>,
    mask: Vec<bool>,
    ep: &ExpansionPoint,
    records: Vec<IterRecord>,
    status: RunStatus,
) -> JbasResult {
    let selection = SelectionState { a: soft_a, v: per_antenna_power(sp, &w), mask };
    let group_rates_bps = sp.group_rates_bps(&w);
    JbasResult {
        ee_bits_per_joule: sp.energy_efficiency(&w, &selection),
        sum_rate_bps: sp.sum_rate_bps(&w),
        group_rates_bps,
        beamformers: w,
        selection,
        trace: RunTrace { records, status },
        final_gamma: ep.gamma.clone(),
        final_beta: ep.beta.clone(),
    }
}

fn worse(a: RunStatus, b: RunStatus) -> RunStatus {
    use RunStatus::*;
    match (a, b) {
        (SolverFailure, _) | (_, SolverFailure) => SolverFailure,
        (RoundingFallback, _) | (_, RoundingFallback) => RoundingFallback,
        (IterationLimit, _) | (_, IterationLimit) => IterationLimit,
        _ => Converged,
    }
}

/// Phase 1 with up to two reseeded restarts when the very first subproblem
/// solve breaks down numerically. Restarts draw a fresh feasible start from
/// a deterministically perturbed seed, so runs stay reproducible; once any
/// iterate lands, the loop result is final.
fn phase1_with_restarts(
    sn: &Scenario,
    sp: &Scenario,
    spec: &ProgramSpec,
    ep0: ExpansionPoint,
    opts: &SolveOptions,
    records: &mut Vec<IterRecord>,
) -> LoopOut {
    let mut out = sca_loop(sn, sp, spec, ep0, opts, 1, 0, records);
    let mut retry = 0u64;
    while out.status == RunStatus::SolverFailure && records.is_empty() && retry < 2 {
        retry += 1;
        let reseed = derived_seed(sp, opts).wrapping_mul(0x0100_0000_01B3).wrapping_add(retry);
        match feasible_start(sn, opts, None, reseed) {
            Ok(ep) => out = sca_loop(sn, sp, spec, ep, opts, 1, 0, records),
            Err(_) => break,
        }
    }
    out
}

/// Shared two-phase driver body.
fn run_two_phase(
    s: &Scenario,
    opts: &SolveOptions,
    p1_spec: ProgramSpec,
    mode: RefitMode,
) -> Result<JbasResult, AlgoError> {
    opts.validate()?;
    let sn = s.noise_normalized();
    let ep0 = feasible_start(&sn, opts, None, derived_seed(s, opts))?;

    let mut records = Vec::new();
    let p1 = phase1_with_restarts(&sn, s, &p1_spec, ep0, opts, &mut records);
    if p1.status == RunStatus::SolverFailure && records.is_empty() {
        // No usable iterate at all; report the initialization point.
        let mask = vec![true; sn.num_antennas_total()];
        let res = assemble(
            s,
            p1.ep.w.clone(),
            p1.ep.a.clone(),
            mask,
            &p1.ep,
            records,
            RunStatus::SolverFailure,
        );
        return Ok(res);
    }

    let iter_start = records.len();
    match phase2(&sn, s, &p1.ep, &p1.metric, opts, &mode, iter_start, &mut records) {
        Phase2Out::Done { ep, mask, status } => {
            let w = project_masked(&sn, &ep.w, &mask);
            let status = worse(p1.status, status);
            Ok(assemble(s, w, p1.metric, mask, &ep, records, status))
        }
        Phase2Out::Fallback => {
            let mask: Vec<bool> = p1.metric.iter().map(|&m| m >= opts.epsilon).collect();
            Ok(assemble(
                s,
                p1.ep.w.clone(),
                p1.metric.clone(),
                mask,
                &p1.ep,
                records,
                RunStatus::RoundingFallback,
            ))
        }
        Phase2Out::Failure => {
            let mask: Vec<bool> = p1.metric.iter().map(|&m| m >= opts.epsilon).collect();
            Ok(assemble(
                s,
                p1.ep.w.clone(),
                p1.metric.clone(),
                mask,
                &p1.ep,
                records,
                RunStatus::SolverFailure,
            ))
        }
    }
}

/// Joint beamforming and antenna selection for maximum energy efficiency:
/// soft-activation phase 1, threshold rounding, fixed-mask refit.
pub fn run_algorithm1(s: &Scenario, opts: &SolveOptions) -> Result<JbasResult, AlgoError> {
    run_two_phase(
        s,
        opts,
        ProgramSpec::Efficiency { chi: opts.chi, kappa: 1.0 },
        RefitMode::Efficiency { kappa: 1.0 },
    )
}

/// Phase-1-only variant: the relaxed beamformers are kept for transmission;
/// the mask is a plain threshold used for honest RF-chain accounting.
pub fn run_algorithm1_simple(s: &Scenario, opts: &SolveOptions) -> Result<JbasResult, AlgoError> {
    opts.validate()?;
    let sn = s.noise_normalized();
    let ep0 = feasible_start(&sn, opts, None, derived_seed(s, opts))?;
    let spec = ProgramSpec::Efficiency { chi: opts.chi, kappa: 1.0 };
    let mut records = Vec::new();
    let p1 = phase1_with_restarts(&sn, s, &spec, ep0, opts, &mut records);
    let mask: Vec<bool> = p1.metric.iter().map(|&m| m >= opts.epsilon).collect();
    Ok(assemble(s, p1.ep.w.clone(), p1.metric.clone(), mask, &p1.ep, records, p1.status))
}

/// Sparsity-based selection: phase 1 prices antenna-row norms into the power
/// budget via the chosen smoothing, phase 2 zeroes rows under the normalized
/// norm threshold and refits.
pub fn run_algorithm2(
    s: &Scenario,
    kind: SmoothingKind,
    opts: &SolveOptions,
) -> Result<JbasResult, AlgoError> {
    run_two_phase(
        s,
        opts,
        ProgramSpec::Sparsity { kind, rho: opts.rho, varsigma: opts.varsigma },
        RefitMode::Efficiency { kappa: 1.0 },
    )
}

/// Power-weighted efficiency: identical to [`run_algorithm1`] with the
/// adjustable power term scaled by `kappa` in both phases. `kappa = 1`
/// reproduces the plain driver exactly; `kappa = 0` maximizes sum rate.
pub fn run_pwee(s: &Scenario, kappa: f64, opts: &SolveOptions) -> Result<JbasResult, AlgoError> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(AlgoError::Options("kappa must lie in [0, 1]".into()));
    }
    run_two_phase(
        s,
        opts,
        ProgramSpec::Efficiency { chi: opts.chi, kappa },
        RefitMode::Efficiency { kappa },
    )
}

/// Efficiency/sum-rate trade-off scalarization: maximizes
/// `x + varrho * sum r_g / p_min` without the lift, then rounds and refits
/// with the trade-off objective kept.
pub fn run_algorithm3(
    s: &Scenario,
    varrho: f64,
    opts: &SolveOptions,
) -> Result<JbasResult, AlgoError> {
    if !(varrho >= 0.0) {
        return Err(AlgoError::Options("varrho must be nonnegative".into()));
    }
    let p_min = minimum_power(s);
    run_two_phase(
        s,
        opts,
        ProgramSpec::Scalarization { chi: opts.chi, varrho, p_min },
        RefitMode::Tradeoff { varrho, p_min },
    )
}

/// Beamformer-only driver on a frozen antenna mask: feasibility start on the
/// masked rows, then the fixed-mask efficiency refit until convergence.
/// Shared by the all-on baseline and the subset-enumeration oracle.
pub(crate) fn run_fixed_mask(
    s: &Scenario,
    mask: &[bool],
    opts: &SolveOptions,
    seed: u64,
) -> Result<JbasResult, AlgoError> {
    opts.validate()?;
    let sn = s.noise_normalized();
    let ep0 = feasible_start(&sn, opts, Some(mask), seed)?;
    let spec = ProgramSpec::MaskedRefit { mask, kappa: 1.0 };
    let mut records = Vec::new();
    let out = sca_loop(&sn, s, &spec, ep0, opts, 1, 0, &mut records);
    let w = project_masked(&sn, &out.ep.w, mask);
    let soft: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    Ok(assemble(s, w, soft, mask.to_vec(), &out.ep, records, out.status))
}

/// Baseline without antenna selection: every antenna stays on and the RF
/// power bill counts all of them; beamformers are still optimized.
pub fn run_no_as_baseline(s: &Scenario, opts: &SolveOptions) -> Result<JbasResult, AlgoError> {
    let mask = vec![true; s.num_antennas_total()];
    run_fixed_mask(s, &mask, opts, derived_seed(s, opts))
}
