//! Independent verification utilities: exhaustive antenna-subset search on
//! tiny instances, randomized checkers for the convexifying surrogates, and
//! activity audits of converged runs.
//!
//! Everything here deliberately recomputes quantities from first principles
//! (brute-force enumeration, finite differences, direct SINR evaluation)
//! so the main pipeline is checked against something it does not share code
//! with beyond the primitive evaluators.

use crate::algorithms::{derived_seed, run_fixed_mask, AlgoError, JbasResult, SolveOptions};
use crate::bounds::{
    delta, psi, smoothing_majorant, smoothing_value, upsilon, xi, SmoothingKind,
};
use crate::model::{
    generate_scenario, inner_product, BeamformerSet, Scenario, ScenarioConfig,
};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Largest total antenna count the exhaustive subset search accepts
/// (4096 subsets before pruning).
pub const MAX_EXHAUSTIVE_ANTENNAS: usize = 12;

/// Absolute-or-relative tolerance on surrogate value agreement at the
/// expansion point.
pub const VALUE_TOL: f64 = 1e-10;

/// Tolerance on the finite-difference gradient match at the expansion point.
pub const GRADIENT_TOL: f64 = 1e-5;

/// Relative tolerance for the worst-user activity audit.
pub const ACTIVITY_REL_TOL: f64 = 1e-5;

/// Knobs for the exhaustive search's inner fixed-mask solver.
#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Random initializations per subset; the best result is kept.
    pub restarts: usize,
    /// Options handed to the inner fixed-mask driver.
    pub inner: SolveOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { restarts: 3, inner: SolveOptions::default() }
    }
}

/// One evaluated antenna subset. `bits` has bit `j` set when flat antenna
/// index `j` is on. Infeasible subsets keep NaN metrics.
#[derive(Debug, Clone, Serialize)]
pub struct SubsetRecord {
    pub bits: u64,
    pub ee_bits_per_joule: f64,
    pub sum_rate_bps: f64,
    pub power_w: f64,
    pub feasible: bool,
}

/// Result of the exhaustive subset search. The table covers exactly the
/// admissible subsets, in increasing bitmask order.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub best_mask: Vec<bool>,
    pub best_ee: f64,
    pub table: Vec<SubsetRecord>,
    /// Relative shortfall of a supplied run versus `best_ee`; set by
    /// [`OracleReport::set_comparison`].
    pub comparison_gap: Option<f64>,
}

impl OracleReport {
    /// Records and returns the relative gap `(best - candidate) / best`.
    pub fn set_comparison(&mut self, result: &JbasResult) -> f64 {
        let gap = (self.best_ee - result.ee_bits_per_joule)
            / self.best_ee.abs().max(f64::MIN_POSITIVE);
        self.comparison_gap = Some(gap);
        gap
    }

    pub fn row(&self, bits: u64) -> Option<&SubsetRecord> {
        self.table.iter().find(|r| r.bits == bits)
    }

    /// One line per subset: `bitmask,ee_bits_per_joule,sum_rate_bps,power_w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitmask,ee_bits_per_joule,sum_rate_bps,power_w\n");
        for r in &self.table {
            out.push_str(&format!(
                "{},{:.10e},{:.10e},{:.10e}\n",
                r.bits, r.ee_bits_per_joule, r.sum_rate_bps, r.power_w
            ));
        }
        out
    }
}

/// All nonempty antenna subsets that keep at least the structurally required
/// number of antennas on at every BS (a BS serving a group with a positive
/// rate target cannot go fully dark, one antenna per such group).
pub fn enumerate_admissible_subsets(s: &Scenario) -> Vec<u64> {
    let n = s.num_antennas_total();
    assert!(n <= MAX_EXHAUSTIVE_ANTENNAS, "subset enumeration caps at {MAX_EXHAUSTIVE_ANTENNAS} antennas");
    let mins = s.min_active_antennas();
    (1..(1u64 << n))
        .filter(|&bits| {
            (0..s.num_bs()).all(|b| {
                let off = s.antenna_offset(b);
                let n_b = s.config.antennas_per_bs[b];
                let on = (0..n_b).filter(|&i| bits >> (off + i) & 1 == 1).count();
                on >= mins[b]
            })
        })
        .collect()
}

fn restart_seed(base: u64, bits: u64, restart: u64) -> u64 {
    if restart == 0 {
        return base;
    }
    // splitmix64 finalizer over (base, subset, restart) so evaluation order
    // cannot influence any subset's result.
    let mut z = base
        ^ bits.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ restart.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn evaluate_subset(s: &Scenario, opts: &OracleOptions, base: u64, bits: u64) -> SubsetRecord {
    let n = s.num_antennas_total();
    let mask: Vec<bool> = (0..n).map(|j| bits >> j & 1 == 1).collect();
    let mut best: Option<JbasResult> = None;
    for r in 0..opts.restarts.max(1) {
        match run_fixed_mask(s, &mask, &opts.inner, restart_seed(base, bits, r as u64)) {
            Ok(res) => {
                if best
                    .as_ref()
                    .map_or(true, |b| res.ee_bits_per_joule > b.ee_bits_per_joule)
                {
                    best = Some(res);
                }
            }
            // Infeasible restarts just fail this subset; solver hiccups on
            // one restart must not poison the others.
            Err(_) => {}
        }
    }
    match best {
        Some(res) => SubsetRecord {
            bits,
            ee_bits_per_joule: res.ee_bits_per_joule,
            sum_rate_bps: res.sum_rate_bps,
            power_w: s.total_power(&res.beamformers, &res.selection),
            feasible: true,
        },
        None => SubsetRecord {
            bits,
            ee_bits_per_joule: f64::NAN,
            sum_rate_bps: f64::NAN,
            power_w: f64::NAN,
            feasible: false,
        },
    }
}

/// Brute-force ground truth for the antenna-selection layer: runs the
/// fixed-mask beamforming solver (multi-start) on every admissible subset
/// and returns the table plus the best subset found.
///
/// Refuses scenarios with more than [`MAX_EXHAUSTIVE_ANTENNAS`] antennas in
/// total. Subset evaluations are independent and run in parallel; results
/// depend only on the scenario and options, never on evaluation order.
pub fn exhaustive_antenna_search(
    s: &Scenario,
    opts: &OracleOptions,
) -> Result<OracleReport, AlgoError> {
    opts.inner.validate()?;
    let n = s.num_antennas_total();
    if n > MAX_EXHAUSTIVE_ANTENNAS {
        return Err(AlgoError::Options(format!(
            "exhaustive subset search handles at most {MAX_EXHAUSTIVE_ANTENNAS} antennas in total, scenario has {n}"
        )));
    }
    let base = derived_seed(s, &opts.inner);
    let subsets = enumerate_admissible_subsets(s);
    let table: Vec<SubsetRecord> = subsets
        .par_iter()
        .map(|&bits| evaluate_subset(s, opts, base, bits))
        .collect();
    let best = table
        .iter()
        .filter(|r| r.feasible)
        .max_by(|a, b| {
            a.ee_bits_per_joule
                .total_cmp(&b.ee_bits_per_joule)
                .then(b.bits.cmp(&a.bits))
        });
    let (best_mask, best_ee) = match best {
        Some(r) => ((0..n).map(|j| r.bits >> j & 1 == 1).collect(), r.ee_bits_per_joule),
        None => (vec![false; n], f64::NAN),
    };
    Ok(OracleReport { best_mask, best_ee, table, comparison_gap: None })
}

/// Aggregated result of sampling one surrogate family.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyCheck {
    pub family: &'static str,
    pub samples: usize,
    pub one_sided_violations: usize,
    /// Worst |surrogate - exact| at the expansion point, scaled by
    /// max(1, |exact|).
    pub max_value_gap: f64,
    /// Worst |finite difference - surrogate slope| over gradient
    /// coordinates, scaled by max(1, |slope|).
    pub max_gradient_gap: f64,
}

impl FamilyCheck {
    fn new(family: &'static str, samples: usize) -> Self {
        FamilyCheck {
            family,
            samples,
            one_sided_violations: 0,
            max_value_gap: 0.0,
            max_gradient_gap: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.one_sided_violations == 0
            && self.max_value_gap <= VALUE_TOL
            && self.max_gradient_gap <= GRADIENT_TOL
    }

    fn record_value(&mut self, surrogate: f64, exact: f64) {
        let gap = (surrogate - exact).abs() / exact.abs().max(1.0);
        self.max_value_gap = self.max_value_gap.max(gap);
    }

    fn record_gradient(&mut self, fd: f64, analytic: f64) {
        let gap = (fd - analytic).abs() / analytic.abs().max(1.0);
        self.max_gradient_gap = self.max_gradient_gap.max(gap);
    }

    /// `true` means the surrogate must stay at or below the exact value.
    fn record_side(&mut self, surrogate: f64, exact: f64, lower: bool) {
        let slack = 1e-10 * exact.abs().max(1.0);
        let violated = if lower { surrogate > exact + slack } else { surrogate < exact - slack };
        if violated {
            self.one_sided_violations += 1;
        }
    }
}

/// Report over all surrogate families.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheckReport {
    pub families: Vec<FamilyCheck>,
}

impl BoundCheckReport {
    pub fn passed(&self) -> bool {
        self.families.iter().all(FamilyCheck::passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for f in &self.families {
            out.push_str(&format!(
                "{}: {} samples, {} one-sided violations, value gap {:.2e}, gradient gap {:.2e} -> {}\n",
                f.family,
                f.samples,
                f.one_sided_violations,
                f.max_value_gap,
                f.max_gradient_gap,
                if f.passed() { "pass" } else { "FAIL" }
            ));
        }
        out
    }
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn rand_cvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * scale)
        .collect()
}

fn check_psi_family(samples: usize, rng: &mut ChaCha8Rng) -> FamilyCheck {
    let mut fam = FamilyCheck::new("psi", samples);
    let dim = 3;
    for _ in 0..samples {
        let h = rand_cvec(rng, dim, 1.0);
        let w_n = rand_cvec(rng, dim, 1.0);
        let beta_n = 0.1 + rng.gen::<f64>() * 5.0;
        let co = psi(&h, &w_n, beta_n).expect("positive expansion");
        let exact = |w: &[Complex64], beta: f64| inner_product(&h, w).norm_sqr() / beta;

        let w = rand_cvec(rng, dim, 2.0);
        let beta = 0.05 + rng.gen::<f64>() * 6.0;
        fam.record_side(co.eval(&w, beta), exact(&w, beta), true);

        fam.record_value(co.eval(&w_n, beta_n), exact(&w_n, beta_n));
        for i in 0..dim {
            let fd_re = central_diff(
                |t| {
                    let mut v = w_n.clone();
                    v[i].re = t;
                    exact(&v, beta_n)
                },
                w_n[i].re,
            );
            fam.record_gradient(fd_re, co.lin[i].re);
            let fd_im = central_diff(
                |t| {
                    let mut v = w_n.clone();
                    v[i].im = t;
                    exact(&v, beta_n)
                },
                w_n[i].im,
            );
            fam.record_gradient(fd_im, -co.lin[i].im);
        }
        let fd_beta = central_diff(|b| exact(&w_n, b), beta_n);
        fam.record_gradient(fd_beta, -co.c_beta);
    }
    fam
}

fn check_upsilon_family(samples: usize, rng: &mut ChaCha8Rng) -> FamilyCheck {
    let mut fam = FamilyCheck::new("upsilon", samples);
    for _ in 0..samples {
        let chi = 1.0 + rng.gen::<f64>() * 2.0;
        let a_n = 0.02 + rng.gen::<f64>() * 0.98;
        let co = upsilon(a_n, chi);

        let a = rng.gen::<f64>();
        fam.record_side(co.eval(a), a.powf(chi), true);

        fam.record_value(co.eval(a_n), a_n.powf(chi));
        fam.record_gradient(central_diff(|t| t.powf(chi), a_n), co.slope);
    }
    fam
}

fn check_xi_family(samples: usize, rng: &mut ChaCha8Rng) -> FamilyCheck {
    let mut fam = FamilyCheck::new("xi", samples);
    let log_range = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
    };
    for _ in 0..samples {
        let gamma_n = log_range(rng, 1e-2, 30.0);
        let co = xi(gamma_n).expect("positive expansion");

        let g = log_range(rng, 1e-3, 50.0);
        fam.record_side(co.eval(g), g.ln_1p(), true);

        fam.record_value(co.eval(gamma_n), gamma_n.ln_1p());
        fam.record_gradient(
            central_diff(|t| t.ln_1p(), gamma_n),
            co.nu1 / (gamma_n * gamma_n),
        );
    }
    fam
}

fn check_delta_family(samples: usize, rng: &mut ChaCha8Rng) -> FamilyCheck {
    let mut fam = FamilyCheck::new("delta", samples);
    for _ in 0..samples {
        let r_n = 0.1 + rng.gen::<f64>() * 4.9;
        let x_n = 0.1 + rng.gen::<f64>() * 4.9;
        let co = delta(r_n, x_n).expect("positive expansion");
        let exact = |r: f64, x: f64| r * r / x;

        let r = rng.gen::<f64>() * 8.0;
        let x = 0.05 + rng.gen::<f64>() * 8.0;
        fam.record_side(co.eval(r, x), exact(r, x), true);

        fam.record_value(co.eval(r_n, x_n), exact(r_n, x_n));
        fam.record_gradient(central_diff(|t| exact(t, x_n), r_n), co.r_coeff);
        fam.record_gradient(central_diff(|t| exact(r_n, t), x_n), -co.x_coeff);
    }
    fam
}

fn check_smoothing_family(
    kind: SmoothingKind,
    name: &'static str,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> FamilyCheck {
    let mut fam = FamilyCheck::new(name, samples);
    let cfg = ScenarioConfig {
        num_bs: 1,
        antennas_per_bs: vec![2],
        groups_per_bs: 1,
        users_per_group: 1,
        rate_target_bps: 0.0,
        ..ScenarioConfig::default()
    };
    let s = generate_scenario(&cfg, 99).expect("valid config");
    let sqrt_pmax = s.config.power.p_max.sqrt();
    let make_w = |phis: &[f64]| {
        let mut w = BeamformerSet::zeros(&s);
        for (i, &p) in phis.iter().enumerate() {
            w.per_group[0][i] = Complex64::new(p * sqrt_pmax, 0.0);
        }
        w
    };
    for _ in 0..samples {
        let varsigma = match kind {
            SmoothingKind::F1 => 1.0,
            _ => 1.0 + rng.gen::<f64>() * 2.0,
        };
        let phis_n: Vec<f64> = (0..2).map(|_| 0.01 + rng.gen::<f64>() * 0.99).collect();
        let w_n = make_w(&phis_n);
        let m = smoothing_majorant(&w_n, &s, kind, varsigma);

        let phis: Vec<f64> = (0..2).map(|_| rng.gen::<f64>()).collect();
        let w = make_w(&phis);
        fam.record_side(m.eval(&w, &s), smoothing_value(&w, &s, kind, varsigma), false);

        fam.record_value(m.eval(&w_n, &s), smoothing_value(&w_n, &s, kind, varsigma));
        for j in 0..2 {
            let fd = central_diff(
                |t| {
                    let mut p = phis_n.clone();
                    p[j] = t;
                    smoothing_value(&make_w(&p), &s, kind, varsigma)
                },
                phis_n[j],
            );
            fam.record_gradient(fd, m.coeff[j]);
        }
    }
    fam
}

/// Samples every surrogate family for global one-sidedness, tightness at the
/// expansion point, and first-order (finite difference) tightness.
pub fn check_bounds(sample_count: usize, seed: u64) -> BoundCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families = vec![
        check_psi_family(sample_count, &mut rng),
        check_upsilon_family(sample_count, &mut rng),
        check_xi_family(sample_count, &mut rng),
        check_delta_family(sample_count, &mut rng),
        check_smoothing_family(SmoothingKind::F1, "f1", sample_count, &mut rng),
        check_smoothing_family(SmoothingKind::F2, "f2", sample_count, &mut rng),
        check_smoothing_family(SmoothingKind::F3, "f3", sample_count, &mut rng),
    ];
    BoundCheckReport { families }
}

/// Activity audit entry for one group.
#[derive(Debug, Clone, Serialize)]
pub struct GroupActivity {
    pub group: usize,
    pub worst_user: usize,
    /// SINR variable the solver carried for the worst user.
    pub modeled_sinr: f64,
    /// SINR recomputed from the returned beamformers.
    pub evaluated_sinr: f64,
    pub rel_gap: f64,
    pub active: bool,
}

/// Per-group audit of a converged run.
#[derive(Debug, Clone, Serialize)]
pub struct ActivityReport {
    pub groups: Vec<GroupActivity>,
}

impl ActivityReport {
    pub fn all_active(&self) -> bool {
        self.groups.iter().all(|g| g.active)
    }
}

/// Verifies that each group's worst user sits on its SINR constraint: at a
/// converged optimum the carried SINR variable must match the SINR evaluated
/// from the beamformers within [`ACTIVITY_REL_TOL`] relative. Callers should
/// only audit converged results; a loosely stopped run will show slack here.
pub fn check_lemma2_activity(result: &JbasResult, s: &Scenario) -> ActivityReport {
    let groups = s
        .groups
        .iter()
        .enumerate()
        .map(|(g, grp)| {
            let (worst_user, evaluated) = grp
                .users
                .iter()
                .map(|&k| (k, s.sinr(&result.beamformers, k)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("groups are nonempty");
            let modeled = result.final_gamma[worst_user];
            let rel_gap = (modeled - evaluated).abs() / evaluated.abs().max(1e-12);
            GroupActivity {
                group: g,
                worst_user,
                modeled_sinr: modeled,
                evaluated_sinr: evaluated,
                rel_gap,
                active: rel_gap <= ACTIVITY_REL_TOL,
            }
        })
        .collect();
    ActivityReport { groups }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_algorithm1, run_no_as_baseline};
    use crate::model::{generate_scenario, ScenarioConfig};

    fn single_bs_config(antennas: usize) -> ScenarioConfig {
        ScenarioConfig {
            num_bs: 1,
            antennas_per_bs: vec![antennas],
            groups_per_bs: 1,
            users_per_group: 1,
            rate_target_bps: 0.0,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn admissible_subset_counts() {
        let s = generate_scenario(&single_bs_config(3), 1).unwrap();
        assert_eq!(enumerate_admissible_subsets(&s).len(), 7);

        // Two BSs, zero targets: every nonempty subset qualifies.
        let free = ScenarioConfig {
            num_bs: 2,
            antennas_per_bs: vec![3, 3],
            groups_per_bs: 1,
            users_per_group: 1,
            rate_target_bps: 0.0,
            ..ScenarioConfig::default()
        };
        let s2 = generate_scenario(&free, 2).unwrap();
        assert_eq!(enumerate_admissible_subsets(&s2).len(), 63);

        // Positive targets: each BS must keep an antenna per served group.
        let strict = ScenarioConfig { rate_target_bps: 1e6, ..free };
        let s3 = generate_scenario(&strict, 2).unwrap();
        assert_eq!(enumerate_admissible_subsets(&s3).len(), 49);
    }

    #[test]
    fn search_refuses_oversized_scenarios() {
        let cfg = ScenarioConfig {
            num_bs: 2,
            antennas_per_bs: vec![8, 8],
            groups_per_bs: 1,
            users_per_group: 1,
            ..ScenarioConfig::default()
        };
        let s = generate_scenario(&cfg, 3).unwrap();
        let err = exhaustive_antenna_search(&s, &OracleOptions::default());
        assert!(matches!(err, Err(AlgoError::Options(_))));
    }

    #[test]
    fn all_on_subset_matches_baseline() {
        let s = generate_scenario(&single_bs_config(3), 7).unwrap();
        let opts = OracleOptions::default();
        let report = exhaustive_antenna_search(&s, &opts).unwrap();
        assert_eq!(report.table.len(), 7);
        assert!(report.table.windows(2).all(|w| w[0].bits < w[1].bits));

        let max_ee = report
            .table
            .iter()
            .filter(|r| r.feasible)
            .map(|r| r.ee_bits_per_joule)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.best_ee, max_ee);

        let baseline = run_no_as_baseline(&s, &opts.inner).unwrap();
        let all_on = report.row(0b111).unwrap();
        assert!(all_on.feasible);
        let rel = (all_on.ee_bits_per_joule - baseline.ee_bits_per_joule).abs()
            / baseline.ee_bits_per_joule;
        assert!(rel <= 1e-5, "all-on row {} vs baseline {}", all_on.ee_bits_per_joule, baseline.ee_bits_per_joule);

        let csv = report.to_csv();
        assert!(csv.starts_with("bitmask,ee_bits_per_joule,sum_rate_bps,power_w\n"));
        assert_eq!(csv.lines().count(), 8);
    }

    #[test]
    fn search_is_deterministic() {
        let s = generate_scenario(&single_bs_config(3), 11).unwrap();
        let opts = OracleOptions::default();
        let a = exhaustive_antenna_search(&s, &opts).unwrap();
        let b = exhaustive_antenna_search(&s, &opts).unwrap();
        assert_eq!(a.best_mask, b.best_mask);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn bound_checker_clean_sweep() {
        let report = check_bounds(300, 11);
        assert_eq!(report.families.len(), 7);
        for f in &report.families {
            assert_eq!(f.samples, 300);
            assert!(f.passed(), "{}", report.summary());
        }
        assert!(report.passed());
    }

    #[test]
    fn activity_audit_on_converged_run() {
        let s = generate_scenario(&single_bs_config(3), 21).unwrap();
        let opts = SolveOptions { rel_tol: 1e-8, max_iter: 80, ..SolveOptions::default() };
        let res = run_algorithm1(&s, &opts).unwrap();
        let report = check_lemma2_activity(&res, &s);
        assert!(report.all_active(), "{:?}", report.groups);

        // Single user per group: the audit reduces to the SINR definition.
        let k = report.groups[0].worst_user;
        assert_eq!(report.groups[0].evaluated_sinr, s.sinr(&res.beamformers, k));

        // Shrinking the beamformers voids the recorded SINR variables.
        let mut off = res.clone();
        for wg in &mut off.beamformers.per_group {
            for e in wg.iter_mut() {
                *e *= 0.5;
            }
        }
        assert!(!check_lemma2_activity(&off, &s).all_active());
    }

    #[test]
    fn fractional_activation_only_raises_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let a = f64::max(rng.gen::<f64>(), 1e-6);
            let m = 1.0 + rng.gen::<f64>() * 3.0;
            let w2 = rng.gen::<f64>() * 10.0;
            assert!(a.powf(m) <= a + 1e-15);
            assert!(w2 / a.powf(m) >= w2 / a - 1e-12);
        }
    }
}
