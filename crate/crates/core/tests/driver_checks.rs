//! End-to-end checks of the selection drivers: monotone inner objectives,
//! constraint-respecting outputs, determinism, and the documented
//! equivalences and orderings between driver variants.

use jbas_core::algorithms::{
    run_algorithm1, run_algorithm1_simple, run_algorithm2, run_algorithm3, run_no_as_baseline,
    run_pwee, BackendPath, IterRecord, JbasResult, RunStatus, SolveOptions,
};
use jbas_core::bounds::SmoothingKind;
use jbas_core::model::{generate_scenario, PowerModel, Scenario, ScenarioConfig};

fn pair_scenario(rate_mbps: f64, seed: u64) -> Scenario {
    let config = ScenarioConfig {
        num_bs: 2,
        antennas_per_bs: vec![3, 3],
        groups_per_bs: 1,
        users_per_group: 2,
        rate_target_bps: rate_mbps * 1e6,
        ..ScenarioConfig::default()
    };
    generate_scenario(&config, seed).unwrap()
}

fn quick_opts() -> SolveOptions {
    SolveOptions { max_iter: 40, rel_tol: 1e-5, ..SolveOptions::default() }
}

fn records_match_ignoring_time(a: &[IterRecord], b: &[IterRecord]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.iter == y.iter
                && x.phase == y.phase
                && x.objective == y.objective
                && x.ee_bits_per_joule == y.ee_bits_per_joule
                && x.sum_rate_bps == y.sum_rate_bps
                && x.power_w == y.power_w
                && x.active_antennas == y.active_antennas
        })
}

fn assert_phase1_monotone(name: &str, res: &JbasResult) {
    assert_ne!(res.trace.status, RunStatus::SolverFailure, "{name}: solver failure");
    let objs: Vec<f64> = res
        .trace
        .records
        .iter()
        .filter(|r| r.phase == 1)
        .map(|r| r.objective)
        .collect();
    assert!(!objs.is_empty(), "{name}: no inner iterations recorded");
    for pair in objs.windows(2) {
        assert!(
            pair[1] >= pair[0] - 1e-9 * pair[0].abs().max(1.0),
            "{name}: objective dropped from {} to {}",
            pair[0],
            pair[1]
        );
    }
}

#[test]
fn phase_one_objective_never_decreases() {
    let opts = quick_opts();
    for seed in [3u64, 11] {
        let s = pair_scenario(10.0, seed);
        let runs: Vec<(&str, JbasResult)> = vec![
            ("efficiency", run_algorithm1(&s, &opts).unwrap()),
            ("sparsity", run_algorithm2(&s, SmoothingKind::F3, &opts).unwrap()),
            ("tradeoff", run_algorithm3(&s, 0.5, &opts).unwrap()),
            ("weighted", run_pwee(&s, 0.5, &opts).unwrap()),
        ];
        for (name, res) in &runs {
            assert_phase1_monotone(name, res);
        }
    }
}

fn assert_output_feasible(name: &str, s: &Scenario, res: &JbasResult, check_mask_rows: bool) {
    let pm = &s.config.power;
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            let row_sq: f64 =
                res.beamformers.antenna_row(s, b, i).iter().map(|c| c.norm_sqr()).sum();
            assert!(row_sq <= pm.p_max + 1e-7, "{name}: antenna {} over cap", off + i);
            if check_mask_rows && !res.selection.mask[off + i] {
                assert!(row_sq == 0.0, "{name}: disabled antenna {} transmits", off + i);
            }
        }
    }
    for (g, &rate) in res.group_rates_bps.iter().enumerate() {
        let target = s.rate_targets_bps[s.groups[g].users[0]];
        assert!(rate >= target * (1.0 - 1e-6), "{name}: group {g} misses target");
    }
    let ee = s.energy_efficiency(&res.beamformers, &res.selection);
    assert!(
        (res.ee_bits_per_joule - ee).abs() <= 1e-9 * ee.abs().max(1.0),
        "{name}: reported efficiency disagrees with re-evaluation"
    );
    let sr = s.sum_rate_bps(&res.beamformers);
    assert!((res.sum_rate_bps - sr).abs() <= 1e-9 * sr.abs().max(1.0), "{name}: sum rate drift");
}

#[test]
fn outputs_respect_constraints() {
    let s = pair_scenario(8.0, 5);
    let opts = quick_opts();
    let cases: Vec<(&str, bool, JbasResult)> = vec![
        ("efficiency", true, run_algorithm1(&s, &opts).unwrap()),
        ("sparsity", true, run_algorithm2(&s, SmoothingKind::F3, &opts).unwrap()),
        ("weighted", true, run_pwee(&s, 0.7, &opts).unwrap()),
        ("baseline", true, run_no_as_baseline(&s, &opts).unwrap()),
        ("phase1-only", false, run_algorithm1_simple(&s, &opts).unwrap()),
    ];
    for (name, check_mask_rows, res) in &cases {
        assert_ne!(res.trace.status, RunStatus::SolverFailure, "{name}");
        assert_output_feasible(name, &s, res, *check_mask_rows);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let s = pair_scenario(10.0, 9);
    let opts = quick_opts();
    let a = run_algorithm1(&s, &opts).unwrap();
    let b = run_algorithm1(&s, &opts).unwrap();
    assert!(records_match_ignoring_time(&a.trace.records, &b.trace.records));
    assert_eq!(a.beamformers, b.beamformers);
    assert_eq!(a.selection.mask, b.selection.mask);
    assert_eq!(a.ee_bits_per_joule, b.ee_bits_per_joule);
    assert_eq!(a.sum_rate_bps, b.sum_rate_bps);
}

#[test]
fn unit_rate_weight_matches_plain_driver() {
    let s = pair_scenario(10.0, 9);
    let opts = quick_opts();
    let plain = run_algorithm1(&s, &opts).unwrap();
    let weighted = run_pwee(&s, 1.0, &opts).unwrap();
    assert!(records_match_ignoring_time(&plain.trace.records, &weighted.trace.records));
    assert_eq!(plain.ee_bits_per_joule, weighted.ee_bits_per_joule);
    assert_eq!(plain.selection.mask, weighted.selection.mask);
    assert_eq!(plain.beamformers, weighted.beamformers);
}

#[test]
fn zero_rate_weight_favors_sum_rate() {
    let opts = quick_opts();
    for seed in [5u64, 9] {
        let s = pair_scenario(8.0, seed);
        let rate_first = run_pwee(&s, 0.0, &opts).unwrap();
        let ee_first = run_pwee(&s, 1.0, &opts).unwrap();
        assert!(
            rate_first.sum_rate_bps >= ee_first.sum_rate_bps * (1.0 - 1e-9),
            "seed {seed}: rate-weighted run lost sum rate: {} vs {}",
            rate_first.sum_rate_bps,
            ee_first.sum_rate_bps
        );
    }
}

#[test]
fn smoothing_f2_unit_exponent_tracks_f1() {
    let s = pair_scenario(10.0, 5);
    let opts = SolveOptions { varsigma: 1.0, ..quick_opts() };
    let f1 = run_algorithm2(&s, SmoothingKind::F1, &opts).unwrap();
    let f2 = run_algorithm2(&s, SmoothingKind::F2, &opts).unwrap();
    assert_eq!(f1.trace.records.len(), f2.trace.records.len());
    for (a, b) in f1.trace.records.iter().zip(&f2.trace.records) {
        assert!(
            (a.objective - b.objective).abs() <= 1e-9 * a.objective.abs().max(1.0),
            "objectives diverge: {} vs {}",
            a.objective,
            b.objective
        );
    }
    let gap = (f1.ee_bits_per_joule - f2.ee_bits_per_joule).abs();
    assert!(gap <= 1e-6 * f1.ee_bits_per_joule.abs().max(1.0));
}

#[test]
fn refit_only_improves_thresholded_point() {
    let s = pair_scenario(0.0, 13);
    let opts = quick_opts();
    let full = run_algorithm1(&s, &opts).unwrap();
    let simple = run_algorithm1_simple(&s, &opts).unwrap();
    assert!(matches!(full.trace.status, RunStatus::Converged | RunStatus::IterationLimit));
    assert_eq!(full.selection.mask, simple.selection.mask, "rounding rules diverged");

    // Honest efficiency of the thresholded phase-1 point: zero the disabled
    // rows and re-evaluate. The refit must not land below it.
    let mut projected = simple.beamformers.clone();
    for (g, grp) in s.groups.iter().enumerate() {
        let off = s.antenna_offset(grp.serving_bs);
        for i in 0..s.config.antennas_per_bs[grp.serving_bs] {
            if !simple.selection.mask[off + i] {
                projected.per_group[g][i] = num_complex::Complex64::new(0.0, 0.0);
            }
        }
    }
    let thresholded = s.energy_efficiency(&projected, &simple.selection);
    assert!(
        full.ee_bits_per_joule >= thresholded * (1.0 - 1e-6),
        "refit {} below thresholded phase-1 point {}",
        full.ee_bits_per_joule,
        thresholded
    );
}

#[test]
fn tight_minimum_counts_force_full_activation() {
    let config = ScenarioConfig {
        num_bs: 2,
        antennas_per_bs: vec![1, 1],
        groups_per_bs: 1,
        users_per_group: 1,
        rate_target_bps: 5e6,
        ..ScenarioConfig::default()
    };
    let s = generate_scenario(&config, 3).unwrap();
    let opts = quick_opts();
    let selected = run_algorithm1(&s, &opts).unwrap();
    let baseline = run_no_as_baseline(&s, &opts).unwrap();
    assert_eq!(selected.selection.mask, vec![true, true]);
    assert_eq!(selected.selection.active_count(), baseline.selection.active_count());
}

#[test]
fn near_free_rf_equalizes_selection_and_baseline() {
    let config = ScenarioConfig {
        power: PowerModel { p_rf: 1e-9, ..PowerModel::default() },
        num_bs: 1,
        antennas_per_bs: vec![2],
        groups_per_bs: 1,
        users_per_group: 1,
        rate_target_bps: 0.0,
        ..ScenarioConfig::default()
    };
    let s = generate_scenario(&config, 4).unwrap();
    let opts = SolveOptions { max_iter: 120, rel_tol: 1e-6, ..SolveOptions::default() };
    let selected = run_algorithm1(&s, &opts).unwrap();
    let baseline = run_no_as_baseline(&s, &opts).unwrap();
    let gap = (selected.ee_bits_per_joule - baseline.ee_bits_per_joule).abs();
    assert!(
        gap <= 1e-3 * baseline.ee_bits_per_joule,
        "free RF chains should leave nothing to select: {} vs {}",
        selected.ee_bits_per_joule,
        baseline.ee_bits_per_joule
    );
}

fn fractional_count(res: &JbasResult, eps: f64) -> usize {
    res.selection.a.iter().filter(|&&v| v > eps && v < 1.0 - eps).count()
}

#[test]
fn sharper_exponent_reduces_fractional_activations() {
    let seeds = [5u64, 6, 7];
    let mut frac = [0usize; 2];
    for &seed in &seeds {
        let s = pair_scenario(10.0, seed);
        for (slot, chi) in [(0usize, 1.0f64), (1, 2.0)] {
            let opts = SolveOptions { chi, ..quick_opts() };
            let res = run_algorithm1_simple(&s, &opts).unwrap();
            frac[slot] += fractional_count(&res, opts.epsilon);
        }
    }
    assert!(
        frac[1] <= frac[0],
        "chi = 2 left more fractional activations ({}) than chi = 1 ({})",
        frac[1],
        frac[0]
    );
}

#[test]
fn phase_one_only_stays_close_to_full() {
    let config = ScenarioConfig {
        num_bs: 2,
        antennas_per_bs: vec![8, 8],
        groups_per_bs: 1,
        users_per_group: 2,
        rate_target_bps: 10e6,
        ..ScenarioConfig::default()
    };
    let opts = quick_opts();
    let mut full_sum = 0.0;
    let mut simple_sum = 0.0;
    for seed in [5u64, 6, 7] {
        let s = generate_scenario(&config, seed).unwrap();
        full_sum += run_algorithm1(&s, &opts).unwrap().ee_bits_per_joule;
        simple_sum += run_algorithm1_simple(&s, &opts).unwrap().ee_bits_per_joule;
    }
    let gap = (full_sum - simple_sum).abs();
    assert!(
        gap <= 0.05 * full_sum,
        "phase-1-only drifted {:.2}% from the full driver",
        100.0 * gap / full_sum
    );
}

#[test]
fn smaller_threshold_keeps_more_antennas() {
    let s = pair_scenario(10.0, 6);
    let fine = run_algorithm1(&s, &SolveOptions { epsilon: 1e-3, ..quick_opts() }).unwrap();
    let coarse = run_algorithm1(&s, &SolveOptions { epsilon: 0.3, ..quick_opts() }).unwrap();
    assert!(
        fine.selection.active_count() >= coarse.selection.active_count(),
        "threshold 1e-3 kept {} antennas, 0.3 kept {}",
        fine.selection.active_count(),
        coarse.selection.active_count()
    );
}

/// On a single-user instance the inner problem has one basin, so the log
/// lower bound and the exact exponential rows must converge to the same
/// point. Multi-group instances can split into different local optima, which
/// is why this check pins the interference-free case.
#[test]
fn backend_paths_agree_on_final_efficiency() {
    let config = ScenarioConfig {
        num_bs: 1,
        antennas_per_bs: vec![3],
        groups_per_bs: 1,
        users_per_group: 1,
        rate_target_bps: 10e6,
        ..ScenarioConfig::default()
    };
    let s = generate_scenario(&config, 8).unwrap();
    let base = SolveOptions { max_iter: 200, rel_tol: 1e-8, ..SolveOptions::default() };
    let socp =
        run_algorithm1(&s, &SolveOptions { backend_path: BackendPath::Socp, ..base }).unwrap();
    let generic =
        run_algorithm1(&s, &SolveOptions { backend_path: BackendPath::Generic, ..base }).unwrap();

    let last_obj = |r: &JbasResult| {
        r.trace.records.iter().filter(|x| x.phase == 1).last().unwrap().objective
    };
    let (o_s, o_g) = (last_obj(&socp), last_obj(&generic));
    assert!(
        (o_s - o_g).abs() <= 1e-5 * o_s.abs().max(1.0),
        "converged inner objectives disagree: {o_s} vs {o_g}"
    );
    let gap = (socp.ee_bits_per_joule - generic.ee_bits_per_joule).abs();
    assert!(
        gap <= 1e-3 * socp.ee_bits_per_joule,
        "backends disagree: {} vs {}",
        socp.ee_bits_per_joule,
        generic.ee_bits_per_joule
    );
}
