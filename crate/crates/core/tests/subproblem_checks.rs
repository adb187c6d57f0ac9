//! Solver-backed checks of the lifted subproblem builders: the reported
//! objective must equal the surrogate efficiency of the recovered point, the
//! recovered point must satisfy the unlifted constraints, and the two rate
//! encodings must nest.

use jbas_core::algorithms::{initialize_feasible, SolveOptions};
use jbas_core::bounds::{psi, upsilon, xi};
use jbas_core::conic::{solve, SolveStatus, TolSpec};
use jbas_core::model::{generate_scenario, Scenario, ScenarioConfig};
use jbas_core::subproblems::{
    build_cc_subproblem, build_masked_refit, recover_point, CcOptions, RatePath, GAMMA_FLOOR,
};

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

const TIGHT: TolSpec = TolSpec { feas: 1e-9, gap: 1e-10 };

#[test]
fn lifted_objective_is_recovered_efficiency() {
    let s = pair_scenario(5.0, 31);
    let sn = s.noise_normalized();
    let chi = 2.0;
    let ep = initialize_feasible(&s, &SolveOptions::default()).unwrap();

    let built = build_cc_subproblem(&sn, &ep, chi, &CcOptions::default());
    let sol = solve(&built.prog, &TIGHT);
    assert_eq!(sol.status, SolveStatus::Optimal, "backend: {}", sol.backend_status);

    let rec = recover_point(&built.layout, &sol.x);
    let pm = &sn.config.power;

    // The budget row is tight at the optimum, which makes the objective the
    // surrogate efficiency of the recovered point.
    let modeled =
        rec.v.iter().sum::<f64>() / pm.eta + pm.p_rf * rec.a.iter().sum::<f64>() + sn.p0();
    assert!(
        (rec.phi * modeled - 1.0).abs() <= 1e-6,
        "budget not tight: phi*power = {}",
        rec.phi * modeled
    );
    let recovered_obj = rec.r.iter().sum::<f64>() / modeled;
    assert!(
        (sol.objective - recovered_obj).abs() <= 1e-6 * sol.objective.abs().max(1.0),
        "objective {} vs recovered efficiency {}",
        sol.objective,
        recovered_obj
    );

    // Per-antenna soft powers and activations stay in their boxes.
    for (j, &v) in rec.v.iter().enumerate() {
        assert!(v >= -1e-9 && v <= pm.p_max + 1e-7, "soft power {j} = {v}");
    }
    for (j, &a) in rec.a.iter().enumerate() {
        assert!((0.0..=1.0).contains(&a), "activation {j} = {a}");
    }

    // Coupling rows: each antenna row fits its soft power scaled by the
    // activation tangent.
    for b in 0..sn.num_bs() {
        let off = sn.antenna_offset(b);
        for i in 0..sn.config.antennas_per_bs[b] {
            let j = off + i;
            let norm_sq: f64 = rec.w.antenna_row(&sn, b, i).iter().map(|c| c.norm_sqr()).sum();
            let cap = rec.v[j] * upsilon(ep.a[j], chi).eval(rec.a[j]);
            assert!(norm_sq <= cap + 1e-7, "antenna {j}: {norm_sq} > {cap}");
        }
    }

    // SINR chain: modeled denominators cover the true interference, modeled
    // numerators stay under the surrogate.
    for k in 0..sn.num_users() {
        let g = sn.group_of_user(k);
        let b = sn.groups[g].serving_bs;
        assert!(
            sn.interference_plus_noise(&rec.w, k) <= rec.beta[k] + 1e-6,
            "user {k}: denominator row violated"
        );
        let co = psi(&sn.channels[b][k], &ep.w.per_group[g], ep.beta[k]).unwrap();
        assert!(
            rec.gamma[k] <= co.eval(&rec.w.per_group[g], rec.beta[k]) + 1e-6,
            "user {k}: numerator row violated"
        );
    }

    // Rate hypographs and targets.
    let targets = sn.rate_targets_nats();
    for (g, grp) in sn.groups.iter().enumerate() {
        for &k in &grp.users {
            let co = xi(ep.gamma[k].max(GAMMA_FLOOR)).unwrap();
            assert!(
                rec.r[g] <= co.eval(rec.gamma[k].max(1e-12)) + 1e-6,
                "group {g}: rate above member {k} surrogate"
            );
        }
        let t_g = grp.users.iter().map(|&k| targets[k]).fold(0.0f64, f64::max);
        assert!(rec.r[g] >= t_g - 1e-9, "group {g}: rate {} below target {t_g}", rec.r[g]);
    }

    // Per-BS minimum activation rows.
    for (b, &need) in sn.min_active_antennas().iter().enumerate() {
        let off = sn.antenna_offset(b);
        let on: f64 = (0..sn.config.antennas_per_bs[b]).map(|i| rec.a[off + i]).sum();
        assert!(on >= need as f64 - 1e-7, "BS {b}: activation sum {on} below {need}");
    }
}

#[test]
fn exponential_rate_rows_relax_the_log_bound() {
    let s = pair_scenario(5.0, 32);
    let sn = s.noise_normalized();
    let ep = initialize_feasible(&s, &SolveOptions::default()).unwrap();

    let soc = build_cc_subproblem(
        &sn,
        &ep,
        2.0,
        &CcOptions { rate_path: RatePath::Soc, ..Default::default() },
    );
    let exp = build_cc_subproblem(
        &sn,
        &ep,
        2.0,
        &CcOptions { rate_path: RatePath::Exponential, ..Default::default() },
    );
    let so = solve(&soc.prog, &TIGHT);
    let ex = solve(&exp.prog, &TIGHT);
    assert_eq!(so.status, SolveStatus::Optimal, "backend: {}", so.backend_status);
    assert_eq!(ex.status, SolveStatus::Optimal, "backend: {}", ex.backend_status);

    // Every point of the log-bound program is feasible for the exact
    // exponential rows, so the exponential optimum can only be larger.
    assert!(
        ex.objective >= so.objective - 1e-6 * so.objective.abs().max(1.0),
        "exponential {} below log bound {}",
        ex.objective,
        so.objective
    );
}

#[test]
fn feasible_start_meets_targets_for_any_penalty_weight() {
    let s = pair_scenario(10.0, 33);
    let targets = s.rate_targets_nats();
    let pm = &s.config.power;
    for lambda in [10.0, 1000.0] {
        let opts = SolveOptions { feas_lambda: lambda, ..SolveOptions::default() };
        let ep = initialize_feasible(&s, &opts).unwrap();
        for (g, grp) in s.groups.iter().enumerate() {
            let worst = grp
                .users
                .iter()
                .map(|&k| s.user_rate_nats(&ep.w, k))
                .fold(f64::INFINITY, f64::min);
            let t_g = grp.users.iter().map(|&k| targets[k]).fold(0.0f64, f64::max);
            assert!(worst >= t_g - 1e-5, "lambda {lambda}, group {g}: {worst} vs {t_g}");
        }
        for b in 0..s.num_bs() {
            for i in 0..s.config.antennas_per_bs[b] {
                let row_sq: f64 = ep.w.antenna_row(&s, b, i).iter().map(|c| c.norm_sqr()).sum();
                assert!(row_sq <= pm.p_max + 1e-5, "lambda {lambda}: antenna cap violated");
            }
        }
    }
}

#[test]
fn masked_refit_pins_disabled_rows() {
    let s = pair_scenario(5.0, 34);
    let sn = s.noise_normalized();
    let ep = initialize_feasible(&s, &SolveOptions::default()).unwrap();
    let mask = [true, false, true, true, true, false];

    let built = build_masked_refit(&sn, &ep, &mask, 1.0, RatePath::Soc);
    let sol = solve(&built.prog, &TIGHT);
    assert_eq!(sol.status, SolveStatus::Optimal, "backend: {}", sol.backend_status);
    let rec = recover_point(&built.layout, &sol.x);

    let pm = &sn.config.power;
    for b in 0..sn.num_bs() {
        let off = sn.antenna_offset(b);
        for i in 0..sn.config.antennas_per_bs[b] {
            let row_sq: f64 =
                rec.w.antenna_row(&sn, b, i).iter().map(|c| c.norm_sqr()).sum();
            if mask[off + i] {
                assert!(row_sq <= pm.p_max + 1e-7, "antenna {} over cap", off + i);
            } else {
                assert!(row_sq <= 1e-14, "disabled antenna {} carries power", off + i);
            }
        }
    }

    // The recovered point still meets the rate targets exactly evaluated.
    let targets = sn.rate_targets_nats();
    for (g, grp) in sn.groups.iter().enumerate() {
        let worst = grp
            .users
            .iter()
            .map(|&k| sn.user_rate_nats(&rec.w, k))
            .fold(f64::INFINITY, f64::min);
        let t_g = grp.users.iter().map(|&k| targets[k]).fold(0.0f64, f64::max);
        assert!(worst >= t_g - 1e-5, "group {g}: {worst} vs {t_g}");
    }
}
