use proptest::prelude::*;

use swipt_das::allocator::{
    profitable_full_power_test, solve_kappa, trade_balance, RauClass, Scenario,
};
use swipt_das::audit::audit_allocation;
use swipt_das::baselines::{greedy_allocation, waterfilling_allocation};
use swipt_das::harness::unit_efficiency_closed_form;
use swipt_das::oracle::{oracle_ascent, oracle_grid_search};
use swipt_das::{optimal_allocation, Instance};

fn gains(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..1.0f64, n).prop_map(|v| {
        let mut g: Vec<f64> = v.into_iter().map(|x| 10f64.powf(x)).collect();
        g.sort_by(|a, b| b.total_cmp(a));
        g
    })
}

fn instance(max_n: usize) -> impl Strategy<Value = Instance> {
    (
        1..=max_n,
        1.0..10.0f64,
        prop::sample::select(vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
    )
        .prop_flat_map(|(n, p_max, eta)| {
            (gains(n), prop::collection::vec(0.0..2.0 * p_max, n))
                .prop_map(move |(g, e)| Instance::new(g, e, p_max, eta).unwrap())
        })
}

fn with_harvest(inst: &Instance, harvest: Vec<f64>) -> Instance {
    Instance::new(inst.gains().to_vec(), harvest, inst.p_max(), inst.eta()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn allocation_passes_structural_audit(inst in instance(32)) {
        let a = optimal_allocation(&inst);
        let v = audit_allocation(&inst, &a);
        prop_assert!(v.is_empty(), "{:?}", v);
    }

    #[test]
    fn grid_oracle_never_beats_allocator(inst in instance(3)) {
        let a = optimal_allocation(&inst);
        let g = oracle_grid_search(&inst, 21).unwrap();
        let scale = a.objective.max(1.0);
        prop_assert!(g.objective <= a.objective + 1e-8 * scale);
        prop_assert!((a.objective - g.objective) / scale <= 1e-4);
    }

    #[test]
    fn ascent_oracle_agrees(inst in instance(10)) {
        let a = optimal_allocation(&inst);
        let o = oracle_ascent(&inst, 1e-12).unwrap();
        prop_assert!(((o.objective - a.objective) / a.objective.max(1.0)).abs() <= 1e-4);
    }

    #[test]
    fn objective_grows_with_harvest(inst in instance(16), k in 0usize..16, extra in 0.0..5.0f64) {
        let k = k % inst.len();
        let mut harvest = inst.harvest().to_vec();
        harvest[k] += extra;
        let richer = with_harvest(&inst, harvest);
        let (a, b) = (optimal_allocation(&inst), optimal_allocation(&richer));
        prop_assert!(b.objective >= a.objective * (1.0 - 1e-9));
    }

    #[test]
    fn objective_grows_with_efficiency_and_cap(inst in instance(16), bump in 0.0..0.5f64) {
        let base = optimal_allocation(&inst).objective;
        let eta = (inst.eta() + bump).min(1.0);
        let better_eta = Instance::new(inst.gains().to_vec(), inst.harvest().to_vec(), inst.p_max(), eta).unwrap();
        prop_assert!(optimal_allocation(&better_eta).objective >= base * (1.0 - 1e-9));
        let better_cap = Instance::new(inst.gains().to_vec(), inst.harvest().to_vec(), inst.p_max() + bump, inst.eta()).unwrap();
        prop_assert!(optimal_allocation(&better_cap).objective >= base * (1.0 - 1e-9));
    }

    #[test]
    fn balance_is_nonincreasing_in_threshold(inst in instance(16), a in 0.0..50.0f64, d in 0.0..50.0f64) {
        let free: Vec<usize> = (0..inst.len()).collect();
        prop_assert!(trade_balance(&free, &inst, 0.0, a + d) <= trade_balance(&free, &inst, 0.0, a));
    }

    #[test]
    fn threshold_grows_with_fixed_surplus(inst in instance(16), s in 0.0..5.0f64, ds in 0.0..5.0f64) {
        let free: Vec<usize> = (0..inst.len()).collect();
        let k1 = solve_kappa(&free, &inst, s).unwrap();
        let k2 = solve_kappa(&free, &inst, s + ds).unwrap();
        prop_assert!(k2 >= k1 * (1.0 - 1e-9));
        let b = trade_balance(&free, &inst, s, k1);
        prop_assert!(k1 == 0.0 || b.abs() <= 1e-6 * (inst.eta() * inst.total_harvest() + s + 1.0));
    }

    #[test]
    fn unit_efficiency_collapses_to_single_threshold(inst in instance(16)) {
        let inst = Instance::new(inst.gains().to_vec(), inst.harvest().to_vec(), 1e6, 1.0).unwrap();
        let a = optimal_allocation(&inst);
        prop_assert_eq!(a.kappa_g, a.kappa_l);
        let (powers, objective) = unit_efficiency_closed_form(&inst);
        prop_assert!(((a.objective - objective) / objective).abs() <= 1e-9);
        for (p, q) in a.powers.iter().zip(&powers) {
            prop_assert!(((p - q) / q).abs() <= 1e-9);
        }
    }

    #[test]
    fn full_power_test_decides_scenario(inst in instance(8)) {
        let a = optimal_allocation(&inst);
        if profitable_full_power_test(&inst) {
            prop_assert_eq!(a.scenario, Scenario::Profitable);
            prop_assert!(a.classification.iter().all(|c| *c == RauClass::FullPower));
            prop_assert!(a.sum_state() >= 0.0);
        } else {
            prop_assert_eq!(a.scenario, Scenario::Neutral);
            prop_assert!(a.sum_state().abs() <= inst.balance_tolerance());
        }
    }

    #[test]
    fn optimal_dominates_baselines(inst in instance(32)) {
        let best = optimal_allocation(&inst).objective;
        for a in [greedy_allocation(&inst), waterfilling_allocation(&inst)] {
            prop_assert!(a.objective <= best + 1e-9 * best.max(1.0));
        }
    }

    #[test]
    fn positive_gains_never_silence_a_powered_instance(inst in instance(32)) {
        let a = optimal_allocation(&inst);
        if inst.total_harvest() > 0.0 {
            prop_assert!(a.powers.iter().all(|&p| p > 0.0));
        }
    }
}

#[test]
fn sixteen_rau_profile_with_fixed_gains() {
    let harvest = vec![
        6., 2., 6., 4., 1., 1., 4., 5., 1., 1., 4., 8., 1., 8., 1., 4.,
    ];
    let gains: Vec<f64> = (0..16).map(|k| 2.0 * 0.8f64.powi(k)).collect();
    let inst = Instance::new(gains, harvest, 5.0, 0.8).unwrap();
    let a = optimal_allocation(&inst);
    assert!(audit_allocation(&inst, &a).is_empty());
    assert_eq!(a.scenario, Scenario::Neutral);
    let (kg, kl) = (a.kappa_g.unwrap(), a.kappa_l.unwrap());
    assert!((kl / kg - 0.64).abs() < 1e-12);
    assert_eq!(a.classification[0], RauClass::FullPower);
    assert!(a.classification.contains(&RauClass::Charging));
    assert!(a.classification.contains(&RauClass::Discharging));
}
