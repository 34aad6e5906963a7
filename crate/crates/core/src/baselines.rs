//! Reference policies: greedy and adaptive water-filling. Both respect the
//! power cap and never leave the grid in deficit, but neither accounts for
//! the transfer loss when deciding where energy is spent.

use crate::allocator::{Allocation, Instance, Scenario};

const MAX_BISECTIONS: usize = 400;

fn scenario_for(inst: &Instance, powers: &[f64], sum_state: f64) -> Scenario {
    let saturated = powers.iter().all(|&p| p >= inst.p_max());
    if saturated && sum_state >= 0.0 {
        Scenario::Profitable
    } else {
        Scenario::Neutral
    }
}

/// Each RAU first spends its own harvest up to `p_max` and sells the rest;
/// the grid then re-routes the pooled surplus to the best-gain RAUs still
/// below the cap, one at a time, until the credit runs out.
pub fn greedy_allocation(inst: &Instance) -> Allocation {
    let eta = inst.eta();
    let p_max = inst.p_max();
    let mut powers: Vec<f64> = inst.harvest().iter().map(|&e| e.min(p_max)).collect();
    let mut credit: f64 = eta
        * inst
            .harvest()
            .iter()
            .map(|&e| (e - p_max).max(0.0))
            .sum::<f64>();

    // gains are sorted, so index order is best-first
    for p in powers.iter_mut() {
        if credit <= 0.0 {
            break;
        }
        if *p >= p_max {
            continue;
        }
        let room = p_max - *p;
        if eta * credit <= room {
            *p += eta * credit;
            credit = 0.0;
        } else {
            *p = p_max;
            credit -= room / eta;
        }
    }

    let mut alloc = Allocation::from_powers(inst, powers, None, Scenario::Neutral);
    alloc.scenario = scenario_for(inst, &alloc.powers, alloc.sum_state());
    alloc
}

fn water_level_powers(inst: &Instance, level: f64) -> Vec<f64> {
    inst.gains()
        .iter()
        .map(|&g| (level - 1.0 / g).max(0.0).min(inst.p_max()))
        .collect()
}

fn balance(inst: &Instance, powers: &[f64]) -> f64 {
    powers
        .iter()
        .enumerate()
        .map(|(k, &p)| inst.state_at(k, p))
        .sum()
}

/// `p_k = min(p_max, [level - 1/gamma_k]^+)` with the water level chosen so
/// the trade balance is zero. Falls back to all-`p_max` when even that
/// leaves the grid in surplus.
pub fn waterfilling_allocation(inst: &Instance) -> Allocation {
    let gains = inst.gains();
    let mut hi = 1.0 / gains[gains.len() - 1] + inst.p_max();
    // at this level every RAU is capped; build it directly to avoid rounding below p_max
    let top = vec![inst.p_max(); gains.len()];
    if balance(inst, &top) >= 0.0 {
        let mut alloc = Allocation::from_powers(inst, top, None, Scenario::Neutral);
        alloc.scenario = scenario_for(inst, &alloc.powers, alloc.sum_state());
        return alloc;
    }

    let tol = 1e-10 * (inst.eta() * inst.total_harvest() + 1.0);
    // the lower end keeps every RAU silent, so its balance is eta * sum E >= 0
    let mut lo = 1.0 / gains[0];
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let b = balance(inst, &water_level_powers(inst, mid));
        if b >= 0.0 {
            lo = mid;
            if b <= tol {
                break;
            }
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + lo) {
            break;
        }
    }
    let powers = water_level_powers(inst, lo);
    Allocation::from_powers(inst, powers, None, Scenario::Neutral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{optimal_allocation, RauClass};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn inst(gains: &[f64], harvest: &[f64], p_max: f64, eta: f64) -> Instance {
        Instance::new(gains.to_vec(), harvest.to_vec(), p_max, eta).unwrap()
    }

    #[test]
    fn greedy_hand_trace() {
        // phase 1: p = [5, 1], C = 3; credit 0.8 * 3 = 2.4 buys D = 0.8 * 2.4 = 1.92
        let a = greedy_allocation(&inst(&[2.0, 1.0], &[8.0, 1.0], 5.0, 0.8));
        assert_eq!(a.powers[0], 5.0);
        assert_relative_eq!(a.powers[1], 2.92, max_relative = 1e-14);
        assert_relative_eq!(a.trade.discharge[1], 1.92, max_relative = 1e-12);
        assert!(a.sum_state().abs() < 1e-12);
        assert_eq!(a.scenario, Scenario::Neutral);
    }

    #[test]
    fn greedy_saturated() {
        let a = greedy_allocation(&inst(&[2.0, 1.0, 0.5], &[6.0, 5.0, 9.0], 5.0, 0.8));
        assert_eq!(a.powers, vec![5.0; 3]);
        assert!(a.sum_state() > 0.0);
        assert_eq!(a.scenario, Scenario::Profitable);
    }

    #[test]
    fn greedy_nothing_harvested() {
        let a = greedy_allocation(&inst(&[2.0, 1.0], &[0.0, 0.0], 5.0, 0.8));
        assert_eq!(a.powers, vec![0.0, 0.0]);
        assert_eq!(a.classification, vec![RauClass::ZeroPower; 2]);
    }

    #[test]
    fn greedy_tops_up_best_gain_first() {
        // credit 0.5 * 15 = 7.5; topping RAU 1 up by 2.5 costs 5, the rest buys 1.25
        let a = greedy_allocation(&inst(&[3.0, 2.0, 1.0], &[20.0, 2.5, 1.0], 5.0, 0.5));
        assert_eq!(a.powers[1], 5.0);
        assert_relative_eq!(a.powers[2], 2.25, max_relative = 1e-14);
        assert!(a.sum_state().abs() < 1e-12);
    }

    #[test]
    fn waterfilling_symmetric() {
        let a = waterfilling_allocation(&inst(&[1.0, 1.0], &[2.0, 4.0], 100.0, 1.0));
        assert_relative_eq!(a.powers[0], 3.0, max_relative = 1e-9);
        assert_relative_eq!(a.powers[1], 3.0, max_relative = 1e-9);
    }

    #[test]
    fn waterfilling_cuts_off_weak_raus() {
        let a = waterfilling_allocation(&inst(&[1.0, 0.5, 1e-4], &[3.0, 3.0, 3.0], 5.0, 0.9));
        assert_eq!(a.powers[2], 0.0);
        assert_eq!(a.classification[2], RauClass::ZeroPower);
    }

    #[test]
    fn waterfilling_all_caps_when_rich() {
        let a = waterfilling_allocation(&inst(&[1.0, 0.5], &[9.0, 9.0], 5.0, 0.9));
        assert_eq!(a.powers, vec![5.0, 5.0]);
        assert_eq!(a.scenario, Scenario::Profitable);
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        (1usize..12, 0.3..1.0f64, 1.0..8.0f64).prop_flat_map(|(n, eta, p_max)| {
            (
                prop::collection::vec(0.01..1.0f64, n),
                prop::collection::vec(0.0..2.0 * p_max, n),
            )
                .prop_map(move |(mut g, e)| {
                    g.sort_by(|a, b| b.total_cmp(a));
                    Instance::new(g, e, p_max, eta).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn baselines_are_feasible_and_dominated(i in arb_instance()) {
            let opt = optimal_allocation(&i);
            for a in [greedy_allocation(&i), waterfilling_allocation(&i)] {
                for k in 0..i.len() {
                    prop_assert!(a.powers[k] >= 0.0 && a.powers[k] <= i.p_max());
                    prop_assert!(a.trade.charge[k] * a.trade.discharge[k] == 0.0);
                }
                prop_assert!(a.sum_state() >= -1e-9);
                prop_assert!(opt.objective >= a.objective - 1e-9 * (1.0 + a.objective));
            }
            let wf = waterfilling_allocation(&i);
            if wf.powers.iter().any(|&p| p < i.p_max()) {
                prop_assert!(wf.sum_state().abs() <= 1e-6);
            }
        }
    }
}
