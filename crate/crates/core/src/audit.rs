//! Structural checks on an [`Allocation`]: trade complementarity, power
//! bookkeeping, cap and balance feasibility, the full-power criterion, and
//! the monotone/threshold shape an optimal allocation must have.

use std::fmt;

use serde::Serialize;

use crate::allocator::{profitable_full_power_test, Allocation, Instance, RauClass, Scenario};

pub const CAP_TOLERANCE: f64 = 1e-12;
pub const RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    Shape,
    Complementarity,
    PowerIdentity,
    Cap,
    Balance,
    FullPowerCriterion,
    FullPowerMonotone,
    ZeroPowerMonotone,
    ThresholdRatio,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub rau: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rau {
            Some(k) => write!(f, "{:?} at RAU {}: {}", self.rule, k, self.detail),
            None => write!(f, "{:?}: {}", self.rule, self.detail),
        }
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, rule: Rule, rau: Option<usize>, detail: String) {
        self.0.push(Violation { rule, rau, detail });
    }
}

/// Checks an allocation produced by the optimal solver. Returns every
/// violated rule; an empty vector means the allocation passed.
pub fn audit_allocation(inst: &Instance, alloc: &Allocation) -> Vec<Violation> {
    let mut out = Collector(Vec::new());
    let n = inst.len();
    let lens = [
        alloc.powers.len(),
        alloc.trade.charge.len(),
        alloc.trade.discharge.len(),
        alloc.trade.states.len(),
        alloc.classification.len(),
    ];
    if lens.iter().any(|&l| l != n) {
        out.push(
            Rule::Shape,
            None,
            format!("expected {n} entries, got {lens:?}"),
        );
        return out.0;
    }

    audit_feasibility(inst, alloc, &mut out);
    audit_structure(inst, alloc, &mut out);
    out.0
}

/// Checks only what any feasible policy must satisfy (used for baselines).
pub fn audit_feasible(inst: &Instance, alloc: &Allocation) -> Vec<Violation> {
    let mut out = Collector(Vec::new());
    if alloc.powers.len() != inst.len() {
        out.push(Rule::Shape, None, "length mismatch".into());
        return out.0;
    }
    audit_feasibility(inst, alloc, &mut out);
    out.0
}

fn audit_feasibility(inst: &Instance, alloc: &Allocation, out: &mut Collector) {
    let eta = inst.eta();
    let p_max = inst.p_max();
    for k in 0..inst.len() {
        let p = alloc.powers[k];
        let c = alloc.trade.charge[k];
        let d = alloc.trade.discharge[k];
        let e = inst.harvest()[k];
        if c * d != 0.0 || c < 0.0 || d < 0.0 {
            out.push(Rule::Complementarity, Some(k), format!("C = {c}, D = {d}"));
        }
        if (e + d - c - p).abs() > 1e-12 * (1.0 + e + p) {
            out.push(
                Rule::PowerIdentity,
                Some(k),
                format!("p = {p}, E + D - C = {}", e + d - c),
            );
        }
        if !(p >= 0.0 && p <= p_max + CAP_TOLERANCE) {
            out.push(Rule::Cap, Some(k), format!("p = {p} outside [0, {p_max}]"));
        }
        let s = eta * c - d / eta;
        if (alloc.trade.states[k] - s).abs() > 1e-12 * (1.0 + s.abs()) {
            out.push(
                Rule::Balance,
                Some(k),
                format!("state {} != {s}", alloc.trade.states[k]),
            );
        }
    }
    let total = alloc.sum_state();
    match alloc.scenario {
        Scenario::Neutral => {
            let tol = inst.balance_tolerance();
            if total.abs() > tol && total < 0.0 {
                out.push(Rule::Balance, None, format!("sum S = {total} below -{tol}"));
            }
        }
        Scenario::Profitable => {
            if total < -CAP_TOLERANCE {
                out.push(
                    Rule::Balance,
                    None,
                    format!("profitable but sum S = {total}"),
                );
            }
        }
    }
}

fn audit_structure(inst: &Instance, alloc: &Allocation, out: &mut Collector) {
    let n = inst.len();
    let eta = inst.eta();
    let p_max = inst.p_max();
    let gains = inst.gains();
    let harvest = inst.harvest();
    let class = &alloc.classification;
    let total = alloc.sum_state();

    if alloc.scenario == Scenario::Neutral && total.abs() > inst.balance_tolerance() {
        out.push(Rule::Balance, None, format!("neutral but sum S = {total}"));
    }

    let profitable = profitable_full_power_test(inst);
    match (profitable, alloc.scenario) {
        (true, Scenario::Profitable) => {
            if alloc.powers.iter().any(|&p| p != p_max) {
                out.push(
                    Rule::FullPowerCriterion,
                    None,
                    "profitable but not all at p_max".into(),
                );
            }
        }
        (true, Scenario::Neutral) => out.push(
            Rule::FullPowerCriterion,
            None,
            "criterion holds but scenario is neutral".into(),
        ),
        (false, Scenario::Profitable) => out.push(
            Rule::FullPowerCriterion,
            None,
            "criterion fails but scenario is profitable".into(),
        ),
        (false, Scenario::Neutral) => {}
    }

    for k in 0..n {
        let p = alloc.powers[k];
        let c = alloc.trade.charge[k];
        let d = alloc.trade.discharge[k];
        let expected = if p >= p_max * (1.0 - crate::allocator::CAP_SNAP) {
            RauClass::FullPower
        } else if p <= 0.0 {
            RauClass::ZeroPower
        } else if c > 0.0 {
            RauClass::Charging
        } else if d > 0.0 {
            RauClass::Discharging
        } else {
            RauClass::Passive
        };
        if class[k] != expected {
            out.push(
                Rule::Classification,
                Some(k),
                format!("tagged {:?} but p = {p}, C = {c}, D = {d}", class[k]),
            );
        }
    }

    for k in 0..n {
        if class[k] == RauClass::FullPower {
            let buys = alloc.trade.discharge[k] > 0.0;
            let sells = alloc.trade.charge[k] > 0.0;
            for j in 0..k {
                let must = buys || (sells && harvest[j] > p_max);
                if must && class[j] != RauClass::FullPower {
                    out.push(
                        Rule::FullPowerMonotone,
                        Some(j),
                        format!("RAU {k} is at p_max but better RAU {j} is {:?}", class[j]),
                    );
                }
            }
        }
        if class[k] == RauClass::ZeroPower {
            for j in k + 1..n {
                if class[j] != RauClass::ZeroPower {
                    out.push(
                        Rule::ZeroPowerMonotone,
                        Some(j),
                        format!("RAU {k} is silent but worse RAU {j} is {:?}", class[j]),
                    );
                }
            }
        }
    }

    let interior = class.iter().any(|c| {
        matches!(
            c,
            RauClass::Charging | RauClass::Discharging | RauClass::Passive
        )
    });
    let (kg, kl) = match (alloc.kappa_g, alloc.kappa_l) {
        (Some(kg), Some(kl)) => (kg, kl),
        (None, None) => {
            if interior {
                out.push(
                    Rule::ThresholdRatio,
                    None,
                    "interior RAUs but no thresholds".into(),
                );
            }
            return;
        }
        _ => {
            out.push(
                Rule::ThresholdRatio,
                None,
                "only one threshold present".into(),
            );
            return;
        }
    };
    if (kl - eta * eta * kg).abs() > 1e-15 * kg {
        out.push(
            Rule::ThresholdRatio,
            None,
            format!("kappa_l = {kl} != eta^2 kappa_g"),
        );
    }
    for k in 0..n {
        let p = alloc.powers[k];
        let g = gains[k];
        let ratio = p.sqrt() / g;
        match class[k] {
            RauClass::Charging if (ratio - kg).abs() > RATIO_TOLERANCE * kg => out.push(
                Rule::ThresholdRatio,
                Some(k),
                format!("charging ratio {ratio} != kappa_g {kg}"),
            ),
            RauClass::Discharging if (ratio - kl).abs() > RATIO_TOLERANCE * kl => out.push(
                Rule::ThresholdRatio,
                Some(k),
                format!("discharging ratio {ratio} != kappa_l {kl}"),
            ),
            RauClass::Passive => {
                let tol = 1e-9 * (1.0 + harvest[k]);
                let lower = g * g * kl * kl;
                let upper = g * g * kg * kg;
                if p < lower - tol || p > upper + tol {
                    out.push(
                        Rule::ThresholdRatio,
                        Some(k),
                        format!("passive power {p} outside [{lower}, {upper}]"),
                    );
                }
            }
            _ => {}
        }
    }
}
