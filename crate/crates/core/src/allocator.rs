//! Globally optimal power allocation for the reduced problem
//!
//! ```text
//! maximise   (sum_i sqrt(p_i) * gamma_i)^2
//! subject to sum_i S_i >= 0,   0 <= p_i <= p_max,
//!            S_i = eta * C_i - D_i / eta,   p_i = E_i + D_i - C_i
//! ```
//!
//! When the all-`p_max` vector already leaves the grid in surplus, every RAU
//! transmits at full power. Otherwise the trade balance is tight and each
//! interior RAU follows a double-threshold rule on `sqrt(p)/gamma`: RAUs that
//! sell energy sit at the charging level `kappa_g`, RAUs that buy sit at the
//! discharging level `kappa_l = eta^2 * kappa_g`, and the rest spend exactly
//! their harvest. `kappa_g` is found by bisection on the trade balance, and
//! RAUs that hit the power cap (or, on trial, zero power) are pinned and
//! removed from the search set until nothing changes.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Relative gap under which a power is treated as sitting on `p_max`.
pub const CAP_SNAP: f64 = 1e-9;
/// Relative gap (scaled by `1 + E`) under which a power is treated as `E`.
pub const PASSIVE_SNAP: f64 = 1e-9;
/// Zero-power trials must beat the incumbent by more than this relative
/// margin; smaller differences are rounding noise from the bisection.
const ZERO_ACCEPT_MARGIN: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: usize = 2048;
const MAX_BISECTIONS: usize = 400;

/// One optimisation problem with gains sorted in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    gains: Vec<f64>,
    harvest: Vec<f64>,
    p_max: f64,
    eta: f64,
}

impl Instance {
    pub fn new(gains: Vec<f64>, harvest: Vec<f64>, p_max: f64, eta: f64) -> Result<Self> {
        if gains.is_empty() {
            return Err(param("instance needs at least one RAU"));
        }
        if gains.len() != harvest.len() {
            return Err(param(format!(
                "{} gains but {} harvest rates",
                gains.len(),
                harvest.len()
            )));
        }
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(param(format!("gains must be positive and finite, got {g}")));
        }
        if gains.windows(2).any(|w| w[1] > w[0]) {
            return Err(param("gains must be sorted in non-increasing order"));
        }
        if let Some(e) = harvest.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(param(format!("harvest rates must be nonnegative, got {e}")));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(param(format!("p_max must be positive, got {p_max}")));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(param(format!("eta must lie in (0, 1], got {eta}")));
        }
        Ok(Self {
            gains,
            harvest,
            p_max,
            eta,
        })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn harvest(&self) -> &[f64] {
        &self.harvest
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn total_harvest(&self) -> f64 {
        self.harvest.iter().sum()
    }

    /// Allowed `|sum S|` in the grid-neutral case.
    pub fn balance_tolerance(&self) -> f64 {
        1e-6 * (self.eta * self.total_harvest() + 1.0)
    }

    fn bisection_balance_tolerance(&self) -> f64 {
        1e-10 * (self.eta * self.total_harvest() + 1.0)
    }

    /// Net grid benefit of running RAU `k` at `power`.
    pub fn state_at(&self, k: usize, power: f64) -> f64 {
        let (c, d) = trade_split(power, self.harvest[k]);
        self.eta * c - d / self.eta
    }
}

/// Per-RAU role in an allocation. `FullPower` and `ZeroPower` take precedence
/// over the trade tags, so a RAU at `p_max` that sells surplus is tagged
/// `FullPower`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RauClass {
    FullPower,
    ZeroPower,
    Charging,
    Discharging,
    Passive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Every RAU at `p_max` and the grid is not in deficit.
    Profitable,
    /// The trade balance is tight.
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradePlan {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub states: Vec<f64>,
}

impl TradePlan {
    pub fn from_powers(powers: &[f64], harvest: &[f64], eta: f64) -> Self {
        let (charge, discharge): (Vec<f64>, Vec<f64>) = powers
            .iter()
            .zip(harvest)
            .map(|(&p, &e)| trade_split(p, e))
            .unzip();
        let states = charge
            .iter()
            .zip(&discharge)
            .map(|(&c, &d)| eta * c - d / eta)
            .collect();
        Self {
            charge,
            discharge,
            states,
        }
    }

    pub fn sum_state(&self) -> f64 {
        self.states.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub powers: Vec<f64>,
    pub trade: TradePlan,
    pub kappa_g: Option<f64>,
    pub kappa_l: Option<f64>,
    pub classification: Vec<RauClass>,
    pub scenario: Scenario,
    pub objective: f64,
}

impl Allocation {
    /// Builds the trade plan, tags and objective for a given power vector.
    pub fn from_powers(
        inst: &Instance,
        powers: Vec<f64>,
        kappa_g: Option<f64>,
        scenario: Scenario,
    ) -> Self {
        let trade = TradePlan::from_powers(&powers, &inst.harvest, inst.eta);
        let classification = powers
            .iter()
            .zip(trade.charge.iter().zip(&trade.discharge))
            .map(|(&p, (&c, &d))| classify(p, c, d, inst.p_max))
            .collect();
        let objective = objective_unchecked(&powers, &inst.gains);
        Self {
            powers,
            trade,
            kappa_g,
            kappa_l: kappa_g.map(|k| inst.eta * inst.eta * k),
            classification,
            scenario,
            objective,
        }
    }

    pub fn sum_state(&self) -> f64 {
        self.trade.sum_state()
    }
}

fn classify(power: f64, charge: f64, discharge: f64, p_max: f64) -> RauClass {
    if power >= p_max * (1.0 - CAP_SNAP) {
        RauClass::FullPower
    } else if power <= 0.0 {
        RauClass::ZeroPower
    } else if charge > 0.0 {
        RauClass::Charging
    } else if discharge > 0.0 {
        RauClass::Discharging
    } else {
        RauClass::Passive
    }
}

/// Grid charge and discharge implied by spending `power` out of `harvest`.
pub fn trade_split(power: f64, harvest: f64) -> (f64, f64) {
    ((harvest - power).max(0.0), (power - harvest).max(0.0))
}

/// `eta * C - D / eta`.
pub fn trade_state(charge: f64, discharge: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(param(format!("eta must lie in (0, 1], got {eta}")));
    }
    if charge < 0.0 || discharge < 0.0 {
        return Err(param("charge and discharge must be nonnegative"));
    }
    if charge > 0.0 && discharge > 0.0 {
        return Err(Error::TradeContract { charge, discharge });
    }
    Ok(eta * charge - discharge / eta)
}

/// True when running every RAU at `p_max` leaves the grid without a deficit,
/// in which case full power is optimal.
pub fn profitable_full_power_test(inst: &Instance) -> bool {
    let n = inst.len() as f64;
    let total: f64 = inst.total_harvest();
    let surplus: f64 = inst
        .harvest
        .iter()
        .filter(|&&e| e > inst.p_max)
        .map(|&e| e - inst.p_max)
        .sum();
    total >= n * inst.p_max + (1.0 - inst.eta * inst.eta) * surplus
}

/// Double-threshold power rule for a single RAU, ignoring the cap.
///
/// Returns `(power, tag)` with the tag one of `Charging`, `Discharging` or
/// `Passive`.
pub fn threshold_power(gain: f64, harvest: f64, kappa_g: f64, eta: f64) -> (f64, RauClass) {
    let g2 = gain * gain;
    let upper = g2 * kappa_g * kappa_g;
    let kappa_l = eta * eta * kappa_g;
    let lower = g2 * kappa_l * kappa_l;
    if harvest > upper {
        (upper, RauClass::Charging)
    } else if harvest < lower {
        (lower, RauClass::Discharging)
    } else {
        (harvest, RauClass::Passive)
    }
}

/// Trade balance of the free RAUs under threshold `kappa_g`, plus the fixed
/// contribution of pinned RAUs. Nonincreasing in `kappa_g`.
pub fn trade_balance(free: &[usize], inst: &Instance, fixed_balance: f64, kappa_g: f64) -> f64 {
    let eta = inst.eta;
    let kg2 = kappa_g * kappa_g;
    let kl2 = eta.powi(4) * kg2;
    let sum: f64 = free
        .iter()
        .map(|&k| {
            let g2 = inst.gains[k] * inst.gains[k];
            let e = inst.harvest[k];
            eta * (e - g2 * kg2).max(0.0) - (g2 * kl2 - e).max(0.0) / eta
        })
        .sum();
    sum + fixed_balance
}

/// Charging threshold that zeroes the trade balance over `free_set`.
pub fn solve_kappa(free_set: &[usize], inst: &Instance, fixed_balance: f64) -> Result<f64> {
    if free_set.is_empty() {
        return Err(param("threshold search needs a nonempty free set"));
    }
    if let Some(&k) = free_set.iter().find(|&&k| k >= inst.len()) {
        return Err(param(format!("RAU index {k} out of range")));
    }
    let balance = |kappa: f64| trade_balance(free_set, inst, fixed_balance, kappa);
    let tol_balance = inst.bisection_balance_tolerance();

    if balance(0.0) <= 0.0 {
        return Ok(0.0);
    }

    let worst_gain = free_set
        .iter()
        .map(|&k| inst.gains[k])
        .fold(f64::INFINITY, f64::min);
    let mut hi = inst.p_max.sqrt() / worst_gain;
    let mut doublings = 0;
    while balance(hi) > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(param("trade balance never turns negative"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let b = balance(mid);
        if b.abs() <= tol_balance {
            return Ok(mid);
        }
        if b > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + mid) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mutable state of the elimination loop.
///
/// `free` lists RAUs whose power follows the threshold rule, in descending
/// gain order. `full` and `zero` hold pinned RAUs, and `fixed_balance` is
/// the trade balance they contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingState {
    pub powers: Vec<f64>,
    pub free: Vec<usize>,
    pub full: Vec<usize>,
    pub zero: Vec<usize>,
    pub fixed_balance: f64,
    pub kappa_g: f64,
}

impl WorkingState {
    /// All RAUs free, threshold solved over the full set.
    pub fn initial(inst: &Instance) -> Self {
        let mut state = Self {
            powers: vec![0.0; inst.len()],
            free: (0..inst.len()).collect(),
            full: Vec::new(),
            zero: Vec::new(),
            fixed_balance: 0.0,
            kappa_g: 0.0,
        };
        state.refresh(inst);
        state
    }

    /// Re-solves the threshold over the free set and recomputes the free
    /// RAUs' candidate powers. No-op for an empty free set.
    pub fn refresh(&mut self, inst: &Instance) {
        if self.free.is_empty() {
            return;
        }
        self.kappa_g = solve_kappa(&self.free, inst, self.fixed_balance)
            .expect("free set is nonempty and indices are valid");
        for &k in &self.free {
            self.powers[k] =
                threshold_power(inst.gains[k], inst.harvest[k], self.kappa_g, inst.eta).0;
        }
    }

    pub fn objective(&self, inst: &Instance) -> f64 {
        objective_unchecked(&self.powers, &inst.gains)
    }
}

/// Pins every free RAU whose candidate power reaches `p_max`, together with
/// the better-gain RAUs that must then also run at full power.
///
/// A pinned RAU that buys energy at `p_max` drags every better-gain free RAU
/// to `p_max`; one that sells energy drags the better-gain free RAUs whose
/// own harvest exceeds `p_max`. Does not re-solve the threshold.
pub fn find_full_power_raus(mut state: WorkingState, inst: &Instance) -> WorkingState {
    let p_max = inst.p_max;
    let mut pin = vec![false; inst.len()];
    for (pos, &k) in state.free.iter().enumerate() {
        if state.powers[k] < p_max {
            continue;
        }
        pin[k] = true;
        let e_k = inst.harvest[k];
        for &j in &state.free[..pos] {
            if p_max > e_k || (e_k > p_max && inst.harvest[j] > p_max) {
                pin[j] = true;
            }
        }
    }
    let (pinned, free): (Vec<usize>, Vec<usize>) = state.free.iter().partition(|&&k| pin[k]);
    for &k in &pinned {
        state.powers[k] = p_max;
        state.fixed_balance += inst.state_at(k, p_max);
    }
    state.full.extend(pinned);
    state.full.sort_unstable();
    state.free = free;
    state
}

/// Alternates threshold solves and full-power pinning until the free set
/// stops shrinking.
pub fn settle_full_power(mut state: WorkingState, inst: &Instance) -> WorkingState {
    loop {
        let before = state.free.len();
        state = find_full_power_raus(state, inst);
        if state.free.len() == before {
            return state;
        }
        state.refresh(inst);
    }
}

/// Tries to switch off the worst-gain free RAU, selling its whole harvest.
///
/// The trial re-solves the threshold and full-power pinning over the
/// remaining RAUs and is accepted only if the objective strictly improves.
/// Returns the incumbent unchanged otherwise.
pub fn find_zero_power_raus(state: WorkingState, inst: &Instance) -> (bool, WorkingState) {
    if state.free.len() <= 1 {
        return (false, state);
    }
    let incumbent = state.objective(inst);
    let mut trial = state.clone();
    let worst = trial.free.pop().expect("free set has at least two RAUs");
    trial.powers[worst] = 0.0;
    trial.fixed_balance += inst.eta * inst.harvest[worst];
    trial.zero.push(worst);
    trial.zero.sort_unstable();
    trial.refresh(inst);
    let trial = settle_full_power(trial, inst);
    if trial.objective(inst) > incumbent * (1.0 + ZERO_ACCEPT_MARGIN) {
        (true, trial)
    } else {
        (false, state)
    }
}

/// Solves the allocation problem to global optimality.
pub fn optimal_allocation(inst: &Instance) -> Allocation {
    if profitable_full_power_test(inst) {
        return Allocation::from_powers(
            inst,
            vec![inst.p_max; inst.len()],
            None,
            Scenario::Profitable,
        );
    }

    let mut state = settle_full_power(WorkingState::initial(inst), inst);
    loop {
        let (improved, next) = find_zero_power_raus(state, inst);
        state = next;
        if !improved {
            break;
        }
    }
    finalize(inst, state)
}

fn finalize(inst: &Instance, state: WorkingState) -> Allocation {
    let mut powers = state.powers;
    for &k in &state.free {
        let e = inst.harvest[k];
        let p = &mut powers[k];
        if *p >= inst.p_max * (1.0 - CAP_SNAP) {
            *p = inst.p_max;
        } else if e > 0.0 && (*p - e).abs() <= PASSIVE_SNAP * (1.0 + e) {
            *p = e;
        }
    }
    let kappa = (!state.free.is_empty()).then_some(state.kappa_g);
    Allocation::from_powers(inst, powers, kappa, Scenario::Neutral)
}

/// `(sum_i sqrt(p_i) * gamma_i)^2`.
pub fn objective_value(powers: &[f64], gains: &[f64]) -> Result<f64> {
    if powers.len() != gains.len() {
        return Err(param("powers and gains differ in length"));
    }
    if let Some(p) = powers.iter().find(|p| !(**p >= 0.0)) {
        return Err(param(format!("negative power {p}")));
    }
    Ok(objective_unchecked(powers, gains))
}

pub(crate) fn objective_unchecked(powers: &[f64], gains: &[f64]) -> f64 {
    let amp: f64 = powers.iter().zip(gains).map(|(p, g)| p.sqrt() * g).sum();
    amp * amp
}
