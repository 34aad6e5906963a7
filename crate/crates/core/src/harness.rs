//! Instance files, result documents and the Monte-Carlo experiment engine
//! behind the `swipt-das` CLI.
//!
//! # Randomness
//!
//! Every trial owns a ChaCha8 stream: the generator seeded with the
//! experiment seed is switched to stream `trial`, its first output seeds the
//! channel realization, and the following draws are the per-RAU harvest
//! rates. Realizations therefore depend only on `(seed, trial)`, so all
//! policies, power caps and efficiencies see the same channels. Growing N or M
//! extends a realization rather than replacing it.
//!
//! # CSV
//!
//! UTF-8, comma separated, one header row, numbers printed with 12
//! significant digits and a `.` decimal point.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::{optimal_allocation, Allocation, Instance, RauClass, Scenario};
use crate::audit::{audit_allocation, audit_feasible, Violation};
use crate::baselines::{greedy_allocation, waterfilling_allocation};
use crate::channel::{effective_gains, generate_realization, EffectiveGains};
use crate::error::{Error, Result};
use crate::metrics::{rate_energy_curve, wet_energy, wit_rate, RegionPoint};
use crate::oracle::{oracle_ascent, oracle_grid_search, GRID_MAX_RAUS};
use crate::par::Execution;

/// Environment variable read by the CLI as the default `--seed`.
pub const SEED_ENV: &str = "SWIPT_DAS_SEED";
/// Sweeps whose estimated work exceeds this many RAU-solves are refused.
pub const MAX_SWEEP_WORK: f64 = 2e10;
/// An oracle "beats" the allocator only if it is better by more than this,
/// relative to `max(1, objective)`.
pub const ORACLE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub m: usize,
    pub dist_low: f64,
    pub dist_high: f64,
    pub alpha: f64,
    pub seed: u64,
}

/// On-disk instance. Exactly one of `gains` and `channel` must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    pub harvest: Vec<f64>,
    pub p_max: f64,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
}

/// A validated instance together with the permutation back to file order.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: Instance,
    pub sorted: EffectiveGains,
}

fn input_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Input {
        path: path.into(),
        message: message.into(),
    }
}

pub(crate) fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        input_err(path, e.into_inner().to_string())
    })
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn into_instance(self) -> Result<LoadedInstance> {
        let n = self.harvest.len();
        if n == 0 {
            return Err(input_err("harvest", "at least one RAU is required"));
        }
        if let Some((i, e)) = self.harvest.iter().enumerate().find(|(_, e)| !(**e >= 0.0)) {
            return Err(input_err(
                format!("harvest[{i}]"),
                format!("must be nonnegative, got {e}"),
            ));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(input_err(
                "p_max",
                format!("must be positive, got {}", self.p_max),
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(input_err(
                "eta",
                format!("must lie in (0, 1], got {}", self.eta),
            ));
        }
        let sorted = match (self.gains, self.channel) {
            (Some(g), None) => {
                if g.len() != n {
                    return Err(input_err(
                        "gains",
                        format!("{} gains for {n} harvest rates", g.len()),
                    ));
                }
                EffectiveGains::from_unsorted(&g)?
            }
            (None, Some(c)) => {
                let real = generate_realization(n, c.m, c.dist_low, c.dist_high, c.alpha, c.seed)
                    .map_err(|e| input_err("channel", e.to_string()))?;
                effective_gains(&real)
            }
            (Some(_), Some(_)) => {
                return Err(input_err(
                    "gains",
                    "give either `gains` or `channel`, not both",
                ))
            }
            (None, None) => {
                return Err(input_err(
                    "gains",
                    "one of `gains` or `channel` is required",
                ))
            }
        };
        let instance = Instance::new(
            sorted.gains().to_vec(),
            sorted.to_sorted(&self.harvest),
            self.p_max,
            self.eta,
        )?;
        Ok(LoadedInstance { instance, sorted })
    }
}

/// Solver output in the RAU order of the input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub scenario: Scenario,
    pub powers: Vec<f64>,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub states: Vec<f64>,
    pub sum_state: f64,
    pub kappa_g: Option<f64>,
    pub kappa_l: Option<f64>,
    pub classification: Vec<RauClass>,
    pub objective: f64,
    pub gains: Vec<f64>,
}

impl ResultDocument {
    pub fn new(loaded: &LoadedInstance, alloc: &Allocation) -> Self {
        let back = |v: &[f64]| loaded.sorted.to_physical(v);
        Self {
            scenario: alloc.scenario,
            powers: back(&alloc.powers),
            charge: back(&alloc.trade.charge),
            discharge: back(&alloc.trade.discharge),
            states: back(&alloc.trade.states),
            sum_state: alloc.sum_state(),
            kappa_g: alloc.kappa_g,
            kappa_l: alloc.kappa_l,
            classification: loaded.sorted.to_physical(&alloc.classification),
            objective: alloc.objective,
            gains: back(loaded.instance.gains()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Loads an instance file. `seed` replaces the channel seed of generative
/// instances and is ignored when gains are given directly.
pub fn load_instance(path: &Path, seed: Option<u64>) -> Result<LoadedInstance> {
    let mut file = InstanceFile::load(path)?;
    if let (Some(seed), Some(channel)) = (seed, file.channel.as_mut()) {
        channel.seed = seed;
    }
    file.into_instance()
}

pub fn run_solve(instance_file: &Path, seed: Option<u64>) -> Result<ResultDocument> {
    let loaded = load_instance(instance_file, seed)?;
    let alloc = optimal_allocation(&loaded.instance);
    Ok(ResultDocument::new(&loaded, &alloc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Optimal,
    Greedy,
    Waterfilling,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Optimal => "optimal",
            Policy::Greedy => "greedy",
            Policy::Waterfilling => "waterfilling",
        }
    }

    pub fn allocate(self, inst: &Instance) -> Allocation {
        match self {
            Policy::Optimal => optimal_allocation(inst),
            Policy::Greedy => greedy_allocation(inst),
            Policy::Waterfilling => waterfilling_allocation(inst),
        }
    }
}

/// Monte-Carlo experiment description. Missing fields take the simulation
/// settings used throughout: `alpha = 2`, distances in `[10, 50]`, harvest in
/// `[1, 8]`, `p_max = 5`, `eta = 0.8`, `M = 4`, 1000 trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub p_max_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    pub trials: usize,
    pub harvest_low: f64,
    pub harvest_high: f64,
    pub dist_low: f64,
    pub dist_high: f64,
    pub alpha: f64,
    pub seed: u64,
    pub policies: Vec<Policy>,
    /// Splitting ratio at which the mean WIT/WET columns are evaluated.
    pub rho: f64,
    pub xi: f64,
    pub sigma2: f64,
    pub tau2: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_values: vec![2, 4, 8, 16, 32],
            m_values: vec![4],
            p_max_values: vec![5.0],
            eta_values: vec![0.8],
            trials: 1000,
            harvest_low: 1.0,
            harvest_high: 8.0,
            dist_low: 10.0,
            dist_high: 50.0,
            alpha: 2.0,
            seed: 2024,
            policies: vec![Policy::Optimal],
            rho: 0.5,
            xi: 0.5,
            sigma2: 1.0,
            tau2: 1.0,
        }
    }
}

/// One (N, M, p_max, eta) grid point of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub m: usize,
    pub p_max: f64,
    pub eta: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: String| Err(input_err(path, msg));
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n_values", "needs at least one positive RAU count".into());
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return bad(
                "m_values",
                "needs at least one positive antenna count".into(),
            );
        }
        if self.p_max_values.is_empty()
            || self
                .p_max_values
                .iter()
                .any(|p| !(*p > 0.0 && p.is_finite()))
        {
            return bad("p_max_values", "needs positive power caps".into());
        }
        if self.eta_values.is_empty() || self.eta_values.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad("eta_values", "efficiencies must lie in (0, 1]".into());
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if !(self.harvest_low >= 0.0
            && self.harvest_low <= self.harvest_high
            && self.harvest_high.is_finite())
        {
            return bad(
                "harvest_low",
                format!(
                    "harvest range must satisfy 0 <= low <= high, got [{}, {}]",
                    self.harvest_low, self.harvest_high
                ),
            );
        }
        if !(self.dist_low > 0.0 && self.dist_low <= self.dist_high && self.dist_high.is_finite()) {
            return bad(
                "dist_low",
                format!(
                    "distance range must satisfy 0 < low <= high, got [{}, {}]",
                    self.dist_low, self.dist_high
                ),
            );
        }
        if !(self.alpha > 0.0) {
            return bad("alpha", format!("must be positive, got {}", self.alpha));
        }
        if self.policies.is_empty() {
            return bad("policies", "select at least one policy".into());
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho", format!("must lie in (0, 1], got {}", self.rho));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return bad("xi", format!("must lie in (0, 1], got {}", self.xi));
        }
        if !(self.sigma2 > 0.0) || !(self.tau2 > 0.0) {
            return bad("sigma2", "noise powers must be positive".into());
        }
        Ok(())
    }

    /// Grid points in output order: N outermost, then M, p_max, eta.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &m in &self.m_values {
                for &p_max in &self.p_max_values {
                    for &eta in &self.eta_values {
                        out.push(SweepPoint { n, m, p_max, eta });
                    }
                }
            }
        }
        out
    }

    /// Estimated RAU-solves, `sum over points of trials * policies * N`.
    pub fn estimated_work(&self) -> f64 {
        self.points()
            .iter()
            .map(|p| p.n as f64 * self.trials as f64 * self.policies.len() as f64)
            .sum()
    }

    fn check_budget(&self) -> Result<()> {
        let work = self.estimated_work();
        if work > MAX_SWEEP_WORK {
            return Err(Error::Capacity(format!(
                "experiment needs about {work:.3e} RAU-solves, limit is {MAX_SWEEP_WORK:.1e}"
            )));
        }
        Ok(())
    }
}

/// Draws the gains (sorted) and harvest rates (in sorted order) of one trial.
pub fn trial_realization(
    cfg: &ExperimentConfig,
    n: usize,
    m: usize,
    trial: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let channel_seed = rng.next_u64();
    let harvest: Vec<f64> = (0..n)
        .map(|_| {
            if cfg.harvest_high > cfg.harvest_low {
                rng.random_range(cfg.harvest_low..=cfg.harvest_high)
            } else {
                cfg.harvest_low
            }
        })
        .collect();
    let real = generate_realization(n, m, cfg.dist_low, cfg.dist_high, cfg.alpha, channel_seed)?;
    let sorted = effective_gains(&real);
    let harvest = sorted.to_sorted(&harvest);
    Ok((sorted.gains().to_vec(), harvest))
}

pub fn trial_instance(cfg: &ExperimentConfig, point: SweepPoint, trial: usize) -> Result<Instance> {
    let (gains, harvest) = trial_realization(cfg, point.n, point.m, trial)?;
    Instance::new(gains, harvest, point.p_max, point.eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub objective: f64,
    pub wit: f64,
    pub wet: f64,
}

fn outcome(cfg: &ExperimentConfig, objective: f64) -> Result<TrialOutcome> {
    Ok(TrialOutcome {
        objective,
        wit: wit_rate(objective, cfg.rho, cfg.sigma2, cfg.tau2)?,
        wet: wet_energy(objective, cfg.rho, cfg.xi, cfg.sigma2)?,
    })
}

/// Runs every policy on every trial of one grid point. The outer vector is
/// indexed by trial, the inner one follows `policies`.
pub fn evaluate_point(
    cfg: &ExperimentConfig,
    point: SweepPoint,
    policies: &[Policy],
    exec: Execution,
) -> Result<Vec<Vec<TrialOutcome>>> {
    exec.map_indices(cfg.trials, |t| {
        let inst = trial_instance(cfg, point, t)?;
        policies
            .iter()
            .map(|p| outcome(cfg, p.allocate(&inst).objective))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub n: usize,
    pub m: usize,
    pub p_max: f64,
    pub eta: f64,
    pub policy: Policy,
    pub mean_objective: f64,
    pub mean_wit: f64,
    pub mean_wet: f64,
    pub trials: usize,
    pub seed: u64,
}

pub const SWEEP_HEADER: [&str; 10] = [
    "n",
    "m",
    "p_max",
    "eta",
    "policy",
    "mean_objective",
    "mean_wit",
    "mean_wet",
    "trials",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRecord {
    pub sweep: SweepRecord,
    /// Trials in which this policy beat the optimal one beyond rounding.
    pub dominance_violations: usize,
}

pub const COMPARE_HEADER: [&str; 11] = [
    "n",
    "m",
    "p_max",
    "eta",
    "policy",
    "mean_objective",
    "mean_wit",
    "mean_wet",
    "dominance_violations",
    "trials",
    "seed",
];

fn mean_of(outcomes: &[Vec<TrialOutcome>], col: usize, f: impl Fn(&TrialOutcome) -> f64) -> f64 {
    // sequential sum in trial order, so the result does not depend on threads
    outcomes.iter().map(|row| f(&row[col])).sum::<f64>() / outcomes.len() as f64
}

fn record(
    cfg: &ExperimentConfig,
    point: SweepPoint,
    policy: Policy,
    outcomes: &[Vec<TrialOutcome>],
    col: usize,
) -> SweepRecord {
    SweepRecord {
        n: point.n,
        m: point.m,
        p_max: point.p_max,
        eta: point.eta,
        policy,
        mean_objective: mean_of(outcomes, col, |o| o.objective),
        mean_wit: mean_of(outcomes, col, |o| o.wit),
        mean_wet: mean_of(outcomes, col, |o| o.wet),
        trials: cfg.trials,
        seed: cfg.seed,
    }
}

pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    cfg.check_budget()?;
    let mut out = Vec::new();
    for point in cfg.points() {
        let outcomes = evaluate_point(cfg, point, &cfg.policies, exec)?;
        for (col, &policy) in cfg.policies.iter().enumerate() {
            out.push(record(cfg, point, policy, &outcomes, col));
        }
    }
    Ok(out)
}

/// Paired comparison: every policy sees the same realizations, and each is
/// checked trial by trial against the optimal allocation.
pub fn run_compare(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<CompareRecord>> {
    cfg.validate()?;
    if cfg.policies.len() < 2 {
        return Err(input_err(
            "policies",
            "comparison needs at least two policies",
        ));
    }
    cfg.check_budget()?;
    let mut policies = cfg.policies.clone();
    let opt_col = match policies.iter().position(|&p| p == Policy::Optimal) {
        Some(i) => i,
        None => {
            policies.push(Policy::Optimal);
            policies.len() - 1
        }
    };
    let mut out = Vec::new();
    for point in cfg.points() {
        let outcomes = evaluate_point(cfg, point, &policies, exec)?;
        for (col, &policy) in cfg.policies.iter().enumerate() {
            let dominance_violations = outcomes
                .iter()
                .filter(|row| {
                    let best = row[opt_col].objective;
                    row[col].objective > best + 1e-9 * (1.0 + best)
                })
                .count();
            out.push(CompareRecord {
                sweep: record(cfg, point, policy, &outcomes, col),
                dominance_violations,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOptions {
    pub xi: f64,
    pub sigma2: f64,
    pub tau2: f64,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            xi: 0.5,
            sigma2: 1.0,
            tau2: 1.0,
        }
    }
}

/// Solves the instance once and samples the rate-energy trade-off.
pub fn run_region(
    instance_file: &Path,
    seed: Option<u64>,
    n_points: usize,
    opts: RegionOptions,
) -> Result<(f64, Vec<RegionPoint>)> {
    let loaded = load_instance(instance_file, seed)?;
    let alloc = optimal_allocation(&loaded.instance);
    let curve = rate_energy_curve(alloc.objective, opts.xi, opts.sigma2, opts.tau2, n_points)?;
    Ok((alloc.objective, curve))
}

/// Oracle settings for [`run_verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub grid_steps: usize,
    pub ascent_tol: f64,
    /// Largest tolerated relative gap `|oracle - allocator| / max(1, allocator)`.
    pub max_gap: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            grid_steps: 21,
            ascent_tol: 1e-12,
            max_gap: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceCheck {
    pub violations: Vec<Violation>,
    pub grid_gap: Option<f64>,
    pub ascent_gap: Option<f64>,
    pub ascent_converged: bool,
    pub oracle_beats_allocator: bool,
    pub closed_form_error: Option<f64>,
}

fn relative_gap(oracle: f64, allocator: f64) -> f64 {
    (oracle - allocator) / allocator.max(1.0)
}

/// Powers and objective predicted in closed form when `eta = 1` and no RAU
/// is capped: `p_k = gamma_k^2 * sum(E) / sum(gamma^2)`.
pub fn unit_efficiency_closed_form(inst: &Instance) -> (Vec<f64>, f64) {
    let g2: f64 = inst.gains().iter().map(|g| g * g).sum();
    let total = inst.total_harvest();
    let powers = inst.gains().iter().map(|g| g * g * total / g2).collect();
    (powers, g2 * total)
}

/// Solves one instance and checks it against both oracles and the
/// structural audit.
pub fn check_instance(
    inst: &Instance,
    opts: VerifyOptions,
    with_ascent: bool,
) -> Result<InstanceCheck> {
    let alloc = optimal_allocation(inst);
    let mut violations = audit_allocation(inst, &alloc);
    let slack = ORACLE_SLACK * alloc.objective.max(1.0);
    let mut beaten = false;

    let grid_gap = if inst.len() <= GRID_MAX_RAUS {
        let g = oracle_grid_search(inst, opts.grid_steps)?;
        beaten |= g.objective > alloc.objective + slack;
        Some(relative_gap(g.objective, alloc.objective))
    } else {
        None
    };
    let (ascent_gap, ascent_converged) = if with_ascent {
        let a = oracle_ascent(inst, opts.ascent_tol)?;
        beaten |= a.objective > alloc.objective + slack;
        (
            Some(relative_gap(a.objective, alloc.objective)),
            a.converged,
        )
    } else {
        (None, true)
    };

    let closed_form_error = if inst.eta() == 1.0 {
        let (powers, objective) = unit_efficiency_closed_form(inst);
        if powers.iter().all(|&p| p < inst.p_max()) && alloc.scenario == Scenario::Neutral {
            let mut err = ((alloc.objective - objective) / objective.max(f64::MIN_POSITIVE)).abs();
            for (a, b) in alloc.powers.iter().zip(&powers) {
                err = err.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
            }
            Some(err)
        } else {
            None
        }
    } else {
        None
    };
    if let Some(err) = closed_form_error {
        if err > 1e-9 {
            violations.push(Violation {
                rule: crate::audit::Rule::ThresholdRatio,
                rau: None,
                detail: format!("unit-efficiency closed form off by {err:e}"),
            });
        }
    }

    Ok(InstanceCheck {
        violations,
        grid_gap,
        ascent_gap,
        ascent_converged,
        oracle_beats_allocator: beaten,
        closed_form_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub grid_checked: usize,
    pub ascent_checked: usize,
    pub max_grid_gap: f64,
    pub max_ascent_gap: f64,
    pub closed_form_checked: usize,
    pub max_closed_form_error: f64,
    pub full_power_instances: usize,
    pub oracle_wins: usize,
    pub unconverged_ascent: usize,
    pub baseline_violations: usize,
    pub violation_count: usize,
    /// First few violations, for diagnosis.
    pub violations: Vec<String>,
    pub passed: bool,
}

pub fn run_verify(
    cfg: &ExperimentConfig,
    opts: VerifyOptions,
    exec: Execution,
) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut report = VerifyReport {
        instances: 0,
        grid_checked: 0,
        ascent_checked: 0,
        max_grid_gap: 0.0,
        max_ascent_gap: 0.0,
        closed_form_checked: 0,
        max_closed_form_error: 0.0,
        full_power_instances: 0,
        oracle_wins: 0,
        unconverged_ascent: 0,
        baseline_violations: 0,
        violation_count: 0,
        violations: Vec::new(),
        passed: true,
    };
    for point in cfg.points() {
        let checks: Vec<Result<(InstanceCheck, bool, usize)>> = exec.map_indices(cfg.trials, |t| {
            let inst = trial_instance(cfg, point, t)?;
            let check = check_instance(&inst, opts, true)?;
            let full = crate::allocator::profitable_full_power_test(&inst);
            let baseline_bad = [greedy_allocation(&inst), waterfilling_allocation(&inst)]
                .iter()
                .filter(|a| !audit_feasible(&inst, a).is_empty())
                .count();
            Ok((check, full, baseline_bad))
        });
        for c in checks {
            let (check, full, baseline_bad) = c?;
            report.instances += 1;
            report.full_power_instances += usize::from(full);
            report.baseline_violations += baseline_bad;
            if let Some(g) = check.grid_gap {
                report.grid_checked += 1;
                report.max_grid_gap = report.max_grid_gap.max(g.abs());
            }
            if let Some(g) = check.ascent_gap {
                report.ascent_checked += 1;
                report.max_ascent_gap = report.max_ascent_gap.max(g.abs());
            }
            if let Some(e) = check.closed_form_error {
                report.closed_form_checked += 1;
                report.max_closed_form_error = report.max_closed_form_error.max(e);
            }
            report.oracle_wins += usize::from(check.oracle_beats_allocator);
            report.unconverged_ascent += usize::from(!check.ascent_converged);
            report.violation_count += check.violations.len();
            for v in check.violations {
                if report.violations.len() < 20 {
                    report
                        .violations
                        .push(format!("n={} eta={}: {v}", point.n, point.eta));
                }
            }
        }
    }
    report.passed = report.violation_count == 0
        && report.oracle_wins == 0
        && report.baseline_violations == 0
        && report.max_grid_gap <= opts.max_gap
        && report.max_ascent_gap <= opts.max_gap;
    Ok(report)
}

/// Formats `x` with 12 significant digits, fixed notation for moderate
/// magnitudes and scientific otherwise. Trailing zeros are dropped.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn sweep_fields(r: &SweepRecord) -> Vec<String> {
    vec![
        r.n.to_string(),
        r.m.to_string(),
        format_number(r.p_max),
        format_number(r.eta),
        r.policy.name().to_string(),
        format_number(r.mean_objective),
        format_number(r.mean_wit),
        format_number(r.mean_wet),
    ]
}

pub fn write_sweep_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        let mut row = sweep_fields(r);
        row.push(r.trials.to_string());
        row.push(r.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_compare_csv<W: Write>(out: W, records: &[CompareRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARE_HEADER)?;
    for r in records {
        let mut row = sweep_fields(&r.sweep);
        row.push(r.dominance_violations.to_string());
        row.push(r.sweep.trials.to_string());
        row.push(r.sweep.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub const REGION_HEADER: [&str; 3] = ["rho", "wit", "wet"];

pub fn write_region_csv<W: Write>(out: W, curve: &[RegionPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGION_HEADER)?;
    for p in curve {
        w.write_record([
            format_number(p.rho),
            format_number(p.wit),
            format_number(p.wet),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn csv_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}
