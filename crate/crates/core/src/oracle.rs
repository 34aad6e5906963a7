//! Independent solvers for the reduced allocation problem, used to check the
//! allocator. Neither uses the threshold structure: the grid search
//! enumerates power vectors, and the ascent runs projected gradient steps on
//! the convex reformulation in amplitudes `x = sqrt(p)`.

use serde::Serialize;

use crate::allocator::Instance;
use crate::error::{param, Error, Result};
use crate::par::Execution;

/// Largest RAU count the grid search accepts.
pub const GRID_MAX_RAUS: usize = 4;
/// Balance slack a grid point may use and still count as feasible.
pub const GRID_FEASIBILITY_SLACK: f64 = 1e-9;
const REFINE_PASSES: usize = 6;
const REFINE_MAX_SWEEPS: usize = 100_000;
const ASCENT_WINDOW: usize = 50;
const ASCENT_MAX_ITERS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OracleMethod {
    GridSearch,
    ProjectedAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub powers: Vec<f64>,
    pub objective: f64,
    pub method: OracleMethod,
    /// Final refinement step for the grid, stopping tolerance for the ascent.
    pub resolution: f64,
    pub converged: bool,
}

fn amplitude(powers: &[f64], gains: &[f64]) -> f64 {
    powers.iter().zip(gains).map(|(p, g)| p.sqrt() * g).sum()
}

fn state(e: f64, p: f64, eta: f64) -> f64 {
    if p <= e {
        eta * (e - p)
    } else {
        (e - p) / eta
    }
}

fn total_state(inst: &Instance, powers: &[f64]) -> f64 {
    powers
        .iter()
        .zip(inst.harvest())
        .map(|(&p, &e)| state(e, p, inst.eta()))
        .sum()
}

/// Power at which RAU with harvest `e` has trade state `target`.
fn power_for_state(e: f64, target: f64, eta: f64) -> f64 {
    if target >= 0.0 {
        e - target / eta
    } else {
        e - target * eta
    }
}

/// Exhaustive search on `{0, h, ..., p_max}^N` followed by local refinement.
pub fn oracle_grid_search(inst: &Instance, steps_per_axis: usize) -> Result<OracleResult> {
    oracle_grid_search_with(inst, steps_per_axis, Execution::default())
}

pub fn oracle_grid_search_with(
    inst: &Instance,
    steps_per_axis: usize,
    exec: Execution,
) -> Result<OracleResult> {
    let n = inst.len();
    if n > GRID_MAX_RAUS {
        return Err(Error::Capacity(format!(
            "grid search handles at most {GRID_MAX_RAUS} RAUs, got {n}"
        )));
    }
    if steps_per_axis < 11 {
        return Err(param(format!(
            "grid needs at least 11 steps per axis, got {steps_per_axis}"
        )));
    }
    let step = inst.p_max() / (steps_per_axis - 1) as f64;
    let gains = inst.gains();
    let inner: usize = steps_per_axis.pow(n as u32 - 1);

    // one chunk per value of the first coordinate
    let chunk_best = exec.map_indices(steps_per_axis, |first| {
        let mut powers = vec![0.0; n];
        let mut best: Option<(f64, Vec<f64>)> = None;
        for idx in 0..inner {
            powers[0] = first as f64 * step;
            let mut rest = idx;
            for p in powers.iter_mut().skip(1) {
                *p = (rest % steps_per_axis) as f64 * step;
                rest /= steps_per_axis;
            }
            if total_state(inst, &powers) < -GRID_FEASIBILITY_SLACK {
                continue;
            }
            let f = amplitude(&powers, gains);
            if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
                best = Some((f, powers.clone()));
            }
        }
        best
    });

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (f, p) in chunk_best.into_iter().flatten() {
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, p));
        }
    }
    // the all-zero point is always feasible
    let (_, start) = best.expect("origin is feasible");
    let (powers, resolution) = refine(inst, start, step);
    let amp = amplitude(&powers, gains);
    Ok(OracleResult {
        powers,
        objective: amp * amp,
        method: OracleMethod::GridSearch,
        resolution,
        converged: true,
    })
}

/// Coordinate search at successively finer steps. A move that breaks the
/// balance is paired with the exact reduction of one other RAU's power that
/// restores it.
fn refine(inst: &Instance, mut powers: Vec<f64>, grid_step: f64) -> (Vec<f64>, f64) {
    let n = inst.len();
    let p_max = inst.p_max();
    let eta = inst.eta();
    let gains = inst.gains();
    let harvest = inst.harvest();
    let mut h = grid_step;
    let mut f = amplitude(&powers, gains);

    for _ in 0..REFINE_PASSES {
        h /= 10.0;
        for _ in 0..REFINE_MAX_SWEEPS {
            let mut improved = false;
            for i in 0..n {
                for dir in [1.0, -1.0] {
                    let moved = (powers[i] + dir * h).clamp(0.0, p_max);
                    if moved == powers[i] {
                        continue;
                    }
                    let mut cand = powers.clone();
                    cand[i] = moved;
                    let s = total_state(inst, &cand);
                    let mut best_move: Option<(f64, Vec<f64>)> = None;
                    if s >= -GRID_FEASIBILITY_SLACK {
                        let fc = amplitude(&cand, gains);
                        if fc > f {
                            best_move = Some((fc, cand.clone()));
                        }
                    } else {
                        for j in (0..n).filter(|&j| j != i) {
                            let target = state(harvest[j], cand[j], eta) - s;
                            if target > eta * harvest[j] {
                                continue;
                            }
                            let mut pair = cand.clone();
                            pair[j] = power_for_state(harvest[j], target, eta).clamp(0.0, p_max);
                            if total_state(inst, &pair) < -GRID_FEASIBILITY_SLACK {
                                continue;
                            }
                            let fp = amplitude(&pair, gains);
                            if fp > f && best_move.as_ref().is_none_or(|(bf, _)| fp > *bf) {
                                best_move = Some((fp, pair));
                            }
                        }
                    }
                    if let Some((fc, cand)) = best_move {
                        f = fc;
                        powers = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    (powers, h)
}

fn prox_amplitude(y: f64, e: f64, lambda: f64, eta: f64, cap: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let below = y / (1.0 + 2.0 * lambda * eta);
    let x = if below * below <= e {
        below
    } else {
        let above = y / (1.0 + 2.0 * lambda / eta);
        if above * above >= e {
            above
        } else {
            e.sqrt()
        }
    };
    x.min(cap)
}

fn amplitude_state(inst: &Instance, x: &[f64]) -> f64 {
    x.iter()
        .zip(inst.harvest())
        .map(|(&x, &e)| state(e, x * x, inst.eta()))
        .sum()
}

/// Euclidean projection onto `{x in [0, sqrt(p_max)]^N : sum S(x^2) >= 0}`.
///
/// The feasible set is convex because each `S(x^2)` is concave. The
/// projection is separable for a fixed multiplier, and the balance of the
/// projected point is nondecreasing in the multiplier, so it is found by
/// bisection.
fn project(inst: &Instance, y: &[f64]) -> Vec<f64> {
    let eta = inst.eta();
    let cap = inst.p_max().sqrt();
    let at = |lambda: f64| -> Vec<f64> {
        y.iter()
            .zip(inst.harvest())
            .map(|(&y, &e)| prox_amplitude(y, e, lambda, eta, cap))
            .collect()
    };
    let x0 = at(0.0);
    if amplitude_state(inst, &x0) >= 0.0 {
        return x0;
    }
    let mut hi = 1.0;
    while amplitude_state(inst, &at(hi)) < 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return vec![0.0; y.len()];
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if amplitude_state(inst, &at(mid)) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi) {
            break;
        }
    }
    at(hi)
}

/// Projected gradient ascent on `sum gamma_k x_k` over the convex feasible
/// set in amplitudes, started from `p = min(E, p_max)`.
///
/// Stops once the objective changes by less than `tol` (relative) across
/// 50 iterations. Hitting the iteration cap returns the best iterate with
/// `converged = false`.
pub fn oracle_ascent(inst: &Instance, tol: f64) -> Result<OracleResult> {
    if !(tol > 0.0) {
        return Err(param(format!("tolerance must be positive, got {tol}")));
    }
    let gains = inst.gains();
    let mut x: Vec<f64> = inst
        .harvest()
        .iter()
        .map(|&e| e.min(inst.p_max()).sqrt())
        .collect();
    let value = |x: &[f64]| -> f64 { x.iter().zip(gains).map(|(x, g)| x * g).sum() };

    let max_gain = gains[0];
    let base_step = 10.0 * inst.p_max().sqrt() / max_gain;
    let mut history = vec![value(&x)];
    let mut best = (history[0], x.clone());
    let mut converged = false;

    for t in 0..ASCENT_MAX_ITERS {
        let step = base_step / (1.0 + t as f64 / 1000.0).sqrt();
        let y: Vec<f64> = x.iter().zip(gains).map(|(x, g)| x + step * g).collect();
        x = project(inst, &y);
        let f = value(&x);
        if f > best.0 {
            best = (f, x.clone());
        }
        history.push(f);
        if history.len() > ASCENT_WINDOW {
            let old = history[history.len() - 1 - ASCENT_WINDOW];
            if (f - old).abs() <= tol * f.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }

    let (amp, x) = best;
    Ok(OracleResult {
        powers: x.iter().map(|x| x * x).collect(),
        objective: amp * amp,
        method: OracleMethod::ProjectedAscent,
        resolution: tol,
        converged,
    })
}
