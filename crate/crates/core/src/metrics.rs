//! Harvested energy, achievable rate and the power-splitting ratio at the
//! receiver, all functions of the beamformed objective `(sum sqrt(p) gamma)^2`.

use serde::Serialize;

use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwiptMetrics {
    pub objective: f64,
    pub wet: f64,
    pub wit: f64,
    pub ps_ratio: f64,
    pub conv_eff: f64,
    pub noise_rf: f64,
    pub noise_proc: f64,
}

impl SwiptMetrics {
    pub fn evaluate(objective: f64, rho: f64, xi: f64, sigma2: f64, tau2: f64) -> Result<Self> {
        if !(tau2 > 0.0) {
            return Err(param(format!(
                "processing noise must be positive, got {tau2}"
            )));
        }
        Ok(Self {
            objective,
            wet: wet_energy(objective, rho, xi, sigma2)?,
            wit: wit_rate(objective, rho, sigma2, tau2)?,
            ps_ratio: rho,
            conv_eff: xi,
            noise_rf: sigma2,
            noise_proc: tau2,
        })
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(param(format!("{name} must lie in (0, 1], got {v}")))
    }
}

/// Energy harvested from the `1 - rho` share: `xi (1 - rho) (objective + sigma2)`.
pub fn wet_energy(objective: f64, rho: f64, xi: f64, sigma2: f64) -> Result<f64> {
    check_unit("rho", rho)?;
    check_unit("xi", xi)?;
    if !(sigma2 > 0.0) {
        return Err(param(format!("RF noise must be positive, got {sigma2}")));
    }
    if !(objective >= 0.0) {
        return Err(param(format!(
            "objective must be nonnegative, got {objective}"
        )));
    }
    Ok(xi * (1.0 - rho) * (objective + sigma2))
}

/// Rate in bits/s/Hz: `log2(1 + rho objective / (rho sigma2 + tau2))`.
pub fn wit_rate(objective: f64, rho: f64, sigma2: f64, tau2: f64) -> Result<f64> {
    check_unit("rho", rho)?;
    if !(objective >= 0.0) {
        return Err(param(format!(
            "objective must be nonnegative, got {objective}"
        )));
    }
    let denom = rho * sigma2 + tau2;
    if !(denom > 0.0) {
        return Err(param("noise powers leave a zero denominator"));
    }
    Ok((rho * objective / denom).ln_1p() / std::f64::consts::LN_2)
}

/// Largest splitting ratio that still harvests `q_min`.
pub fn ps_ratio_for_wet(q_min: f64, objective: f64, xi: f64, sigma2: f64) -> Result<f64> {
    check_unit("xi", xi)?;
    if !(q_min >= 0.0) {
        return Err(param(format!("q_min must be nonnegative, got {q_min}")));
    }
    let available = xi * (objective + sigma2);
    let rho = 1.0 - q_min / available;
    if !(rho > 0.0) {
        return Err(Error::InfeasibleWet { q_min, available });
    }
    Ok(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionPoint {
    pub rho: f64,
    pub wit: f64,
    pub wet: f64,
}

/// Samples `rho = k / n_points` for `k = 1..=n_points`.
pub fn rate_energy_curve(
    objective: f64,
    xi: f64,
    sigma2: f64,
    tau2: f64,
    n_points: usize,
) -> Result<Vec<RegionPoint>> {
    if n_points < 2 {
        return Err(param("a rate-energy curve needs at least two points"));
    }
    (1..=n_points)
        .map(|k| {
            let rho = k as f64 / n_points as f64;
            Ok(RegionPoint {
                rho,
                wit: wit_rate(objective, rho, sigma2, tau2)?,
                wet: wet_energy(objective, rho, xi, sigma2)?,
            })
        })
        .collect()
}
