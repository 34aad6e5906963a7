//! Rayleigh channel generation, distributed MRT beamforming and the
//! reduction of each RAU's vector channel to a scalar effective gain.
//!
//! Random draws use ChaCha8 with one stream per purpose: stream 0 carries the
//! RAU distances, stream `i + 1` carries the fading vector of RAU `i`. As a
//! consequence a realization with more RAUs or more antennas extends a
//! smaller one with the same seed instead of reshuffling it, which keeps
//! sweeps over N and M paired.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{param, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    fading: Vec<Vec<Complex64>>,
    distances: Vec<f64>,
    decay_exponent: f64,
    large_scale: Vec<f64>,
}

impl ChannelRealization {
    /// Builds a realization from explicit fading vectors and distances. The
    /// large-scale coefficients are derived as `d^-alpha`.
    pub fn new(fading: Vec<Vec<Complex64>>, distances: Vec<f64>, alpha: f64) -> Result<Self> {
        if fading.is_empty() {
            return Err(param("a realization needs at least one RAU"));
        }
        if fading.len() != distances.len() {
            return Err(param(format!(
                "{} fading vectors but {} distances",
                fading.len(),
                distances.len()
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(param(format!(
                "decay exponent must be positive, got {alpha}"
            )));
        }
        let m = fading[0].len();
        if m == 0 || fading.iter().any(|h| h.len() != m) {
            return Err(param("fading vectors must share a nonzero length"));
        }
        if let Some(d) = distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(param(format!("distances must be positive, got {d}")));
        }
        let large_scale = distances.iter().map(|d| d.powf(-alpha)).collect();
        Ok(Self {
            fading,
            distances,
            decay_exponent: alpha,
            large_scale,
        })
    }

    pub fn n_raus(&self) -> usize {
        self.fading.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.fading[0].len()
    }

    pub fn fading(&self) -> &[Vec<Complex64>] {
        &self.fading
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn decay_exponent(&self) -> f64 {
        self.decay_exponent
    }

    pub fn large_scale(&self) -> &[f64] {
        &self.large_scale
    }

    /// Composite channel `g_i = h_i * sqrt(beta_i)`.
    pub fn composite(&self, rau: usize) -> Vec<Complex64> {
        let scale = self.large_scale[rau].sqrt();
        self.fading[rau].iter().map(|h| h * scale).collect()
    }
}

/// Draws `n_raus` RAUs uniformly in `[dist_low, dist_high]` with i.i.d.
/// unit-variance circularly-symmetric complex Gaussian fading.
pub fn generate_realization(
    n_raus: usize,
    m_antennas: usize,
    dist_low: f64,
    dist_high: f64,
    alpha: f64,
    rng_seed: u64,
) -> Result<ChannelRealization> {
    if n_raus == 0 || m_antennas == 0 {
        return Err(param("RAU and antenna counts must be at least 1"));
    }
    if !(dist_low > 0.0 && dist_low <= dist_high && dist_high.is_finite()) {
        return Err(param(format!(
            "distance range must satisfy 0 < low <= high, got [{dist_low}, {dist_high}]"
        )));
    }

    let base = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut dist_rng = base.clone();
    dist_rng.set_stream(0);
    let spread = Uniform::new_inclusive(dist_low, dist_high).map_err(|e| param(e.to_string()))?;
    let distances: Vec<f64> = (0..n_raus).map(|_| spread.sample(&mut dist_rng)).collect();

    let fading = (0..n_raus)
        .map(|i| {
            let mut rng = base.clone();
            rng.set_stream(i as u64 + 1);
            complex_gaussian_vector(&mut rng, m_antennas)
        })
        .collect();

    ChannelRealization::new(fading, distances, alpha)
}

/// Each entry is `(x + j y)` with `x, y ~ N(0, 1/2)`.
pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<Complex64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * scale, im * scale)
        })
        .collect()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Distributed MRT: `w = g / |g|` with `g = h * sqrt(beta)`.
pub fn dmrt_beamformer(
    fading_vector: &[Complex64],
    large_scale_coeff: f64,
) -> Result<Vec<Complex64>> {
    if !(large_scale_coeff > 0.0 && large_scale_coeff.is_finite()) {
        return Err(param(format!(
            "large-scale coefficient must be positive, got {large_scale_coeff}"
        )));
    }
    let scale = large_scale_coeff.sqrt();
    let g: Vec<Complex64> = fading_vector.iter().map(|h| h * scale).collect();
    let g_norm = norm(&g);
    if !(g_norm > 0.0 && g_norm.is_finite()) {
        return Err(Error::DegenerateChannel(
            "beamformer undefined for a zero channel vector".into(),
        ));
    }
    Ok(g.into_iter().map(|z| z / g_norm).collect())
}

/// Scalar effective gains sorted in descending order.
///
/// `order[k]` is the original RAU index of the `k`-th best gain.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    gains: Vec<f64>,
    order: Vec<usize>,
}

impl EffectiveGains {
    /// Sorts raw per-RAU gains descending. Ties keep ascending original index.
    pub fn from_unsorted(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(param("no gains supplied"));
        }
        if let Some((i, g)) = raw
            .iter()
            .enumerate()
            .find(|(_, g)| !(**g > 0.0 && g.is_finite()))
        {
            return Err(Error::Input {
                path: format!("gains[{i}]"),
                message: format!("gain must be positive and finite, got {g}"),
            });
        }
        let mut order: Vec<usize> = (0..raw.len()).collect();
        // stable sort, so equal gains stay in index order
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
        let gains = order.iter().map(|&i| raw[i]).collect();
        Ok(Self { gains, order })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Reorders per-RAU data given in physical index order into sorted order.
    pub fn to_sorted<T: Clone>(&self, physical: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| physical[i].clone()).collect()
    }

    /// Inverse of [`EffectiveGains::to_sorted`].
    pub fn to_physical<T: Clone>(&self, sorted: &[T]) -> Vec<T> {
        let mut out: Vec<Option<T>> = vec![None; sorted.len()];
        for (pos, &orig) in self.order.iter().enumerate() {
            out[orig] = Some(sorted[pos].clone());
        }
        out.into_iter()
            .map(|v| v.expect("order is a permutation"))
            .collect()
    }
}

/// `gamma_i = d_i^(-alpha/2) * |h_i|`, sorted descending.
pub fn effective_gains(real: &ChannelRealization) -> EffectiveGains {
    let raw: Vec<f64> = real
        .fading
        .iter()
        .zip(&real.distances)
        .map(|(h, d)| d.powf(-real.decay_exponent / 2.0) * norm(h))
        .collect();
    EffectiveGains::from_unsorted(&raw).expect("validated realization yields positive gains")
}

/// `|sum_i sqrt(p_i) w_i^H g_i|` with DMRT beamformers, powers in physical
/// RAU order.
pub fn received_amplitude(real: &ChannelRealization, powers: &[f64]) -> Result<f64> {
    if powers.len() != real.n_raus() {
        return Err(param("one power per RAU required"));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &p) in powers.iter().enumerate() {
        if p < 0.0 {
            return Err(param(format!("negative power {p} at RAU {i}")));
        }
        let w = dmrt_beamformer(&real.fading[i], real.large_scale[i])?;
        let g = real.composite(i);
        let inner: Complex64 = g.iter().zip(&w).map(|(g, w)| g.conj() * w).sum();
        acc += inner * p.sqrt();
    }
    Ok(acc.norm())
}
