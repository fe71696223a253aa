//! Rank estimation from the singular values that clear the noise edge, and
//! estimators of the noise covariance.

use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, Mat, Vector};
use crate::noise::NoiseModel;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sim::{sample_noise, EntryDist};

pub const DEFAULT_RANK_EPS: f64 = 0.05;
pub const DEFAULT_EDGE_TRIALS: usize = 20;

/// Number of singular values of `a` strictly above `threshold`.
pub fn count_above(a: &Mat, threshold: f64) -> Result<usize> {
    let q = a.nrows().min(a.ncols());
    if q == 0 {
        return Ok(0);
    }
    let mut k = q.min(8);
    loop {
        let s = truncated_svd(a, k)?.s;
        let count = s.iter().filter(|&&x| x > threshold).count();
        if count < k || k == q {
            return Ok(count);
        }
        k = (2 * k).min(q);
    }
}

/// Count of whitened singular values above `1 + √γ + eps`.
pub fn estimate_rank_whitened(yw: &Mat, gamma: f64, eps: f64) -> Result<usize> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
    }
    count_above(yw, 1.0 + gamma.sqrt() + eps)
}

/// Mean top singular value of `trials` scaled p×n pure-noise draws.
pub fn noise_edge(noise: &NoiseModel, n: usize, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one Monte-Carlo trial is required".into()));
    }
    let mut total = 0.0;
    for t in 0..trials {
        let mut rng = rng_from_seed(derive_seed(seed, t as u64));
        let e = sample_noise(noise, n, EntryDist::Gaussian, &mut rng)?;
        total += truncated_svd(&e, 1)?.s[0];
    }
    Ok(total / trials as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRankEstimate {
    pub rank: usize,
    /// Estimated largest noise singular value `b₊`.
    pub edge: f64,
}

/// Count of unwhitened singular values above `b₊ + eps`, with `b₊` from
/// Monte-Carlo draws of the noise model.
pub fn estimate_rank_raw(
    y: &Mat,
    noise: &NoiseModel,
    eps: f64,
    mc_trials: usize,
    seed: u64,
) -> Result<RawRankEstimate> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
    }
    if y.nrows() != noise.p() {
        return Err(Error::dims("estimate_rank_raw", noise.p(), y.nrows()));
    }
    let edge = noise_edge(noise, y.ncols(), mc_trials, seed)?;
    Ok(RawRankEstimate { rank: count_above(y, edge + eps)?, edge })
}

#[derive(Debug, Clone)]
pub struct NoiseEstimate {
    pub model: NoiseModel,
    pub warnings: Vec<String>,
}

/// Dense noise model from the sample covariance `(1/n′) Σ ε_j ε_jᵀ` of raw
/// (unscaled) pure-noise columns.
pub fn sample_noise_cov(noise_samples: &Mat) -> Result<NoiseEstimate> {
    let (p, m) = noise_samples.dim();
    if m == 0 {
        return Err(Error::InvalidArgument("no noise samples".into()));
    }
    let cov = noise_samples.dot(&noise_samples.t()) / m as f64;
    let cov = (&cov + &cov.t()) * 0.5;
    let model = NoiseModel::dense(cov)?;
    let mut warnings = Vec::new();
    if m <= p {
        let msg = format!(
            "only {m} noise samples for dimension {p}; the sample covariance is ill-conditioned (condition number {:.3e})",
            model.condition_number()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(NoiseEstimate { model, warnings })
}

/// Per-coordinate variances of `y` (stored with the `1/√n` column scaling)
/// after subtracting each row's mean. Signal energy leaks into the estimate
/// unless the PCs are delocalized.
pub fn diag_noise_var(y: &Mat) -> Result<NoiseModel> {
    let n = y.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let centered = center_rows(y);
    let nu: Vector = centered.rows().into_iter().map(|r| r.dot(&r)).collect();
    NoiseModel::diagonal(nu)
}

/// Subtracts each row's mean.
pub fn center_rows(y: &Mat) -> Mat {
    let means = y.mean_axis(ndarray::Axis(1)).unwrap_or_else(|| Vector::zeros(y.nrows()));
    y - &means.insert_axis(ndarray::Axis(1))
}

/// Divides raw samples by `√n` to the internal convention.
pub fn scale_samples(raw: &Mat) -> Mat {
    raw / (raw.ncols().max(1) as f64).sqrt()
}

/// Inverse of [`scale_samples`].
pub fn unscale_samples(scaled: &Mat) -> Mat {
    scaled * (scaled.ncols().max(1) as f64).sqrt()
}
