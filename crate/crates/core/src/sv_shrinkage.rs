//! Singular value shrinkage with whitening: whiten, replace each top singular
//! value of `Y^w` by `t_k`, unwhiten.

use ndarray::Axis;

use crate::error::Result;
use crate::linalg::{Mat, Vector};
use crate::noise::NoiseModel;
use crate::spectral_params::{fit_whitened, ComponentEstimate, ModelAggregates, WhitenedSpectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SvShrinker {
    /// Frobenius-optimal after unwhitening.
    Optimal,
    /// White-noise optimal value `√ℓ^w c^w c̃`, ignoring the unwhitening.
    Naive,
    /// The population value `√ℓ^w`.
    Population,
    /// Keeps the observed singular value above the bulk edge.
    HardThreshold,
}

impl SvShrinker {
    pub const ALL: [SvShrinker; 4] =
        [SvShrinker::Optimal, SvShrinker::Naive, SvShrinker::Population, SvShrinker::HardThreshold];

    pub fn name(&self) -> &'static str {
        match self {
            SvShrinker::Optimal => "optimal",
            SvShrinker::Naive => "naive",
            SvShrinker::Population => "population",
            SvShrinker::HardThreshold => "hard-threshold",
        }
    }

    pub fn t(&self, comp: &ComponentEstimate, agg: &ModelAggregates) -> f64 {
        match self {
            SvShrinker::Optimal => optimal_t(comp, agg),
            SvShrinker::Naive => naive_t(comp),
            SvShrinker::Population => population_t(comp),
            SvShrinker::HardThreshold => {
                if comp.above_threshold {
                    comp.sigma_w
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for SvShrinker {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        SvShrinker::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown shrinker `{s}`")))
    }
}

pub fn optimal_t(comp: &ComponentEstimate, agg: &ModelAggregates) -> f64 {
    if !comp.above_threshold {
        return 0.0;
    }
    comp.ell_w.sqrt() * comp.c_w * comp.c_tilde / comp.unwhitening_factor(agg.mu_eps)
}

pub fn naive_t(comp: &ComponentEstimate) -> f64 {
    if !comp.above_threshold {
        return 0.0;
    }
    comp.ell_w.sqrt() * comp.c_w * comp.c_tilde
}

pub fn population_t(comp: &ComponentEstimate) -> f64 {
    if !comp.above_threshold {
        return 0.0;
    }
    comp.ell_w.sqrt()
}

#[derive(Debug, Clone)]
pub struct ShrinkageResult {
    pub xhat: Mat,
    /// Whitened-domain singular values after shrinkage.
    pub t: Vec<f64>,
    pub components: Vec<ComponentEstimate>,
    pub amse_estimate: f64,
    pub warnings: Vec<String>,
}

/// `Σ_above ℓ̄ (1 − (c c̃)²)`, the asymptotic error of the optimal shrinker.
pub fn amse_in_sample(components: &[ComponentEstimate]) -> f64 {
    components
        .iter()
        .filter(|c| c.above_threshold)
        .map(|c| {
            let cc = c.c * c.c_tilde;
            c.ell * (1.0 - cc * cc)
        })
        .sum()
}

/// Asymptotic error of arbitrary whitened-domain values `t`. After
/// unwhitening, `t_k` acts as the singular value `t_k ‖W⁻¹û_k^w‖` along a
/// unit vector with cosine `c_k` to the truth.
pub fn amse_for_values(components: &[ComponentEstimate], t: &[f64], agg: &ModelAggregates) -> f64 {
    components
        .iter()
        .zip(t)
        .filter(|(c, _)| c.above_threshold)
        .map(|(c, &t)| {
            let norm_sq = c.c_w * c.c_w / c.tau + c.s_w * c.s_w * agg.mu_eps;
            let tt = t * norm_sq.sqrt();
            tt * tt + c.ell - 2.0 * c.ell.sqrt() * c.c * c.c_tilde * tt
        })
        .sum()
}

pub(crate) fn rank_warnings(components: &[ComponentEstimate]) -> Vec<String> {
    let mut warnings = Vec::new();
    let below = components.iter().filter(|c| !c.above_threshold).count();
    if below > 0 {
        warnings.push(format!(
            "{below} of {} requested components did not clear the bulk edge and were set to zero",
            components.len()
        ));
    }
    let demoted = components.iter().filter(|c| c.demoted).count();
    if demoted > 0 {
        warnings.push(format!("{demoted} components were dropped because tau could not be estimated"));
    }
    warnings
}

/// `W⁻¹ Σ t_k û_k^w (v̂_k^w)ᵀ` from a fitted spectrum.
pub fn reconstruct(spec: &WhitenedSpectrum, t: &[f64], noise: &NoiseModel) -> Result<Mat> {
    let tv = Vector::from(t.to_vec());
    let left = noise.unwhiten(&(&spec.svd.u * &tv.insert_axis(Axis(0))))?;
    Ok(left.dot(&spec.svd.v.t()))
}

pub fn shrink_fitted(
    spec: &WhitenedSpectrum,
    noise: &NoiseModel,
    shrinker: SvShrinker,
) -> Result<ShrinkageResult> {
    let t: Vec<f64> = spec.components.iter().map(|c| shrinker.t(c, &spec.agg)).collect();
    let xhat = reconstruct(spec, &t, noise)?;
    let amse_estimate = match shrinker {
        SvShrinker::Optimal => amse_in_sample(&spec.components),
        _ => amse_for_values(&spec.components, &t, &spec.agg),
    };
    let warnings = rank_warnings(&spec.components);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ShrinkageResult { xhat, t, components: spec.components.clone(), amse_estimate, warnings })
}

/// Whitens `y`, shrinks its top `r` singular values, and unwhitens.
pub fn shrink_predict(
    y: &Mat,
    noise: &NoiseModel,
    r: usize,
    shrinker: SvShrinker,
) -> Result<ShrinkageResult> {
    let spec = fit_whitened(y, noise, r)?;
    shrink_fitted(&spec, noise, shrinker)
}
