//! Asymptotic spectral maps of the spiked model after whitening, and their
//! plug-in estimators from the top singular triplets of `Y^w = W Y`.

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, Mat, Svd, Vector};
use crate::noise::NoiseModel;

/// Global quantities shared by every component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelAggregates {
    /// `p / n`.
    pub gamma: f64,
    /// `tr Σ_ε / p`.
    pub mu_eps: f64,
    pub p: usize,
    pub n: usize,
    pub r: usize,
}

impl ModelAggregates {
    pub fn new(p: usize, n: usize, r: usize, mu_eps: f64) -> Self {
        ModelAggregates { gamma: p as f64 / n as f64, mu_eps, p, n, r }
    }

    /// Largest whitened singular value attributable to noise, `1 + √γ`.
    pub fn bulk_edge(&self) -> f64 {
        bulk_edge(self.gamma)
    }
}

/// Estimated (or population) parameters of one spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentEstimate {
    /// Observed singular value of `Y^w`.
    pub sigma_w: f64,
    /// Whitened spike strength `ℓ^w`.
    pub ell_w: f64,
    /// Cosine between whitened population and sample left vectors.
    pub c_w: f64,
    pub s_w: f64,
    /// Cosine between population and sample right vectors.
    pub c_tilde: f64,
    pub tau: f64,
    /// `ℓ^w / τ`.
    pub ell: f64,
    /// Cosine between unwhitened population and sample left vectors.
    pub c: f64,
    pub above_threshold: bool,
    /// Set when the singular value cleared the bulk edge but `τ` could not
    /// be estimated; such components are treated as below threshold.
    pub demoted: bool,
}

impl ComponentEstimate {
    pub fn below_threshold(sigma_w: f64) -> Self {
        ComponentEstimate {
            sigma_w,
            ell_w: 0.0,
            c_w: 0.0,
            s_w: 1.0,
            c_tilde: 0.0,
            tau: 1.0,
            ell: 0.0,
            c: 0.0,
            above_threshold: false,
            demoted: false,
        }
    }

    /// `c_w² + s_w² μ_ε τ`, the denominator shared by the optimal shrinkers.
    pub fn unwhitening_factor(&self, mu_eps: f64) -> f64 {
        self.c_w * self.c_w + self.s_w * self.s_w * mu_eps * self.tau
    }
}

pub fn bulk_edge(gamma: f64) -> f64 {
    1.0 + gamma.sqrt()
}

/// Limiting top singular value of `Y^w` for whitened spike `ell_w`; the bulk
/// edge when the spike is at or below the detection threshold `√γ`.
pub fn sigma_w_forward(ell_w: f64, gamma: f64) -> f64 {
    if ell_w <= gamma.sqrt() {
        return bulk_edge(gamma);
    }
    ((ell_w + 1.0) * (1.0 + gamma / ell_w)).sqrt()
}

/// Inverse of [`sigma_w_forward`]; `None` at or below the bulk edge.
pub fn ell_w_invert(sigma_w: f64, gamma: f64) -> Option<f64> {
    if !(sigma_w > bulk_edge(gamma)) {
        return None;
    }
    let b = sigma_w * sigma_w - 1.0 - gamma;
    let disc = (b * b - 4.0 * gamma).max(0.0);
    Some((b + disc.sqrt()) / 2.0)
}

/// `c^w`, the limiting left-vector cosine.
pub fn cos_out(ell_w: f64, gamma: f64) -> f64 {
    if ell_w <= gamma.sqrt() {
        return 0.0;
    }
    ((1.0 - gamma / (ell_w * ell_w)) / (1.0 + gamma / ell_w)).sqrt()
}

/// `c̃`, the limiting right-vector cosine.
pub fn cos_inn(ell_w: f64, gamma: f64) -> f64 {
    if ell_w <= gamma.sqrt() {
        return 0.0;
    }
    ((1.0 - gamma / (ell_w * ell_w)) / (1.0 + 1.0 / ell_w)).sqrt()
}

/// `τ ≈ c_w² / (‖Σ_ε^{1/2} û^w‖² − s_w² μ_ε)`.
pub fn estimate_tau(c_w: f64, s_w: f64, mu_eps: f64, norm_sq_sighalf_uhat: f64) -> Result<f64> {
    let denom = norm_sq_sighalf_uhat - s_w * s_w * mu_eps;
    if !(denom > 0.0) {
        return Err(Error::EstimationFailure(format!(
            "tau denominator {denom:.3e} is not positive"
        )));
    }
    Ok(c_w * c_w / denom)
}

/// Cosine between the unwhitened population and empirical PCs.
pub fn cos_unwhitened(c_w: f64, s_w: f64, mu_eps: f64, tau: f64) -> f64 {
    let c2 = c_w * c_w;
    let denom = c2 + s_w * s_w * mu_eps * tau;
    if denom <= 0.0 {
        return 0.0;
    }
    (c2 / denom).sqrt()
}

/// Fills every field from an observed whitened singular value and the
/// `Σ_ε^{1/2}`-norm of its left singular vector.
pub fn component_from_observation(
    sigma_w: f64,
    norm_sq_sighalf_uhat: f64,
    agg: &ModelAggregates,
) -> ComponentEstimate {
    let Some(ell_w) = ell_w_invert(sigma_w, agg.gamma) else {
        return ComponentEstimate::below_threshold(sigma_w);
    };
    let c_w = cos_out(ell_w, agg.gamma);
    let s_w = (1.0 - c_w * c_w).max(0.0).sqrt();
    let c_tilde = cos_inn(ell_w, agg.gamma);
    match estimate_tau(c_w, s_w, agg.mu_eps, norm_sq_sighalf_uhat) {
        Ok(tau) => ComponentEstimate {
            sigma_w,
            ell_w,
            c_w,
            s_w,
            c_tilde,
            tau,
            ell: ell_w / tau,
            c: cos_unwhitened(c_w, s_w, agg.mu_eps, tau),
            above_threshold: true,
            demoted: false,
        },
        Err(_) => {
            log::warn!("component with sigma_w = {sigma_w:.4} demoted: tau estimate failed");
            ComponentEstimate { demoted: true, ..ComponentEstimate::below_threshold(sigma_w) }
        }
    }
}

/// Top-`r` SVD of the whitened data and the per-component estimates.
pub fn estimate_components(
    yw: &Mat,
    noise: &NoiseModel,
    r: usize,
) -> Result<(Svd, Vec<ComponentEstimate>)> {
    let (p, n) = yw.dim();
    if noise.p() != p {
        return Err(Error::dims("estimate_components", p, noise.p()));
    }
    let svd = truncated_svd(yw, r)?;
    let agg = ModelAggregates::new(p, n, r, noise.mu_eps());
    let comps = (0..r)
        .map(|k| {
            let u = svd.u.column(k).to_owned();
            let nsq = noise.sqrt_norm_sq(&u)?;
            Ok(component_from_observation(svd.s[k], nsq, &agg))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((svd, comps))
}

/// Everything the shrinkers need from one pass over the data.
#[derive(Debug, Clone)]
pub struct WhitenedSpectrum {
    pub svd: Svd,
    pub components: Vec<ComponentEstimate>,
    pub agg: ModelAggregates,
}

impl WhitenedSpectrum {
    pub fn n_above(&self) -> usize {
        self.components.iter().filter(|c| c.above_threshold).count()
    }
}

pub fn fit_whitened(y: &Mat, noise: &NoiseModel, r: usize) -> Result<WhitenedSpectrum> {
    let (p, n) = y.dim();
    if r > p.min(n) {
        return Err(Error::InvalidArgument(format!("rank {r} exceeds min(p, n) = {}", p.min(n))));
    }
    let yw = noise.whiten(y)?;
    let (svd, components) = estimate_components(&yw, noise, r)?;
    Ok(WhitenedSpectrum { svd, components, agg: ModelAggregates::new(p, n, r, noise.mu_eps()) })
}

/// Population parameters of a known signal: whitened spikes and vectors come
/// from the SVD of `W U diag(√ℓ)`, `τ_k = ‖W⁻¹ u_k^w‖⁻²`, and the cosines are
/// the limiting values at aspect ratio `gamma`. `sigma_w` holds the limiting
/// singular value.
pub fn population_components(
    u: &Mat,
    ells: &[f64],
    noise: &NoiseModel,
    gamma: f64,
) -> Result<Vec<ComponentEstimate>> {
    let r = ells.len();
    if u.ncols() != r {
        return Err(Error::dims("population_components", r, u.ncols()));
    }
    if r == 0 {
        return Ok(Vec::new());
    }
    let root = Vector::from_iter(ells.iter().map(|l| l.sqrt()));
    let b = noise.whiten(&(u * &root.insert_axis(Axis(0))))?;
    let svd = crate::linalg::truncated_svd(&b, r)?;
    let mu = noise.mu_eps();
    let mut out = Vec::with_capacity(r);
    for k in 0..r {
        let ell_w = svd.s[k] * svd.s[k];
        let uw = svd.u.column(k).to_owned();
        let back = noise.unwhiten_vec(&uw)?;
        let tau = 1.0 / back.dot(&back);
        let c_w = cos_out(ell_w, gamma);
        let s_w = (1.0 - c_w * c_w).max(0.0).sqrt();
        let above = ell_w > gamma.sqrt();
        out.push(ComponentEstimate {
            sigma_w: sigma_w_forward(ell_w, gamma),
            ell_w,
            c_w,
            s_w,
            c_tilde: cos_inn(ell_w, gamma),
            tau,
            ell: ell_w / tau,
            c: if above { cos_unwhitened(c_w, s_w, mu, tau) } else { 0.0 },
            above_threshold: above,
            demoted: false,
        });
    }
    Ok(out)
}
