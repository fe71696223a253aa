//! OptShrink: data-driven singular value shrinkage without whitening.
//!
//! The D-transform of the empirical noise spectrum (the singular values
//! beyond the kept rank) gives, at each kept singular value `σ_k`, the
//! optimal replacement `w_k = −2 D(σ_k) / D′(σ_k)` together with estimates of
//! the spike strength and the singular-vector cosines. The noise covariance
//! is never used.

use ndarray::Axis;

use crate::eig_shrinkage::{optimal_tilde_t2, LossFunction};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, truncated_svd, Mat, Svd, Vector};
use crate::spectral_params::ComponentEstimate;
use crate::sv_shrinkage::ShrinkageResult;

/// The D-transform and its derivative built from a noise spectrum.
#[derive(Debug, Clone)]
pub struct DTransform {
    noise_sq: Vec<f64>,
    p: usize,
    n: usize,
    r: usize,
}

/// Values of the two one-sided transforms and their derivatives at `z`.
#[derive(Debug, Clone, Copy)]
pub struct DValues {
    pub phi_n: f64,
    pub phi_p: f64,
    pub d_phi_n: f64,
    pub d_phi_p: f64,
}

impl DValues {
    pub fn d(&self) -> f64 {
        self.phi_n * self.phi_p
    }

    pub fn d_prime(&self) -> f64 {
        self.d_phi_n * self.phi_p + self.phi_n * self.d_phi_p
    }
}

impl DTransform {
    /// `all_sv` holds every singular value of the p×n data in decreasing
    /// order; the first `r` are treated as signal.
    pub fn new(all_sv: &[f64], p: usize, n: usize, r: usize) -> Result<Self> {
        let q = p.min(n);
        if r >= q {
            return Err(Error::InvalidArgument(format!("rank {r} must be below min(p, n) = {q}")));
        }
        if all_sv.len() != q {
            return Err(Error::dims("D-transform spectrum", q, all_sv.len()));
        }
        Ok(DTransform { noise_sq: all_sv[r..].iter().map(|s| s * s).collect(), p, n, r })
    }

    pub fn eval(&self, z: f64) -> Result<DValues> {
        let q = self.p.min(self.n);
        let z2 = z * z;
        let mut s = 0.0;
        let mut ds = 0.0;
        for &a in &self.noise_sq {
            let d = z2 - a;
            if d == 0.0 || z == 0.0 {
                return Err(Error::Numeric(format!("D-transform pole at z = {z}")));
            }
            s += z / d;
            ds -= (z2 + a) / (d * d);
        }
        let extra_n = (self.n - q) as f64;
        let extra_p = (self.p - q) as f64;
        let nr = (self.n - self.r) as f64;
        let pr = (self.p - self.r) as f64;
        Ok(DValues {
            phi_n: (s + extra_n / z) / nr,
            phi_p: (s + extra_p / z) / pr,
            d_phi_n: (ds - extra_n / z2) / nr,
            d_phi_p: (ds - extra_p / z2) / pr,
        })
    }
}

/// Estimates at one kept singular value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptShrinkComponent {
    pub sigma: f64,
    /// Optimal replacement singular value.
    pub weight: f64,
    /// Spike strength estimate `1 / D(σ)`.
    pub ell: f64,
    /// Left (p-side) cosine estimate.
    pub c_left: f64,
    /// Right (n-side) cosine estimate.
    pub c_right: f64,
}

pub fn optshrink_component(dt: &DTransform, sigma: f64) -> Result<OptShrinkComponent> {
    let v = dt.eval(sigma)?;
    let d = v.d();
    let dp = v.d_prime();
    if !(d.is_finite() && dp.is_finite()) || dp == 0.0 {
        return Err(Error::Numeric(format!("D-transform degenerate at {sigma}: D = {d}, D' = {dp}")));
    }
    let weight = (-2.0 * d / dp).max(0.0);
    if weight == 0.0 || d <= 0.0 {
        return Ok(OptShrinkComponent { sigma, weight: 0.0, ell: 0.0, c_left: 0.0, c_right: 0.0 });
    }
    let ell = 1.0 / d;
    let c2 = |phi: f64| (-2.0 * phi / (ell * dp)).clamp(0.0, 1.0);
    Ok(OptShrinkComponent {
        sigma,
        weight,
        ell,
        c_left: c2(v.phi_p).sqrt(),
        c_right: c2(v.phi_n).sqrt(),
    })
}

/// Top-`r` SVD and per-component D-transform estimates.
pub fn optshrink_fit(y: &Mat, r: usize) -> Result<(Svd, Vec<OptShrinkComponent>)> {
    let (p, n) = y.dim();
    let all = singular_values(y)?;
    let dt = DTransform::new(all.as_slice().expect("contiguous"), p, n, r)?;
    let svd = truncated_svd(y, r)?;
    let comps = svd.s.iter().map(|&s| optshrink_component(&dt, s)).collect::<Result<Vec<_>>>()?;
    Ok((svd, comps))
}

fn as_component(c: &OptShrinkComponent) -> ComponentEstimate {
    let above = c.weight > 0.0;
    ComponentEstimate {
        sigma_w: c.sigma,
        ell_w: c.ell,
        c_w: c.c_left,
        s_w: (1.0 - c.c_left * c.c_left).max(0.0).sqrt(),
        c_tilde: c.c_right,
        tau: 1.0,
        ell: c.ell,
        c: c.c_left,
        above_threshold: above,
        demoted: false,
    }
}

/// OptShrink prediction `Σ w_k û_k v̂_kᵀ` on the raw (unwhitened) data. The
/// returned components describe the raw-domain estimates with `τ = 1`.
pub fn optshrink_predict(y: &Mat, r: usize) -> Result<ShrinkageResult> {
    let (p, n) = y.dim();
    if r == 0 {
        return Ok(ShrinkageResult {
            xhat: Mat::zeros((p, n)),
            t: vec![],
            components: vec![],
            amse_estimate: 0.0,
            warnings: vec![],
        });
    }
    let (svd, comps) = optshrink_fit(y, r)?;
    let w = Vector::from_iter(comps.iter().map(|c| c.weight));
    let xhat = (&svd.u * &w.insert_axis(Axis(0))).dot(&svd.v.t());
    let amse_estimate = comps
        .iter()
        .map(|c| c.ell * (1.0 - (c.c_left * c.c_right).powi(2)))
        .sum();
    let components: Vec<ComponentEstimate> = comps.iter().map(as_component).collect();
    let warnings = crate::sv_shrinkage::rank_warnings(&components);
    Ok(ShrinkageResult { xhat, t: comps.iter().map(|c| c.weight).collect(), components, amse_estimate, warnings })
}

/// Covariance estimate without whitening: eigenvalues `t̃²(ℓ̂, ĉ)` on the raw
/// left singular vectors. Returns the basis and eigenvalues.
pub fn optshrink_cov_factors(y: &Mat, r: usize, loss: &LossFunction) -> Result<(Mat, Vector)> {
    if r == 0 {
        return Ok((Mat::zeros((y.nrows(), 0)), Vector::zeros(0)));
    }
    let (svd, comps) = optshrink_fit(y, r)?;
    let vals = comps
        .iter()
        .map(|c| if c.weight > 0.0 { optimal_tilde_t2(loss, c.ell, c.c_left) } else { Ok(0.0) })
        .collect::<Result<Vec<_>>>()?;
    Ok((svd.u, Vector::from(vals)))
}
