//! Principal-component diagnostics: empirical PCs after unwhitening,
//! subspace distances and signal-to-noise ratios.

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::linalg::{canonical_column_signs, op_norm, orthonormalize_columns, sym_eigvals, truncated_svd, Mat};
use crate::noise::NoiseModel;

/// Columns `W⁻¹ û_k^w / ‖W⁻¹ û_k^w‖` for whitened left vectors `uw`.
pub fn unwhiten_pcs(uw: &Mat, noise: &NoiseModel) -> Result<Mat> {
    let mut b = noise.unwhiten(uw)?;
    for mut col in b.columns_mut() {
        let nrm = col.dot(&col).sqrt();
        if nrm > 0.0 {
            col /= nrm;
        }
    }
    canonical_column_signs(&mut b);
    Ok(b)
}

/// Empirical PCs of whitened data, mapped back to the original coordinates.
pub fn empirical_pcs(yw: &Mat, noise: &NoiseModel, r: usize) -> Result<Mat> {
    let svd = truncated_svd(yw, r)?;
    unwhiten_pcs(&svd.u, noise)
}

/// `sin Θ = ‖(I − Q Qᵀ) U‖_op` where `Q` is an orthonormal basis for the
/// span of `uhat` and `U` is orthonormal.
pub fn sin_theta(u: &Mat, uhat: &Mat) -> Result<f64> {
    if u.nrows() != uhat.nrows() {
        return Err(Error::dims("sin_theta", u.nrows(), uhat.nrows()));
    }
    if u.ncols() == 0 {
        return Ok(0.0);
    }
    let q = orthonormalize_columns(uhat)?;
    let resid = u - &q.dot(&q.t().dot(u));
    let g = resid.t().dot(&resid);
    let top = sym_eigvals(&g)?[0].max(0.0);
    Ok(top.sqrt().min(1.0))
}

/// `|⟨u_k, û_k⟩|` for matching columns.
pub fn abs_cosines(u: &Mat, uhat: &Mat) -> Vec<f64> {
    u.axis_iter(Axis(1))
        .zip(uhat.axis_iter(Axis(1)))
        .map(|(a, b)| {
            let nb = b.dot(&b).sqrt();
            let na = a.dot(&a).sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                (a.dot(&b) / (na * nb)).abs()
            }
        })
        .collect()
}

/// Operator-norm SNR `‖X‖²_op / ‖N‖²_op`.
pub fn snr_operator(x: &Mat, noise: &Mat) -> Result<f64> {
    if x.dim() != noise.dim() {
        return Err(Error::dims("snr_operator", format!("{:?}", x.dim()), format!("{:?}", noise.dim())));
    }
    let nn = op_norm(noise)?;
    if nn == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    let xn = op_norm(x)?;
    Ok((xn / nn).powi(2))
}

/// `φ = μ_ε · tr(Σ_ε⁻¹)/p ≥ 1`, with equality exactly for `Σ_ε ∝ I`.
pub fn phi(noise: &NoiseModel) -> f64 {
    noise.mu_eps() * noise.inv_trace_mean()
}
