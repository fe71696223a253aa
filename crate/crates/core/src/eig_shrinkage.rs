//! Covariance estimation by eigenvalue shrinkage with whitening.
//!
//! For losses that are orthogonally invariant and decompose over the 2×2
//! blocks spanned by each true and estimated eigenvector, the optimal
//! eigenvalue for component `k` minimizes `L(A, t B)` with
//! `A = [[ℓ, 0], [0, 0]]` and `B` the projector onto `(c, s)`.

use std::fmt;
use std::sync::Arc;

use ndarray::Axis;
use ndarray_linalg::QR;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigvals, symmetric_orthonormalize, Mat, Vector};
use crate::noise::NoiseModel;
use crate::spectral_params::{fit_whitened, ComponentEstimate, WhitenedSpectrum};
use crate::sv_shrinkage::rank_warnings;

pub type Mat2 = [[f64; 2]; 2];

/// A loss `L(A, B)` on symmetric 2×2 matrices.
pub type BlockLoss = Arc<dyn Fn(&Mat2, &Mat2) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum LossFunction {
    /// Squared Frobenius norm.
    Frobenius,
    Operator,
    Nuclear,
    Custom(BlockLoss),
}

impl fmt::Debug for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl LossFunction {
    pub fn name(&self) -> &'static str {
        match self {
            LossFunction::Frobenius => "fro",
            LossFunction::Operator => "op",
            LossFunction::Nuclear => "nuc",
            LossFunction::Custom(_) => "custom",
        }
    }

    /// The same loss evaluated numerically, forcing the generic minimizer.
    pub fn as_custom(&self) -> LossFunction {
        match self {
            LossFunction::Custom(_) => self.clone(),
            LossFunction::Frobenius => LossFunction::Custom(Arc::new(|a, b| {
                let d = sub2(a, b);
                d[0][0] * d[0][0] + 2.0 * d[0][1] * d[0][1] + d[1][1] * d[1][1]
            })),
            LossFunction::Operator => LossFunction::Custom(Arc::new(|a, b| {
                let (l1, l2) = sym2_eigs(&sub2(a, b));
                l1.abs().max(l2.abs())
            })),
            LossFunction::Nuclear => LossFunction::Custom(Arc::new(|a, b| {
                let (l1, l2) = sym2_eigs(&sub2(a, b));
                l1.abs() + l2.abs()
            })),
        }
    }

    /// Loss of a list of eigenvalues of `Σ̂ − Σ`.
    fn of_spectrum(&self, eig: &[f64]) -> Result<f64> {
        Ok(match self {
            LossFunction::Frobenius => eig.iter().map(|x| x * x).sum(),
            LossFunction::Operator => eig.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            LossFunction::Nuclear => eig.iter().map(|x| x.abs()).sum(),
            LossFunction::Custom(_) => {
                return Err(Error::InvalidArgument("custom losses act on 2x2 blocks only".into()))
            }
        })
    }
}

impl std::str::FromStr for LossFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fro" | "frobenius" => Ok(LossFunction::Frobenius),
            "op" | "operator" => Ok(LossFunction::Operator),
            "nuc" | "nuclear" => Ok(LossFunction::Nuclear),
            _ => Err(Error::InvalidArgument(format!("unknown loss `{s}`"))),
        }
    }
}

fn sub2(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

/// Eigenvalues of a symmetric 2×2 matrix, larger first.
pub fn sym2_eigs(m: &Mat2) -> (f64, f64) {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half = 0.5 * (m[0][0] - m[1][1]);
    let rad = half.hypot(m[0][1]);
    (mean + rad, mean - rad)
}

/// `A = [[ℓ, 0], [0, 0]]` and `B = (c, s)(c, s)ᵀ` with `s = √(1 − c²)`.
pub fn block_matrices(ell: f64, c: f64) -> (Mat2, Mat2) {
    let s = (1.0 - c * c).max(0.0).sqrt();
    ([[ell, 0.0], [0.0, 0.0]], [[c * c, c * s], [c * s, s * s]])
}

fn scale2(m: &Mat2, t: f64) -> Mat2 {
    [[m[0][0] * t, m[0][1] * t], [m[1][0] * t, m[1][1] * t]]
}

pub const GOLDEN_MAX_ITER: usize = 200;
pub const GOLDEN_REL_TOL: f64 = 1e-8;

/// Minimizes `f` over `[lo, hi]` by golden-section search, stopping when the
/// bracket is narrower than `rel_tol · max(hi − lo, |x|)` of the original
/// scale. The endpoints are compared against the interior minimum at the end,
/// so monotone functions return the correct boundary.
pub fn golden_section<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!("empty bracket [{lo}, {hi}]")));
    }
    let scale = (hi - lo).max(lo.abs()).max(hi.abs()).max(f64::MIN_POSITIVE);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while b - a > rel_tol * scale {
        if iter >= max_iter {
            return Err(Error::Numeric(format!(
                "golden-section search did not converge in {max_iter} iterations: bracket [{a:.6e}, {b:.6e}]"
            )));
        }
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::Numeric(format!(
                "loss is not finite near {x1:.6e}: f = ({f1}, {f2})"
            )));
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iter += 1;
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Optimal unwhitened eigenvalue `t̃²` for a spike `ell` with cosine `c`.
pub fn optimal_tilde_t2(loss: &LossFunction, ell: f64, c: f64) -> Result<f64> {
    let c2 = c * c;
    Ok(match loss {
        LossFunction::Frobenius => ell * c2,
        LossFunction::Operator => ell,
        LossFunction::Nuclear => (ell * (2.0 * c2 - 1.0)).max(0.0),
        LossFunction::Custom(l) => {
            if ell <= 0.0 {
                return Ok(0.0);
            }
            let (a, b) = block_matrices(ell, c);
            golden_section(|t| l(&a, &scale2(&b, t)), 0.0, 4.0 * ell, GOLDEN_REL_TOL, GOLDEN_MAX_ITER)?.0
        }
    })
}

#[derive(Debug, Clone)]
pub struct CovEstimate {
    pub sigma_x_hat: Mat,
    /// Eigenvalues in the unwhitened basis.
    pub tilde_t2: Vec<f64>,
    /// Eigenvalue weights in the whitened basis.
    pub t2: Vec<f64>,
    /// Columns `W⁻¹ û_k^w` (not normalized) spanning the estimate.
    pub basis: Mat,
    pub components: Vec<ComponentEstimate>,
    pub warnings: Vec<String>,
}

impl CovEstimate {
    /// `Σ̂_x = basis · diag(t2) · basisᵀ`.
    pub fn factors(&self) -> (Mat, Vector) {
        (self.basis.clone(), Vector::from(self.t2.clone()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CovOptions {
    /// Replace the basis by the nearest orthonormal set before assembly.
    pub orthogonalize: bool,
}

pub fn cov_estimate(y: &Mat, noise: &NoiseModel, r: usize, loss: &LossFunction) -> Result<CovEstimate> {
    cov_estimate_with(y, noise, r, loss, CovOptions::default())
}

pub fn cov_estimate_with(
    y: &Mat,
    noise: &NoiseModel,
    r: usize,
    loss: &LossFunction,
    opts: CovOptions,
) -> Result<CovEstimate> {
    let spec = fit_whitened(y, noise, r)?;
    cov_from_fitted(&spec, noise, loss, opts)
}

pub fn cov_from_fitted(
    spec: &WhitenedSpectrum,
    noise: &NoiseModel,
    loss: &LossFunction,
    opts: CovOptions,
) -> Result<CovEstimate> {
    let mu = spec.agg.mu_eps;
    let mut tilde_t2 = Vec::with_capacity(spec.components.len());
    let mut t2 = Vec::with_capacity(spec.components.len());
    for comp in &spec.components {
        if !comp.above_threshold {
            tilde_t2.push(0.0);
            t2.push(0.0);
            continue;
        }
        let tt = optimal_tilde_t2(loss, comp.ell, comp.c)?;
        tilde_t2.push(tt);
        t2.push(tt * comp.tau / comp.unwhitening_factor(mu));
    }
    let mut basis = noise.unwhiten(&spec.svd.u)?;
    let mut weights = Vector::from(t2.clone());
    if opts.orthogonalize && basis.ncols() > 0 {
        let keep: Vec<usize> = (0..t2.len()).filter(|&k| t2[k] > 0.0).collect();
        let sub = basis.select(Axis(1), &keep);
        let norms = sub.map_axis(Axis(0), |c| c.dot(&c).sqrt());
        let normalized = &sub / &norms.insert_axis(Axis(0));
        let q = if keep.is_empty() { normalized } else { symmetric_orthonormalize(&normalized)? };
        basis = q;
        weights = keep.iter().map(|&k| tilde_t2[k]).collect();
    }
    let scaled = &basis * &weights.view().insert_axis(Axis(0));
    let mut sigma = scaled.dot(&basis.t());
    // exact symmetry
    let st = sigma.t().to_owned();
    sigma = (&sigma + &st) * 0.5;
    Ok(CovEstimate {
        sigma_x_hat: sigma,
        tilde_t2,
        t2: weights.to_vec(),
        basis,
        components: spec.components.clone(),
        warnings: rank_warnings(&spec.components),
    })
}

/// `L(Σ̂ − Σ)` for the Frobenius (squared), operator, or nuclear norm.
pub fn cov_loss(loss: &LossFunction, sigma_hat: &Mat, sigma: &Mat) -> Result<f64> {
    if sigma_hat.dim() != sigma.dim() {
        return Err(Error::dims("cov_loss", format!("{:?}", sigma.dim()), format!("{:?}", sigma_hat.dim())));
    }
    let d = sigma_hat - sigma;
    if let LossFunction::Frobenius = loss {
        return Ok(d.iter().map(|x| x * x).sum());
    }
    let eig = sym_eigvals(&d)?;
    loss.of_spectrum(eig.as_slice().unwrap_or(&eig.to_vec()))
}

/// [`cov_loss`] for `Σ̂ = A diag(a) Aᵀ` and `Σ = B diag(b) Bᵀ` without forming
/// p×p matrices: the nonzero spectrum of the difference is that of
/// `R diag(a, −b) Rᵀ` where `[A B] = QR`.
pub fn cov_loss_lowrank(
    loss: &LossFunction,
    a: &Mat,
    wa: &Vector,
    b: &Mat,
    wb: &Vector,
) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::dims("cov_loss_lowrank", a.nrows(), b.nrows()));
    }
    let m = a.ncols() + b.ncols();
    if m == 0 {
        return Ok(0.0);
    }
    let c = ndarray::concatenate(Axis(1), &[a.view(), b.view()]).map_err(|e| Error::Linalg(e.to_string()))?;
    let d: Vector = wa.iter().copied().chain(wb.iter().map(|x| -x)).collect();
    let (_, r) = c.qr()?;
    let rd = &r * &d.insert_axis(Axis(0));
    let small = rd.dot(&r.t());
    let small = (&small + &small.t()) * 0.5;
    let eig = sym_eigvals(&small)?;
    loss.of_spectrum(&eig.to_vec())
}
