//! Noise covariance models and the whitening transform `W = Σ_ε^{-1/2}`.

use ndarray::{Array1, Axis};
use ndarray_linalg::QR;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, sym_eigh, Mat, Vector};
use crate::rng::Rng;

/// Eigenvalues below this fraction of the largest one are rejected.
pub const MIN_REL_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum NoiseCov {
    Diagonal(Vector),
    Dense(Mat),
}

#[derive(Debug, Clone)]
enum Whitener {
    Diagonal { inv_sqrt: Vector, sqrt: Vector },
    Dense { w: Mat, w_inv: Mat },
}

/// A positive-definite noise covariance with its cached whitener.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    cov: NoiseCov,
    whitener: Whitener,
    /// Eigenvalues in decreasing order.
    eigenvalues: Vector,
    mu_eps: f64,
}

fn check_spectrum(vals: &Vector) -> Result<()> {
    if vals.is_empty() {
        return Err(Error::InvalidArgument("noise covariance has dimension 0".into()));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("noise covariance has non-finite entries".into()));
    }
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min <= MIN_REL_EIGENVALUE * max {
        return Err(Error::CannotWhiten(format!(
            "smallest eigenvalue {min:.3e} is not positive relative to largest {max:.3e}"
        )));
    }
    Ok(())
}

impl NoiseModel {
    pub fn identity(p: usize) -> Result<Self> {
        Self::diagonal(Vector::ones(p))
    }

    pub fn diagonal(values: Vector) -> Result<Self> {
        check_spectrum(&values)?;
        let mut eigenvalues = values.to_vec();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let mu_eps = values.mean().unwrap_or(0.0);
        let sqrt = values.mapv(f64::sqrt);
        let inv_sqrt = sqrt.mapv(|s| 1.0 / s);
        Ok(NoiseModel {
            cov: NoiseCov::Diagonal(values),
            whitener: Whitener::Diagonal { inv_sqrt, sqrt },
            eigenvalues: Array1::from(eigenvalues),
            mu_eps,
        })
    }

    /// Dense covariance. The input must be symmetric to 1e-10 relative.
    pub fn dense(cov: Mat) -> Result<Self> {
        let (p, q) = cov.dim();
        if p != q {
            return Err(Error::dims("noise covariance", format!("{p}x{p}"), format!("{p}x{q}")));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("noise covariance has dimension 0".into()));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("noise covariance has non-finite entries".into()));
        }
        if !is_symmetric(&cov, 1e-10) {
            return Err(Error::InvalidArgument("noise covariance is not symmetric".into()));
        }
        let sym = (&cov + &cov.t()) * 0.5;
        let (vals, vecs) = sym_eigh(&sym)?;
        Self::assemble(sym, vals, vecs)
    }

    /// Dense covariance `V diag(vals) Vᵀ` from a known eigendecomposition.
    pub fn from_eigen(vals: Vector, vecs: Mat) -> Result<Self> {
        let p = vals.len();
        if vecs.dim() != (p, p) {
            return Err(Error::dims("eigenvectors", format!("{p}x{p}"), format!("{:?}", vecs.dim())));
        }
        let cov = scale_conjugate(&vecs, &vals);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        let vals_sorted: Vector = order.iter().map(|&i| vals[i]).collect();
        let vecs_sorted = vecs.select(Axis(1), &order);
        Self::assemble(cov, vals_sorted, vecs_sorted)
    }

    fn assemble(cov: Mat, vals: Vector, vecs: Mat) -> Result<Self> {
        check_spectrum(&vals)?;
        let sqrt = vals.mapv(f64::sqrt);
        let w = scale_conjugate(&vecs, &sqrt.mapv(|s| 1.0 / s));
        let w_inv = scale_conjugate(&vecs, &sqrt);
        let mu_eps = cov.diag().mean().unwrap_or(0.0);
        Ok(NoiseModel {
            cov: NoiseCov::Dense(cov),
            whitener: Whitener::Dense { w, w_inv },
            eigenvalues: vals,
            mu_eps,
        })
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `tr Σ_ε / p`.
    pub fn mu_eps(&self) -> f64 {
        self.mu_eps
    }

    pub fn representation(&self) -> &NoiseCov {
        &self.cov
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.cov, NoiseCov::Diagonal(_))
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    pub fn op_norm(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn condition_number(&self) -> f64 {
        self.eigenvalues[0] / self.eigenvalues[self.p() - 1]
    }

    /// `tr(Σ_ε^{-1}) / p`.
    pub fn inv_trace_mean(&self) -> f64 {
        self.eigenvalues.iter().map(|l| 1.0 / l).sum::<f64>() / self.p() as f64
    }

    pub fn covariance(&self) -> Mat {
        match &self.cov {
            NoiseCov::Diagonal(d) => Mat::from_diag(d),
            NoiseCov::Dense(m) => m.clone(),
        }
    }

    /// `W = Σ_ε^{-1/2}` as a dense matrix.
    pub fn whitener(&self) -> Mat {
        match &self.whitener {
            Whitener::Diagonal { inv_sqrt, .. } => Mat::from_diag(inv_sqrt),
            Whitener::Dense { w, .. } => w.clone(),
        }
    }

    /// `W⁻¹ = Σ_ε^{1/2}` as a dense matrix.
    pub fn unwhitener(&self) -> Mat {
        match &self.whitener {
            Whitener::Diagonal { sqrt, .. } => Mat::from_diag(sqrt),
            Whitener::Dense { w_inv, .. } => w_inv.clone(),
        }
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.p() {
            return Err(Error::dims("whitening", format!("{} rows", self.p()), format!("{rows} rows")));
        }
        Ok(())
    }

    pub fn whiten(&self, y: &Mat) -> Result<Mat> {
        self.check_rows(y.nrows())?;
        Ok(match &self.whitener {
            Whitener::Diagonal { inv_sqrt, .. } => scale_rows(y, inv_sqrt),
            Whitener::Dense { w, .. } => w.dot(y),
        })
    }

    pub fn unwhiten(&self, m: &Mat) -> Result<Mat> {
        self.check_rows(m.nrows())?;
        Ok(match &self.whitener {
            Whitener::Diagonal { sqrt, .. } => scale_rows(m, sqrt),
            Whitener::Dense { w_inv, .. } => w_inv.dot(m),
        })
    }

    pub fn whiten_vec(&self, y: &Vector) -> Result<Vector> {
        self.check_rows(y.len())?;
        Ok(match &self.whitener {
            Whitener::Diagonal { inv_sqrt, .. } => y * inv_sqrt,
            Whitener::Dense { w, .. } => w.dot(y),
        })
    }

    pub fn unwhiten_vec(&self, y: &Vector) -> Result<Vector> {
        self.check_rows(y.len())?;
        Ok(match &self.whitener {
            Whitener::Diagonal { sqrt, .. } => y * sqrt,
            Whitener::Dense { w_inv, .. } => w_inv.dot(y),
        })
    }

    /// `Σ_ε M` for a p×k matrix.
    pub fn apply_cov(&self, m: &Mat) -> Result<Mat> {
        self.check_rows(m.nrows())?;
        Ok(match &self.cov {
            NoiseCov::Diagonal(d) => scale_rows(m, d),
            NoiseCov::Dense(c) => c.dot(m),
        })
    }

    /// `‖Σ_ε^{1/2} u‖² = uᵀ Σ_ε u`.
    pub fn sqrt_norm_sq(&self, u: &Vector) -> Result<f64> {
        self.check_rows(u.len())?;
        Ok(match &self.cov {
            NoiseCov::Diagonal(d) => u.iter().zip(d).map(|(x, v)| x * x * v).sum(),
            NoiseCov::Dense(c) => u.dot(&c.dot(u)),
        })
    }

    /// The model for `a·Σ_ε`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor {a} must be positive")));
        }
        match &self.cov {
            NoiseCov::Diagonal(d) => Self::diagonal(d * a),
            NoiseCov::Dense(c) => Self::dense(c * a),
        }
    }
}

fn scale_rows(m: &Mat, s: &Vector) -> Mat {
    m * &s.view().insert_axis(Axis(1))
}

/// `V diag(d) Vᵀ`.
fn scale_conjugate(v: &Mat, d: &Vector) -> Mat {
    let vd = v * &d.view().insert_axis(Axis(0));
    vd.dot(&v.t())
}

/// `len` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, len: usize) -> Vector {
    match len {
        0 => Vector::zeros(0),
        1 => Vector::from_elem(1, lo),
        _ => Vector::from_iter((0..len).map(|i| lo + (hi - lo) * i as f64 / (len - 1) as f64)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumProfile {
    /// Linearly spaced over `[1, κ]`, then normalized to unit Euclidean norm.
    UnitNormLinspace,
    /// Linearly spaced over `[1/κ, 1]`.
    LinspaceInvKappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenBasis {
    Coordinate,
    /// Haar-distributed orthogonal eigenvectors.
    RandomOrthogonal,
}

/// Noise covariance with condition number `kappa`.
///
/// For `p = 1` the single eigenvalue is the top of the range.
pub fn make_noise_cov(
    p: usize,
    kappa: f64,
    profile: SpectrumProfile,
    basis: EigenBasis,
    seed: u64,
) -> Result<NoiseModel> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("kappa must be >= 1, got {kappa}")));
    }
    let vals = match profile {
        SpectrumProfile::UnitNormLinspace => {
            let v = if p == 1 { Vector::from_elem(1, kappa) } else { linspace(1.0, kappa, p) };
            let nrm = v.dot(&v).sqrt();
            v / nrm
        }
        SpectrumProfile::LinspaceInvKappa => {
            if p == 1 {
                Vector::ones(1)
            } else {
                linspace(1.0 / kappa, 1.0, p)
            }
        }
    };
    match basis {
        EigenBasis::Coordinate => NoiseModel::diagonal(vals),
        EigenBasis::RandomOrthogonal => {
            let mut rng = Rng::seed_from_u64(seed);
            NoiseModel::from_eigen(vals, haar_orthogonal(p, &mut rng)?)
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` absorbed into `Q`.
pub fn haar_orthogonal(p: usize, rng: &mut Rng) -> Result<Mat> {
    let g = Mat::from_shape_simple_fn((p, p), || StandardNormal.sample(rng));
    let (mut q, r) = g.qr()?;
    for j in 0..p {
        if r[[j, j]] < 0.0 {
            q.column_mut(j).mapv_inplace(|x| -x);
        }
    }
    Ok(q)
}
