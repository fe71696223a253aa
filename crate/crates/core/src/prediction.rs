//! Linear prediction view of shrinkage: in-sample and out-of-sample
//! coefficients, the best linear predictor oracle, and the shared AMSE.

use std::io::{Read, Write};

use ndarray::Axis;
use ndarray_linalg::{FactorizeC, SolveC, UPLO};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigh, truncated_svd, Mat, Vector};
use crate::matrix_io::{read_hsmx, read_u32, write_hsmx};
use crate::noise::{NoiseCov, NoiseModel};
use crate::spectral_params::{fit_whitened, ComponentEstimate, ModelAggregates, WhitenedSpectrum};

/// `1 / (c_w² + s_w² μ_ε τ)`.
fn alpha(comp: &ComponentEstimate, agg: &ModelAggregates) -> f64 {
    1.0 / comp.unwhitening_factor(agg.mu_eps)
}

/// Weight on `⟨W Y_j, û_k^w⟩ W⁻¹ û_k^w` that reproduces optimal in-sample
/// shrinkage.
pub fn insample_coeff(comp: &ComponentEstimate, agg: &ModelAggregates) -> f64 {
    if !comp.above_threshold {
        return 0.0;
    }
    let c2 = comp.c_w * comp.c_w;
    alpha(comp, agg) * comp.ell_w * c2 / (comp.ell_w + 1.0)
}

/// Optimal weight for a new observation independent of the fitted basis.
pub fn oos_coeff(comp: &ComponentEstimate, agg: &ModelAggregates) -> f64 {
    if !comp.above_threshold {
        return 0.0;
    }
    let c2 = comp.c_w * comp.c_w;
    alpha(comp, agg) * c2 * comp.ell_w / (comp.ell_w * c2 + 1.0)
}

/// Error of the optimal out-of-sample predictor,
/// `Σ ℓ^w/τ − α (ℓ^w)² (c^w)⁴ / ((ℓ^w (c^w)² + 1) τ)`. Agrees with
/// [`crate::sv_shrinkage::amse_in_sample`].
///
/// The factor is `α/τ`: minimizing `η²(ℓ^w c_w² + 1)/(ατ) + ℓ̄ − 2η ℓ^w c_w²/τ`
/// over `η` leaves `α (ℓ^w c_w²)² / ((ℓ^w c_w² + 1) τ)`. Writing `1/(ατ)`
/// instead breaks the identity whenever `μ_ε τ ≠ 1`.
pub fn amse_oos(components: &[ComponentEstimate], agg: &ModelAggregates) -> f64 {
    components
        .iter()
        .filter(|c| c.above_threshold)
        .map(|c| {
            let c2 = c.c_w * c.c_w;
            let a = alpha(c, agg);
            c.ell_w / c.tau - a * (c.ell_w * c.ell_w * c2 * c2 / (c.ell_w * c2 + 1.0)) / c.tau
        })
        .sum()
}

/// `Σ_k η_k ⟨W Y_j, û_k^w⟩ W⁻¹ û_k^w` for every column of `y`.
pub fn project_predict(basis: &Mat, coeffs: &[f64], noise: &NoiseModel, y: &Mat) -> Result<Mat> {
    if y.nrows() != basis.nrows() {
        return Err(Error::dims("prediction", basis.nrows(), y.nrows()));
    }
    let scores = basis.t().dot(&noise.whiten(y)?);
    let eta = Vector::from(coeffs.to_vec());
    let left = noise.unwhiten(&(basis * &eta.insert_axis(Axis(0))))?;
    Ok(left.dot(&scores))
}

/// Optimal in-sample prediction written in column form.
pub fn insample_predict(spec: &WhitenedSpectrum, noise: &NoiseModel, y: &Mat) -> Result<Mat> {
    let eta: Vec<f64> = spec.components.iter().map(|c| insample_coeff(c, &spec.agg)).collect();
    project_predict(&spec.svd.u, &eta, noise, y)
}

#[derive(Debug, Clone)]
pub struct OosPredictor {
    /// Whitened empirical PCs `û_k^w`, p×r.
    pub basis: Mat,
    pub coeffs: Vec<f64>,
    pub noise: NoiseModel,
    /// Fitted estimates; empty for predictors read from disk.
    pub components: Vec<ComponentEstimate>,
}

pub const HSOS_MAGIC: &[u8; 4] = b"HSOS";

impl OosPredictor {
    pub fn from_fitted(spec: &WhitenedSpectrum, noise: &NoiseModel) -> Self {
        OosPredictor {
            basis: spec.svd.u.clone(),
            coeffs: spec.components.iter().map(|c| oos_coeff(c, &spec.agg)).collect(),
            noise: noise.clone(),
            components: spec.components.clone(),
        }
    }

    pub fn fit(y: &Mat, noise: &NoiseModel, r: usize) -> Result<Self> {
        Ok(Self::from_fitted(&fit_whitened(y, noise, r)?, noise))
    }

    pub fn p(&self) -> usize {
        self.basis.nrows()
    }

    pub fn r(&self) -> usize {
        self.basis.ncols()
    }

    pub fn predict(&self, y0: &Vector) -> Result<Vector> {
        if y0.len() != self.p() {
            return Err(Error::dims("oos_predict", self.p(), y0.len()));
        }
        let col = y0.view().insert_axis(Axis(1)).to_owned();
        Ok(self.predict_columns(&col)?.column(0).to_owned())
    }

    /// Predicts every column of `y0` independently.
    pub fn predict_columns(&self, y0: &Mat) -> Result<Mat> {
        project_predict(&self.basis, &self.coeffs, &self.noise, y0)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let to_u32 = |d: usize| u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")));
        w.write_all(HSOS_MAGIC)?;
        w.write_all(&to_u32(self.p())?.to_le_bytes())?;
        w.write_all(&to_u32(self.r())?.to_le_bytes())?;
        let coeffs = Mat::from_shape_vec((self.r(), 1), self.coeffs.clone()).expect("r×1");
        write_hsmx(&coeffs, &mut w)?;
        write_hsmx(&self.basis, &mut w)?;
        let cov = match self.noise.representation() {
            NoiseCov::Diagonal(d) => d.clone().insert_axis(Axis(1)),
            NoiseCov::Dense(c) => c.clone(),
        };
        write_hsmx(&cov, &mut w)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("missing HSOS magic".into()))?;
        if &magic != HSOS_MAGIC {
            return Err(Error::Format("missing HSOS magic".into()));
        }
        let p = read_u32(&mut r)? as usize;
        let k = read_u32(&mut r)? as usize;
        let coeffs = read_hsmx(&mut r)?;
        let basis = read_hsmx(&mut r)?;
        let cov = read_hsmx(&mut r)?;
        if coeffs.dim() != (k, 1) || basis.dim() != (p, k) {
            return Err(Error::Format("predictor blocks do not match header".into()));
        }
        let noise = match cov.dim() {
            (rows, 1) if rows == p && p != 1 => NoiseModel::diagonal(cov.column(0).to_owned())?,
            (rows, cols) if rows == p && cols == p => NoiseModel::dense(cov)?,
            (rows, cols) => {
                return Err(Error::Format(format!("noise block is {rows}x{cols}, expected {p} rows")))
            }
        };
        Ok(OosPredictor { basis, coeffs: coeffs.column(0).to_vec(), noise, components: Vec::new() })
    }
}

/// Best linear predictor `Σ_x (Σ_x + Σ_ε)⁻¹ Y` through the whitened
/// eigendecomposition `W Σ_x W = Σ ℓ_k^w u_k^w (u_k^w)ᵀ`.
pub fn blp_oracle(sigma_x: &Mat, noise: &NoiseModel, y: &Mat) -> Result<Mat> {
    let p = noise.p();
    if sigma_x.dim() != (p, p) {
        return Err(Error::dims("blp_oracle", format!("{p}x{p}"), format!("{:?}", sigma_x.dim())));
    }
    let w = noise.whitener();
    let sxw = w.dot(sigma_x).dot(&w);
    let sxw = (&sxw + &sxw.t()) * 0.5;
    let (vals, vecs) = sym_eigh(&sxw)?;
    let tol = 1e-12 * vals[0].abs().max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..p).filter(|&k| vals[k] > tol).collect();
    let basis = vecs.select(Axis(1), &keep);
    let gains: Vec<f64> = keep.iter().map(|&k| vals[k] / (vals[k] + 1.0)).collect();
    project_predict(&basis, &gains, noise, y)
}

/// Best linear predictor for `Σ_x = U diag(ℓ) Uᵀ` without forming p×p
/// matrices.
pub fn blp_lowrank(u: &Mat, ells: &[f64], noise: &NoiseModel, y: &Mat) -> Result<Mat> {
    if u.ncols() != ells.len() {
        return Err(Error::dims("blp_lowrank", ells.len(), u.ncols()));
    }
    if ells.is_empty() {
        return Ok(Mat::zeros(y.dim()));
    }
    let root = Vector::from_iter(ells.iter().map(|l| l.max(0.0).sqrt()));
    let b = noise.whiten(&(u * &root.insert_axis(Axis(0))))?;
    let svd = truncated_svd(&b, ells.len())?;
    let gains: Vec<f64> = svd.s.iter().map(|s| s * s / (s * s + 1.0)).collect();
    project_predict(&svd.u, &gains, noise, y)
}

/// Best linear predictor by a direct Cholesky solve.
pub fn blp_direct(sigma_x: &Mat, noise: &NoiseModel, y: &Mat) -> Result<Mat> {
    let total = sigma_x + &noise.covariance();
    let fact = total
        .factorizec(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("Σ_x + Σ_ε is not positive definite: {e}")))?;
    let mut z = Mat::zeros(y.dim());
    for (j, col) in y.columns().into_iter().enumerate() {
        z.column_mut(j).assign(&fact.solvec(&col.to_owned())?);
    }
    Ok(sigma_x.dot(&z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_params::{cos_inn, cos_out, cos_unwhitened};
    use crate::sv_shrinkage::amse_in_sample;
    use proptest::prelude::*;

    fn comp(ell_w: f64, c_w2: f64, mu: f64, tau: f64) -> (ComponentEstimate, ModelAggregates) {
        let c_w = c_w2.sqrt();
        let s_w = (1.0 - c_w2).sqrt();
        let c = ComponentEstimate {
            sigma_w: 3.0,
            ell_w,
            c_w,
            s_w,
            c_tilde: c_w,
            tau,
            ell: ell_w / tau,
            c: cos_unwhitened(c_w, s_w, mu, tau),
            above_threshold: true,
            demoted: false,
        };
        (c, ModelAggregates { gamma: 1.0, mu_eps: mu, p: 10, n: 10, r: 1 })
    }

    #[test]
    fn coefficient_values() {
        let (c, agg) = comp(2.0, 0.5, 1.0, 1.0);
        assert!((insample_coeff(&c, &agg) - 1.0 / 3.0).abs() < 1e-15);
        assert!((oos_coeff(&c, &agg) - 0.5).abs() < 1e-15);
        let (c, agg) = comp(4.0, 1.0, 1.0, 1.0);
        assert!((insample_coeff(&c, &agg) - 0.8).abs() < 1e-15);
        assert!((oos_coeff(&c, &agg) - 0.8).abs() < 1e-15);
        let below = ComponentEstimate::below_threshold(0.5);
        assert_eq!(insample_coeff(&below, &agg), 0.0);
        assert_eq!(oos_coeff(&below, &agg), 0.0);
        assert_eq!(amse_oos(&[below], &agg), 0.0);
    }

    #[test]
    fn amse_example() {
        let (c, agg) = comp(2.0, 0.5, 1.0, 1.0);
        assert!((amse_oos(&[c], &agg) - 1.5).abs() < 1e-14);
        let (c, agg) = comp(3.0, 1.0, 1.0, 1.0);
        assert!((amse_oos(&[c], &agg) - 3.0 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn predict_example() {
        let noise = NoiseModel::identity(2).unwrap();
        let basis = Mat::from_shape_vec((2, 1), vec![1.0, 0.0]).unwrap();
        let pred = OosPredictor { basis, coeffs: vec![0.5], noise, components: vec![] };
        let out = pred.predict(&Vector::from(vec![3.0, 4.0])).unwrap();
        assert_eq!(out.to_vec(), vec![1.5, 0.0]);
        assert_eq!(pred.predict(&Vector::zeros(2)).unwrap().to_vec(), vec![0.0, 0.0]);
        assert!(pred.predict(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn predictor_file_round_trip() {
        for noise in [
            NoiseModel::diagonal(Vector::from(vec![1.0, 2.0, 3.0])).unwrap(),
            NoiseModel::dense(Mat::from_shape_vec((3, 3), vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 1.5]).unwrap())
                .unwrap(),
        ] {
            let basis = Mat::from_shape_vec((3, 2), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
            let pred = OosPredictor { basis, coeffs: vec![0.7, 0.2], noise, components: vec![] };
            let mut buf = Vec::new();
            pred.write_to(&mut buf).unwrap();
            assert_eq!(&buf[..4], b"HSOS");
            let back = OosPredictor::read_from(buf.as_slice()).unwrap();
            assert_eq!(back.coeffs, pred.coeffs);
            assert_eq!(back.basis, pred.basis);
            assert_eq!(back.noise.covariance(), pred.noise.covariance());
        }
        assert!(OosPredictor::read_from(&b"HSMX"[..]).is_err());
    }

    #[test]
    fn blp_single_spike_white() {
        let noise = NoiseModel::identity(3).unwrap();
        let u = Vector::from(vec![0.6, 0.8, 0.0]);
        let sx = 2.0 * &u.view().insert_axis(Axis(1)).dot(&u.view().insert_axis(Axis(0)));
        let y = Mat::from_shape_vec((3, 1), vec![1.0, -2.0, 5.0]).unwrap();
        let got = blp_oracle(&sx, &noise, &y).unwrap();
        let proj = u.dot(&y.column(0)) * 2.0 / 3.0;
        for i in 0..3 {
            assert!((got[[i, 0]] - proj * u[i]).abs() < 1e-14);
        }
        let zero = blp_oracle(&Mat::zeros((3, 3)), &noise, &y).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn amse_forms_agree(gamma in 0.05f64..3.0, extra in 0.01f64..50.0, mu in 0.1f64..5.0, tau in 0.1f64..10.0) {
            let ell_w = gamma.sqrt() + extra;
            let c_w = cos_out(ell_w, gamma);
            let s_w = (1.0 - c_w * c_w).sqrt();
            let c = ComponentEstimate {
                sigma_w: 0.0,
                ell_w,
                c_w,
                s_w,
                c_tilde: cos_inn(ell_w, gamma),
                tau,
                ell: ell_w / tau,
                c: cos_unwhitened(c_w, s_w, mu, tau),
                above_threshold: true,
                demoted: false,
            };
            let agg = ModelAggregates { gamma, mu_eps: mu, p: 1, n: 1, r: 1 };
            let a = amse_oos(&[c], &agg);
            let b = amse_in_sample(&[c]);
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{} vs {}", a, b);
        }

        #[test]
        fn blp_forms_agree(seed in any::<u64>(), p in 2usize..10, r in 1usize..3) {
            use rand::SeedableRng;
            use rand_distr::{Distribution, StandardNormal};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let noise = crate::noise::make_noise_cov(p, 20.0, crate::noise::SpectrumProfile::LinspaceInvKappa,
                crate::noise::EigenBasis::RandomOrthogonal, seed).unwrap();
            let r = r.min(p);
            let g = Mat::from_shape_simple_fn((p, r), || StandardNormal.sample(&mut rng));
            let sx = g.dot(&g.t());
            let y = Mat::from_shape_simple_fn((p, 4), || StandardNormal.sample(&mut rng));
            let a = blp_oracle(&sx, &noise, &y).unwrap();
            let b = blp_direct(&sx, &noise, &y).unwrap();
            let err = (&a - &b).iter().map(|x| x * x).sum::<f64>().sqrt();
            let nrm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-10 * nrm.max(1e-300) + 1e-14);
        }
    }
}
