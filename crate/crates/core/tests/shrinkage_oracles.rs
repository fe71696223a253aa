//! Exact identities checked against independent computations.

use hetshrink::linalg::{frobenius_sq, sym_eigvals, Mat, Vector};
use hetshrink::noise::{haar_orthogonal, make_noise_cov, EigenBasis, SpectrumProfile};
use hetshrink::rng::rng_from_seed;
use hetshrink::spectral_params::fit_whitened;
use hetshrink::sv_shrinkage::shrink_fitted;
use hetshrink::*;
use nalgebra::DMatrix;

fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

fn from_na(m: &DMatrix<f64>) -> Mat {
    Mat::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    (frobenius_sq(&(a - b)) / frobenius_sq(b).max(1e-300)).sqrt()
}

/// Optimal white-noise shrinkage written out from scratch on top of the
/// nalgebra SVD.
fn white_noise_oracle(y: &Mat, r: usize) -> Mat {
    let (p, n) = y.dim();
    let g = p as f64 / n as f64;
    let svd = to_na(y).svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(p, n);
    for &k in order.iter().take(r) {
        let s = svd.singular_values[k];
        if s <= 1.0 + g.sqrt() {
            continue;
        }
        let b = s * s - 1.0 - g;
        let ell = (b + (b * b - 4.0 * g).sqrt()) / 2.0;
        let c2 = (1.0 - g / (ell * ell)) / (1.0 + g / ell);
        let ct2 = (1.0 - g / (ell * ell)) / (1.0 + 1.0 / ell);
        let t = ell.sqrt() * (c2 * ct2).sqrt();
        out += u.column(k) * vt.row(k) * t;
    }
    from_na(&out)
}

fn planted(p: usize, n: usize, ells: Vec<f64>, noise: NoiseModel, seed: u64) -> Dataset {
    generate_dataset(&SpikedModelSpec::new(p, n, ells, noise), seed).unwrap()
}

#[test]
fn white_noise_matches_independent_oracle() {
    for seed in 0..5 {
        let noise = NoiseModel::identity(80).unwrap();
        let d = planted(80, 160, vec![6.0, 3.0], noise.clone(), seed);
        for r in [1, 2, 4] {
            let ours = shrink_predict(&d.y, &noise, r, SvShrinker::Optimal).unwrap().xhat;
            let oracle = white_noise_oracle(&d.y, r);
            let err = frobenius_sq(&(&ours - &oracle)).sqrt();
            assert!(err < 1e-9, "seed {seed} r {r}: {err}");
        }
    }
}

#[test]
fn white_noise_operator_loss_returns_spikes() {
    let noise = NoiseModel::identity(60).unwrap();
    let d = planted(60, 150, vec![8.0, 4.0], noise.clone(), 11);
    let est = cov_estimate(&d.y, &noise, 2, &LossFunction::Operator).unwrap();
    let eig = sym_eigvals(&est.sigma_x_hat).unwrap();
    for k in 0..2 {
        assert!(est.components[k].above_threshold);
        assert!((eig[k] - est.components[k].ell).abs() < 1e-9, "{} vs {}", eig[k], est.components[k].ell);
    }
    let g = est.basis.t().dot(&est.basis);
    assert!((&g - &Mat::eye(2)).iter().all(|x| x.abs() < 1e-9));
}

#[test]
fn orthogonal_conjugation_equivariance() {
    let p = 40;
    let noise = make_noise_cov(p, 30.0, SpectrumProfile::LinspaceInvKappa, EigenBasis::RandomOrthogonal, 3).unwrap();
    let d = planted(p, 90, vec![5.0, 2.0], noise.clone(), 4);
    let q = haar_orthogonal(p, &mut rng_from_seed(9)).unwrap();
    let rotated = NoiseModel::dense(q.dot(&noise.covariance()).dot(&q.t())).unwrap();
    let base = shrink_predict(&d.y, &noise, 2, SvShrinker::Optimal).unwrap().xhat;
    let turned = shrink_predict(&q.dot(&d.y), &rotated, 2, SvShrinker::Optimal).unwrap().xhat;
    assert!(rel_diff(&turned, &q.dot(&base)) < 1e-9);
}

#[test]
fn joint_scaling_equivariance() {
    let p = 50;
    let noise = make_noise_cov(p, 10.0, SpectrumProfile::LinspaceInvKappa, EigenBasis::Coordinate, 0).unwrap();
    let d = planted(p, 100, vec![4.0, 2.5], noise.clone(), 6);
    let a = 3.7;
    let base = shrink_predict(&d.y, &noise, 2, SvShrinker::Optimal).unwrap();
    let scaled = shrink_predict(&(&d.y * a), &noise.scaled(a * a).unwrap(), 2, SvShrinker::Optimal).unwrap();
    assert!(rel_diff(&scaled.xhat, &(&base.xhat * a)) < 1e-9);
    assert!((scaled.amse_estimate - a * a * base.amse_estimate).abs() < 1e-9 * scaled.amse_estimate.abs().max(1.0));
}

#[test]
fn column_form_reproduces_shrinkage() {
    let p = 45;
    let n = 120;
    let noise = make_noise_cov(p, 50.0, SpectrumProfile::UnitNormLinspace, EigenBasis::RandomOrthogonal, 8).unwrap();
    let d = planted(p, n, vec![2.0, 1.0, 0.5], noise.clone(), 2);
    let spec = fit_whitened(&d.y, &noise, 3).unwrap();
    let res = shrink_fitted(&spec, &noise, SvShrinker::Optimal).unwrap();
    let w = noise.whitener();
    let winv = noise.unwhitener();
    let raw = &d.y * (n as f64).sqrt();
    for j in 0..n {
        let wy = w.dot(&raw.column(j));
        let mut col = Vector::zeros(p);
        for k in 0..3 {
            let uk = spec.svd.u.column(k);
            let coeff = res.t[k] / spec.svd.s[k] * wy.dot(&uk);
            col.scaled_add(coeff, &winv.dot(&uk));
        }
        let ours = res.xhat.column(j).to_owned() * (n as f64).sqrt();
        let err = (&col - &ours).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err < 1e-9 * (1.0 + col.dot(&col).sqrt()), "column {j}: {err}");
    }
}

#[test]
fn column_form_coefficients_match_insample_predictor() {
    let noise = make_noise_cov(30, 20.0, SpectrumProfile::LinspaceInvKappa, EigenBasis::Coordinate, 0).unwrap();
    let d = planted(30, 70, vec![6.0, 3.0], noise.clone(), 13);
    let spec = fit_whitened(&d.y, &noise, 2).unwrap();
    let a = shrink_fitted(&spec, &noise, SvShrinker::Optimal).unwrap().xhat;
    let b = hetshrink::prediction::insample_predict(&spec, &noise, &d.y).unwrap();
    assert!(rel_diff(&b, &a) < 1e-9);
}

#[test]
fn unwhitened_pcs_are_orthogonal_in_the_noise_metric() {
    for seed in 0..100u64 {
        let p = 12;
        let noise = make_noise_cov(p, 1.0 + seed as f64, SpectrumProfile::LinspaceInvKappa, EigenBasis::RandomOrthogonal, seed)
            .unwrap();
        let d = planted(p, 30, vec![3.0, 1.5, 0.8], noise.clone(), seed + 1000);
        let spec = fit_whitened(&d.y, &noise, 3).unwrap();
        let b = noise.unwhiten(&spec.svd.u).unwrap();
        let cov = noise.covariance();
        let inv = hetshrink::linalg::sym_eigh(&cov).unwrap();
        let dinv = inv.0.mapv(|x| 1.0 / x);
        let sigma_inv = (&inv.1 * &dinv.insert_axis(ndarray::Axis(0))).dot(&inv.1.t());
        let g = b.t().dot(&sigma_inv).dot(&b);
        let off = (&g - &Mat::eye(3)).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(off < 1e-8, "seed {seed}: {off}");
    }
}

#[test]
fn blp_spectral_and_direct_forms_agree() {
    let noise = make_noise_cov(25, 40.0, SpectrumProfile::LinspaceInvKappa, EigenBasis::RandomOrthogonal, 5).unwrap();
    let d = planted(25, 60, vec![3.0, 1.0], noise.clone(), 21);
    let sx = d.signal_cov();
    let a = blp_oracle(&sx, &noise, &d.y).unwrap();
    let b = hetshrink::prediction::blp_direct(&sx, &noise, &d.y).unwrap();
    let c = hetshrink::prediction::blp_lowrank(&d.u, &d.spec.ells, &noise, &d.y).unwrap();
    assert!(rel_diff(&a, &b) < 1e-10);
    assert!(rel_diff(&c, &b) < 1e-10);
}
