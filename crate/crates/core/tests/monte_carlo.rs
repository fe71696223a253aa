//! Distributional properties checked by repeated simulation.

use hetshrink::linalg::{frobenius_sq, op_norm, Mat};
use hetshrink::noise::linspace;
use hetshrink::optshrink::optshrink_fit;
use hetshrink::pca_metrics::{empirical_pcs, phi, sin_theta, snr_operator};
use hetshrink::rank_noise::{diag_noise_var, estimate_rank_whitened, noise_edge, sample_noise_cov};
use hetshrink::rng::rng_from_seed;
use hetshrink::sim::sample_noise;
use hetshrink::spectral_params::{cos_inn, cos_out, population_components};
use hetshrink::*;

fn diag_noise(p: usize, kappa: f64) -> NoiseModel {
    make_noise_cov(p, kappa, SpectrumProfile::LinspaceInvKappa, EigenBasis::Coordinate, 0).unwrap()
}

fn pure_noise(noise: &NoiseModel, n: usize, seed: u64) -> Mat {
    sample_noise(noise, n, EntryDist::Gaussian, &mut rng_from_seed(seed)).unwrap()
}

/// Uniform random PCs and spikes chosen so the whitened spikes hit `ell_w`.
fn with_whitened_spikes(p: usize, n: usize, ell_w: &[f64], noise: &NoiseModel, seed: u64) -> (Dataset, Vec<ComponentEstimate>) {
    let r = ell_w.len();
    let u = PcGenerator::UniformSphere.draw(p, r, &mut rng_from_seed(seed)).unwrap();
    let gamma = p as f64 / n as f64;
    let ells: Vec<f64> = (0..r)
        .map(|k| {
            let col = u.column(k).to_owned().insert_axis(ndarray::Axis(1));
            let unit = population_components(&col, &[1.0], noise, gamma).unwrap()[0].ell_w;
            ell_w[k] / unit
        })
        .collect();
    let spec = SpikedModelSpec::new(p, n, ells.clone(), noise.clone()).with_pcs(PcGenerator::Fixed(u.clone()));
    let d = generate_dataset(&spec, seed ^ 0x5eed).unwrap();
    let pop = population_components(&u, &ells, noise, gamma).unwrap();
    (d, pop)
}

fn frequency(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

#[test]
fn pure_noise_stays_below_the_edge() {
    let (p, n) = (400, 800);
    let noise = diag_noise(p, 10.0);
    let gamma = p as f64 / n as f64;
    let mut below = 0;
    let mut zero = 0;
    for seed in 0..100 {
        let y = pure_noise(&noise, n, seed);
        let spec = fit_whitened(&y, &noise, 1).unwrap();
        below += usize::from(!spec.components[0].above_threshold);
        zero += usize::from(estimate_rank_whitened(&noise.whiten(&y).unwrap(), gamma, 0.05).unwrap() == 0);
    }
    assert!(frequency(zero, 100) >= 0.95, "rank 0 in {zero}/100");
    assert!(frequency(below, 100) >= 0.5, "below threshold in {below}/100");
}

/// Per-seed estimates fluctuate by about 0.15 at this size, so the
/// tolerance applies to the average over seeds.
#[test]
fn planted_spike_parameters_are_recovered() {
    let (p, n) = (1000, 2000);
    let noise = diag_noise(p, 10.0);
    let (mut ell_err, mut tau_err) = (0.0, 0.0);
    for seed in 0..100 {
        let (d, pop) = with_whitened_spikes(p, n, &[4.0], &noise, seed);
        let c = fit_whitened(&d.y, &noise, 1).unwrap().components[0];
        assert!((c.ell_w - 4.0).abs() < 0.6, "seed {seed}: {}", c.ell_w);
        ell_err += (c.ell_w - 4.0) / 100.0;
        tau_err += (c.tau - pop[0].tau) / 100.0;
    }
    assert!(ell_err.abs() < 0.15, "{ell_err}");
    assert!(tau_err.abs() < 0.1, "{tau_err}");
}

#[test]
fn white_noise_edge_matches_formula() {
    let noise = NoiseModel::identity(400).unwrap();
    let edge = noise_edge(&noise, 800, 20, 1).unwrap();
    let expected = 1.0 + 0.5f64.sqrt();
    assert!((edge / expected - 1.0).abs() < 0.02, "{edge} vs {expected}");
}

#[test]
fn sample_noise_covariance_concentrates() {
    let p = 50;
    let noise = NoiseModel::identity(p).unwrap();
    let mut close = 0;
    for seed in 0..100 {
        let raw = pure_noise(&noise, 50_000, seed) * (50_000f64).sqrt();
        let est = sample_noise_cov(&raw).unwrap();
        assert!(est.warnings.is_empty());
        let diff = est.model.covariance() - Mat::eye(p);
        close += usize::from(op_norm(&diff).unwrap() < 0.15);
    }
    assert!(frequency(close, 100) >= 0.99, "{close}/100");

    let raw = pure_noise(&noise, p, 7) * (p as f64).sqrt();
    assert!(!sample_noise_cov(&raw).unwrap().warnings.is_empty());
}

#[test]
fn diagonal_variance_estimate_with_delocalized_signal() {
    let (p, n) = (200, 5000);
    let noise = diag_noise(p, 10.0);
    let spec = SpikedModelSpec::new(p, n, vec![1.0], noise.clone());
    for seed in 0..5 {
        let d = generate_dataset(&spec, seed).unwrap();
        let est = diag_noise_var(&d.y).unwrap();
        let worst = est
            .covariance()
            .diag()
            .iter()
            .zip(noise.covariance().diag().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst < 0.2 * noise.op_norm(), "seed {seed}: {worst}");
    }
}

#[test]
fn optimal_shrinker_wins_on_average() {
    let p = 1000;
    let noise = diag_noise(p, 100.0);
    for gamma in [0.5, 2.0] {
        let n = (p as f64 / gamma) as usize;
        let spec = SpikedModelSpec::new(p, n, vec![9.0, 4.0, 2.0], noise.clone());
        let mut totals = [0.0; 4];
        for seed in 0..50 {
            let d = generate_dataset(&spec, seed).unwrap();
            let fitted = fit_whitened(&d.y, &noise, 3).unwrap();
            for (k, s) in SvShrinker::ALL.iter().enumerate() {
                let xhat = hetshrink::sv_shrinkage::shrink_fitted(&fitted, &noise, *s).unwrap().xhat;
                totals[k] += frobenius_sq(&(&xhat - &d.x));
            }
        }
        for k in 1..4 {
            assert!(totals[0] < totals[k], "gamma {gamma}: {totals:?}");
        }
    }
}

#[test]
fn planted_rank_is_detected() {
    let (p, n) = (500, 1000);
    let gamma = 0.5f64;
    let noise = diag_noise(p, 10.0);
    let floor = gamma.sqrt() + 0.5;
    let ell_w = [floor + 2.0, floor + 0.5];
    let mut hits = 0;
    for seed in 0..100 {
        let (d, _) = with_whitened_spikes(p, n, &ell_w, &noise, seed);
        let r = estimate_rank_whitened(&noise.whiten(&d.y).unwrap(), gamma, 0.05).unwrap();
        hits += usize::from(r == 2);
    }
    assert!(frequency(hits, 100) >= 0.9, "{hits}/100");
}

#[test]
fn subspace_error_vanishes_as_samples_grow() {
    let p = 100;
    let noise = diag_noise(p, 10.0);
    let mut means = Vec::new();
    for n in [500, 2000, 10_000] {
        let spec = SpikedModelSpec::new(p, n, vec![3.0, 2.0], noise.clone());
        let mut total = 0.0;
        for seed in 0..20 {
            let d = generate_dataset(&spec, seed).unwrap();
            let uhat = empirical_pcs(&noise.whiten(&d.y).unwrap(), &noise, 2).unwrap();
            total += sin_theta(&d.u, &uhat).unwrap();
        }
        means.push(total / 20.0);
    }
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
    assert!(means[2] < 0.1, "{means:?}");
}

#[test]
fn subspace_error_follows_minimax_scaling() {
    let p = 400;
    let noise = diag_noise(p, 10.0);
    for gamma in [0.25, 0.5, 1.0] {
        let n = (p as f64 / gamma) as usize;
        for ell in [2.0, 4.0, 8.0] {
            let spec = SpikedModelSpec::new(p, n, vec![ell], noise.clone());
            let mut total = 0.0;
            for seed in 0..10 {
                let d = generate_dataset(&spec, seed).unwrap();
                let uhat = empirical_pcs(&noise.whiten(&d.y).unwrap(), &noise, 1).unwrap();
                total += sin_theta(&d.u, &uhat).unwrap().powi(2);
            }
            let rate = ell.min(ell * ell / noise.op_norm()) / (gamma * noise.mu_eps());
            let scaled = total / 10.0 * rate;
            assert!(scaled <= 10.0, "gamma {gamma}, ell {ell}: {scaled}");
        }
    }
}

#[test]
fn optshrink_matches_white_noise_optimum() {
    let (p, n) = (500, 1000);
    let gamma = 0.5;
    let noise = NoiseModel::identity(p).unwrap();
    let spec = SpikedModelSpec::new(p, n, vec![4.0], noise);
    let (co, ci) = (cos_out(4.0, gamma), cos_inn(4.0, gamma));
    let target = 2.0 * co * ci;
    let mut good = 0;
    for seed in 0..10 {
        let d = generate_dataset(&spec, seed).unwrap();
        let (_, comps) = optshrink_fit(&d.y, 1).unwrap();
        let c = comps[0];
        if (c.weight / target - 1.0).abs() < 0.1 && (c.c_left - co).abs() < 0.02 && (c.c_right - ci).abs() < 0.02 {
            good += 1;
        }
    }
    assert!(good >= 9, "{good}/10");
}

#[test]
fn optshrink_ignores_pure_noise() {
    let p = 1000;
    let noise = NoiseModel::identity(p).unwrap();
    for seed in 0..10 {
        let y = pure_noise(&noise, 2000, seed);
        let (_, comps) = optshrink_fit(&y, 1).unwrap();
        assert!(comps[0].weight < 0.2, "seed {seed}: {}", comps[0].weight);
    }
}

#[test]
fn whitening_raises_operator_snr() {
    let (p, n) = (1000, 2000);
    let noise = diag_noise(p, 100.0);
    let bound = 0.95 * phi(&noise);
    let spec = SpikedModelSpec::new(p, n, vec![1.0], noise.clone());
    let mut hits = 0;
    for seed in 0..20 {
        let d = generate_dataset(&spec, seed).unwrap();
        let raw = snr_operator(&d.x, &d.eps).unwrap();
        let white = snr_operator(&noise.whiten(&d.x).unwrap(), &noise.whiten(&d.eps).unwrap()).unwrap();
        hits += usize::from(white >= bound * raw);
    }
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn scalar_noise_leaves_snr_unchanged() {
    let noise = NoiseModel::diagonal(linspace(2.5, 2.5, 60)).unwrap();
    let d = generate_dataset(&SpikedModelSpec::new(60, 120, vec![3.0], noise.clone()), 3).unwrap();
    let raw = snr_operator(&d.x, &d.eps).unwrap();
    let white = snr_operator(&noise.whiten(&d.x).unwrap(), &noise.whiten(&d.eps).unwrap()).unwrap();
    assert!((raw - white).abs() < 1e-10 * raw);
}
