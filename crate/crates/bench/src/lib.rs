//! Benchmark fixtures.

use hetshrink::{generate_dataset, make_noise_cov, EigenBasis, Mat, NoiseModel, SpectrumProfile, SpikedModelSpec};

/// Scaled p×n data with three spikes and condition number 100 noise, plus
/// the noise model. `dense` rotates the noise eigenbasis.
pub fn fixture(p: usize, n: usize, dense: bool) -> (Mat, NoiseModel) {
    let basis = if dense { EigenBasis::RandomOrthogonal } else { EigenBasis::Coordinate };
    let noise = make_noise_cov(p, 100.0, SpectrumProfile::LinspaceInvKappa, basis, 0).expect("valid noise");
    let spec = SpikedModelSpec::new(p, n, vec![9.0, 4.0, 2.0], noise.clone());
    let d = generate_dataset(&spec, 1).expect("valid spec");
    (d.y, noise)
}
