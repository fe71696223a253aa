use super::{check, col, join, mean, parse, parse_list, run_trials, unknown, Column, ExperimentReport, Params, RunCtx};
use crate::error::Result;
use crate::linalg::frobenius_sq;
use crate::noise::{haar_orthogonal, linspace, NoiseModel};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sim::{generate_dataset, sample_noise_covariance, PcGenerator, SpikedModelSpec};
use crate::sv_shrinkage::{shrink_predict, SvShrinker};

const SCHEMA: &[Column] = &[
    col("n_prime", "pure-noise samples"),
    col("mse_estimated", "squared Frobenius error per sample"),
    col("mse_known", "squared Frobenius error per sample"),
    col("rel_diff", "(mse_estimated - mse_known) / mse_known"),
];

pub(super) struct EstCovParams {
    p: usize,
    n: usize,
    /// Signal singular values; the spikes are their squares.
    signal: Vec<f64>,
    noise_lo: f64,
    noise_hi: f64,
    /// `n′ / p` for each row.
    nprime_ratios: Vec<f64>,
    trials: usize,
}

impl Default for EstCovParams {
    fn default() -> Self {
        EstCovParams {
            p: 500,
            n: 625,
            signal: vec![3.0, 5.0],
            noise_lo: 0.01,
            noise_hi: 0.2,
            nprime_ratios: vec![2.0, 5.0, 10.0, 20.0, 50.0],
            trials: 2000,
        }
    }
}

impl Params for EstCovParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "p" => {
                self.p = parse(key, value)?;
                check(key, self.p >= 2, "need p >= 2")
            }
            "n" => {
                self.n = parse(key, value)?;
                check(key, self.n >= 2, "need n >= 2")
            }
            "signal" => {
                self.signal = parse_list(key, value)?;
                check(key, self.signal.iter().all(|&s| s > 0.0), "must be positive")
            }
            "noise_lo" => {
                self.noise_lo = parse(key, value)?;
                check(key, self.noise_lo > 0.0, "must be positive")
            }
            "noise_hi" => {
                self.noise_hi = parse(key, value)?;
                check(key, self.noise_hi > 0.0, "must be positive")
            }
            "nprime_ratios" => {
                self.nprime_ratios = parse_list(key, value)?;
                check(key, self.nprime_ratios.iter().all(|&r| r >= 1.0), "need n' >= p")
            }
            "trials" => {
                self.trials = parse(key, value)?;
                check(key, self.trials >= 1, "need at least one trial")
            }
            _ => Err(unknown(key)),
        }
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("p", self.p.to_string()),
            ("n", self.n.to_string()),
            ("signal", join(&self.signal)),
            ("noise_lo", self.noise_lo.to_string()),
            ("noise_hi", self.noise_hi.to_string()),
            ("nprime_ratios", join(&self.nprime_ratios)),
            ("trials", self.trials.to_string()),
        ]
    }
}

/// One trial: a fresh Haar noise basis, one dataset, and one sample
/// covariance per `n′`. Returns the known-covariance error followed by the
/// estimated-covariance errors.
fn trial(p: &EstCovParams, nprimes: &[usize], seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let basis = haar_orthogonal(p.p, &mut rng)?;
    let noise = NoiseModel::from_eigen(linspace(p.noise_lo, p.noise_hi, p.p), basis)?;
    let ells: Vec<f64> = p.signal.iter().map(|s| s * s).collect();
    let r = ells.len();
    let spec = SpikedModelSpec::new(p.p, p.n, ells, noise.clone()).with_pcs(PcGenerator::UniformSphere);
    let d = generate_dataset(&spec, derive_seed(seed, 1))?;
    let mut out = Vec::with_capacity(nprimes.len() + 1);
    out.push(frobenius_sq(&(&shrink_predict(&d.y, &noise, r, SvShrinker::Optimal)?.xhat - &d.x)));
    for (i, &m) in nprimes.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, 2 + i as u64));
        let est = NoiseModel::dense(sample_noise_covariance(&noise, m, &mut rng)?)?;
        let xhat = shrink_predict(&d.y, &est, r, SvShrinker::Optimal)?.xhat;
        out.push(frobenius_sq(&(&xhat - &d.x)));
    }
    Ok(out)
}

pub(super) fn run(p: &EstCovParams, ctx: &RunCtx) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("fig-estcov", SCHEMA);
    let trials = ctx.trials(p.trials);
    report.set("effective_trials", trials);
    let nprimes: Vec<usize> = p.nprime_ratios.iter().map(|r| (r * p.p as f64).round() as usize).collect();
    let res = run_trials(ctx, 0, trials, |_, seed| trial(p, &nprimes, seed))?;
    let known = mean(&res.iter().map(|r| r[0]).collect::<Vec<_>>());
    for (i, &m) in nprimes.iter().enumerate() {
        let est = mean(&res.iter().map(|r| r[i + 1]).collect::<Vec<_>>());
        report.push(vec![m.into(), est.into(), known.into(), ((est - known) / known).into()]);
    }
    Ok(report)
}
