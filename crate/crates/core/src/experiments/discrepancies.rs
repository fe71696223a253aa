use super::{check, col, join, mean, parse, parse_list, run_trials, unknown, Column, ExperimentReport, Params, RunCtx};
use crate::error::Result;
use crate::linalg::frobenius_sq;
use crate::noise::{linspace, NoiseModel};
use crate::sim::{generate_dataset, PcGenerator, SpikedModelSpec};
use crate::spectral_params::population_components;
use crate::sv_shrinkage::{amse_in_sample, shrink_predict, SvShrinker};

const SCHEMA: &[Column] = &[
    col("log2_p", "log2 of dimension"),
    col("disc_amse", "mean |AMSE - MSE|"),
    col("disc_amse_hat", "mean |estimated AMSE - MSE|"),
];

pub(super) struct DiscParams {
    gamma: f64,
    /// Signal singular values; the spikes are their squares.
    signal: Vec<f64>,
    noise_lo: f64,
    noise_hi: f64,
    log2_p: Vec<u32>,
    trials: usize,
}

impl Default for DiscParams {
    fn default() -> Self {
        DiscParams {
            gamma: 0.8,
            signal: vec![3.0, 2.0],
            noise_lo: 1.0 / 200.0,
            noise_hi: 1.5,
            log2_p: vec![7, 8, 9, 10, 11],
            trials: 200,
        }
    }
}

impl Params for DiscParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "gamma" => {
                self.gamma = parse(key, value)?;
                check(key, self.gamma > 0.0, "must be positive")
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
            "log2_p" => {
                self.log2_p = parse_list(key, value)?;
                check(key, self.log2_p.iter().all(|&k| (2..=16).contains(&k)), "exponents must lie in 2..=16")
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
            ("gamma", self.gamma.to_string()),
            ("signal", join(&self.signal)),
            ("noise_lo", self.noise_lo.to_string()),
            ("noise_hi", self.noise_hi.to_string()),
            ("log2_p", join(&self.log2_p)),
            ("trials", self.trials.to_string()),
        ]
    }
}

pub(super) fn run(p: &DiscParams, ctx: &RunCtx) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("fig-discrepancies", SCHEMA);
    let trials = ctx.trials(p.trials);
    report.set("effective_trials", trials);
    let ells: Vec<f64> = p.signal.iter().map(|s| s * s).collect();
    let r = ells.len();
    for (cfg, &k) in p.log2_p.iter().enumerate() {
        let dim = 1usize << k;
        let n = (dim as f64 / p.gamma).round() as usize;
        let noise = NoiseModel::diagonal(linspace(p.noise_lo, p.noise_hi, dim))?;
        let spec = SpikedModelSpec::new(dim, n, ells.clone(), noise.clone())
            .with_pcs(PcGenerator::contiguous_blocks(dim, r));
        let res = run_trials(ctx, cfg, trials, |_, seed| {
            let d = generate_dataset(&spec, seed)?;
            let amse = amse_in_sample(&population_components(&d.u, &ells, &noise, spec.gamma())?);
            let fit = shrink_predict(&d.y, &noise, r, SvShrinker::Optimal)?;
            let mse = frobenius_sq(&(&fit.xhat - &d.x));
            Ok([(amse - mse).abs(), (fit.amse_estimate - mse).abs()])
        })?;
        report.push(vec![
            k.into(),
            mean(&res.iter().map(|x| x[0]).collect::<Vec<_>>()).into(),
            mean(&res.iter().map(|x| x[1]).collect::<Vec<_>>()).into(),
        ]);
    }
    Ok(report)
}
