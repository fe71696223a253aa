use rand::Rng as _;

use super::{check, col, join, parse, parse_list, run_trials, unknown, Column, ExperimentReport, Params, RunCtx};
use crate::error::Result;
use crate::linalg::frobenius_sq;
use crate::noise::{make_noise_cov, EigenBasis, SpectrumProfile};
use crate::prediction::OosPredictor;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sim::{generate_dataset, PcGenerator, SpikedModelSpec};
use crate::spectral_params::fit_whitened;
use crate::sv_shrinkage::{shrink_fitted, SvShrinker};

const SCHEMA: &[Column] = &[
    col("trial", "index"),
    col("n", "samples"),
    col("mse_in", "squared Frobenius error per sample"),
    col("mse_out", "squared Frobenius error per sample"),
];

pub(super) struct OosParams {
    p: usize,
    ells: Vec<f64>,
    kappa: f64,
    /// `n` is uniform on `(p, max_ratio·p]`.
    max_ratio: f64,
    trials: usize,
}

impl Default for OosParams {
    fn default() -> Self {
        OosParams { p: 500, ells: vec![3.0, 2.0, 1.0], kappa: 100.0, max_ratio: 2.0, trials: 2000 }
    }
}

impl Params for OosParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "p" => {
                self.p = parse(key, value)?;
                check(key, self.p >= 6, "need p >= 6")
            }
            "ells" => {
                self.ells = parse_list(key, value)?;
                check(key, self.ells.len() <= 3 && self.ells.iter().all(|&l| l > 0.0), "one to three positive values")
            }
            "kappa" => {
                self.kappa = parse(key, value)?;
                check(key, self.kappa >= 1.0, "must be >= 1")
            }
            "max_ratio" => {
                self.max_ratio = parse(key, value)?;
                check(key, self.max_ratio > 1.0, "must exceed 1")
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
            ("ells", join(&self.ells)),
            ("kappa", self.kappa.to_string()),
            ("max_ratio", self.max_ratio.to_string()),
            ("trials", self.trials.to_string()),
        ]
    }
}

pub(super) fn run(p: &OosParams, ctx: &RunCtx) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("fig-oos", SCHEMA);
    let trials = ctx.trials(p.trials);
    report.set("effective_trials", trials);
    let noise = make_noise_cov(p.p, p.kappa, SpectrumProfile::UnitNormLinspace, EigenBasis::Coordinate, 0)?;
    let hi = ((p.max_ratio * p.p as f64).floor() as usize).max(p.p + 1);
    let r = p.ells.len();
    let res = run_trials(ctx, 0, trials, |_, seed| {
        let n = rng_from_seed(derive_seed(seed, 0)).random_range(p.p + 1..=hi);
        let spec = SpikedModelSpec::new(p.p, n, p.ells.clone(), noise.clone()).with_pcs(PcGenerator::half_supports(p.p));
        let ins = generate_dataset(&spec, derive_seed(seed, 1))?;
        let fitted = fit_whitened(&ins.y, &noise, r)?;
        let mse_in = frobenius_sq(&(&shrink_fitted(&fitted, &noise, SvShrinker::Optimal)?.xhat - &ins.x));
        let held = spec.with_pcs(PcGenerator::Fixed(ins.u.clone()));
        let out = generate_dataset(&held, derive_seed(seed, 2))?;
        let pred = OosPredictor::from_fitted(&fitted, &noise).predict_columns(&out.y)?;
        Ok((n, mse_in, frobenius_sq(&(&pred - &out.x))))
    })?;
    for (t, (n, a, b)) in res.into_iter().enumerate() {
        report.push(vec![t.into(), n.into(), a.into(), b.into()]);
    }
    Ok(report)
}
