use super::{check, col, join, mean, parse, parse_list, run_trials, std_err, unknown, Column, ExperimentReport, Params, RunCtx};
use crate::error::Result;
use crate::linalg::frobenius_sq;
use crate::noise::{make_noise_cov, EigenBasis, NoiseModel, SpectrumProfile};
use crate::optshrink::optshrink_predict;
use crate::prediction::blp_lowrank;
use crate::sim::{generate_dataset, PcGenerator, SpikedModelSpec};
use crate::sv_shrinkage::{shrink_predict, SvShrinker};

const SCHEMA: &[Column] = &[
    col("kappa", "condition number"),
    col("n", "samples"),
    col("mse_whitened", "squared Frobenius error per sample"),
    col("mse_blp", "squared Frobenius error per sample"),
    col("mse_optshrink", "squared Frobenius error per sample"),
    col("gap_whitened_se", "standard error of mse_whitened - mse_blp"),
    col("gap_optshrink_se", "standard error of mse_optshrink - mse_blp"),
];

pub(super) struct BlpParams {
    p: usize,
    ells: Vec<f64>,
    kappas: Vec<f64>,
    ns: Vec<usize>,
    trials: usize,
}

impl Default for BlpParams {
    fn default() -> Self {
        BlpParams {
            p: 100,
            ells: vec![3.0, 2.0, 1.0],
            kappas: vec![10.0, 100.0, 1000.0],
            ns: vec![500, 1000, 2000, 4000, 8000],
            trials: 500,
        }
    }
}

impl Params for BlpParams {
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
            "kappas" => {
                self.kappas = parse_list(key, value)?;
                check(key, self.kappas.iter().all(|&k| k >= 1.0), "condition numbers must be >= 1")
            }
            "ns" => {
                self.ns = parse_list(key, value)?;
                check(key, self.ns.iter().all(|&n| n >= 2), "need n >= 2")
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
            ("kappas", join(&self.kappas)),
            ("ns", join(&self.ns)),
            ("trials", self.trials.to_string()),
        ]
    }
}

/// Errors of the three predictors on one dataset.
#[derive(Debug, Clone, Copy)]
pub struct BlpTrial {
    pub whitened: f64,
    pub blp: f64,
    pub optshrink: f64,
}

fn trial(p: usize, n: usize, ells: &[f64], noise: &NoiseModel, seed: u64) -> Result<BlpTrial> {
    let spec = SpikedModelSpec::new(p, n, ells.to_vec(), noise.clone()).with_pcs(PcGenerator::half_supports(p));
    let d = generate_dataset(&spec, seed)?;
    let r = ells.len();
    let w = shrink_predict(&d.y, noise, r, SvShrinker::Optimal)?.xhat;
    let o = optshrink_predict(&d.y, r)?.xhat;
    let b = blp_lowrank(&d.u, ells, noise, &d.y)?;
    Ok(BlpTrial {
        whitened: frobenius_sq(&(&w - &d.x)),
        blp: frobenius_sq(&(&b - &d.x)),
        optshrink: frobenius_sq(&(&o - &d.x)),
    })
}

pub(super) fn run(p: &BlpParams, ctx: &RunCtx) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("fig-blp", SCHEMA);
    let trials = ctx.trials(p.trials);
    report.set("effective_trials", trials);
    for (ki, &kappa) in p.kappas.iter().enumerate() {
        let noise = make_noise_cov(p.p, kappa, SpectrumProfile::UnitNormLinspace, EigenBasis::Coordinate, 0)?;
        for (ni, &n) in p.ns.iter().enumerate() {
            let cfg = ki * p.ns.len() + ni;
            let res = run_trials(ctx, cfg, trials, |_, seed| trial(p.p, n, &p.ells, &noise, seed))?;
            let pick = |f: fn(&BlpTrial) -> f64| res.iter().map(f).collect::<Vec<f64>>();
            let gw: Vec<f64> = res.iter().map(|t| t.whitened - t.blp).collect();
            let go: Vec<f64> = res.iter().map(|t| t.optshrink - t.blp).collect();
            report.push(vec![
                kappa.into(),
                n.into(),
                mean(&pick(|t| t.whitened)).into(),
                mean(&pick(|t| t.blp)).into(),
                mean(&pick(|t| t.optshrink)).into(),
                std_err(&gw).into(),
                std_err(&go).into(),
            ]);
        }
    }
    Ok(report)
}
