use super::{check, col, join, mean, parse, parse_list, run_trials, std_err, unknown, Column, ExperimentReport, Params, RunCtx};
use crate::error::Result;
use crate::linalg::{truncated_svd, Mat};
use crate::noise::{linspace, NoiseModel};
use crate::pca_metrics::{abs_cosines, unwhiten_pcs};
use crate::sim::{generate_dataset, EntryDist, PcGenerator, SpikedModelSpec};
use crate::spectral_params::population_components;

const SCHEMA: &[Column] = &[
    col("n", "samples"),
    col("dist", "noise entry distribution"),
    col("c", "limiting |<u, u_hat>|"),
    col("c_tilde", "limiting |<v, v_hat>|"),
    col("disc_u", "mean |c - |<u, u_hat>||"),
    col("disc_v", "mean |c_tilde - |<v, v_hat>||"),
    col("disc_u_se", "standard error of disc_u"),
];

pub(super) struct NonGaussianParams {
    ns: Vec<usize>,
    dists: Vec<EntryDist>,
    ell: f64,
    noise_lo: f64,
    noise_hi: f64,
    trials: usize,
}

impl Default for NonGaussianParams {
    fn default() -> Self {
        NonGaussianParams {
            ns: vec![1000, 2000, 4000, 8000],
            dists: vec![EntryDist::Gaussian, EntryDist::Rademacher, EntryDist::StudentT(10.0), EntryDist::StudentT(3.0)],
            ell: 1.0,
            noise_lo: 1.0 / 500.0,
            noise_hi: 1.0,
            trials: 2000,
        }
    }
}

impl Params for NonGaussianParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" | "ns" => {
                self.ns = parse_list(key, value)?;
                check(key, self.ns.iter().all(|&n| n >= 4), "need n >= 4")
            }
            "dist" | "dists" => {
                self.dists = parse_list(key, value)?;
                Ok(())
            }
            "ell" => {
                self.ell = parse(key, value)?;
                check(key, self.ell > 0.0, "must be positive")
            }
            "noise_lo" => {
                self.noise_lo = parse(key, value)?;
                check(key, self.noise_lo > 0.0, "must be positive")
            }
            "noise_hi" => {
                self.noise_hi = parse(key, value)?;
                check(key, self.noise_hi > 0.0, "must be positive")
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
            ("ns", join(&self.ns)),
            ("dists", join(&self.dists)),
            ("ell", self.ell.to_string()),
            ("noise_lo", self.noise_lo.to_string()),
            ("noise_hi", self.noise_hi.to_string()),
            ("trials", self.trials.to_string()),
        ]
    }
}

/// Rank one with `p = n/2`, a flat PC `1/√p`, and Gaussian factors; only the
/// noise entries change distribution.
pub(super) fn run(p: &NonGaussianParams, ctx: &RunCtx) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("table-nongaussian", SCHEMA);
    let trials = ctx.trials(p.trials);
    report.set("effective_trials", trials);
    for (ni, &n) in p.ns.iter().enumerate() {
        let dim = n / 2;
        let noise = NoiseModel::diagonal(linspace(p.noise_lo, p.noise_hi, dim))?;
        let u = Mat::from_elem((dim, 1), (dim as f64).sqrt().recip());
        let pop = population_components(&u, &[p.ell], &noise, dim as f64 / n as f64)?;
        let (c, ct) = (pop[0].c, pop[0].c_tilde);
        for (di, &dist) in p.dists.iter().enumerate() {
            let spec = SpikedModelSpec::new(dim, n, vec![p.ell], noise.clone())
                .with_pcs(PcGenerator::Fixed(u.clone()))
                .with_noise_dist(dist);
            let cfg = ni * p.dists.len() + di;
            let res = run_trials(ctx, cfg, trials, |_, seed| {
                let d = generate_dataset(&spec, seed)?;
                let svd = truncated_svd(&noise.whiten(&d.y)?, 1)?;
                let uhat = unwhiten_pcs(&svd.u, &noise)?;
                Ok([(c - abs_cosines(&u, &uhat)[0]).abs(), (ct - abs_cosines(&d.z, &svd.v)[0]).abs()])
            })?;
            let du: Vec<f64> = res.iter().map(|x| x[0]).collect();
            let dv: Vec<f64> = res.iter().map(|x| x[1]).collect();
            report.push(vec![
                n.into(),
                dist.to_string().into(),
                c.into(),
                ct.into(),
                mean(&du).into(),
                mean(&dv).into(),
                std_err(&du).into(),
            ]);
        }
    }
    Ok(report)
}
