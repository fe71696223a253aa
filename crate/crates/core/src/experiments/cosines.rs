use super::{check, col, join, mean, parse, parse_list, run_trials, std_err, unknown, Column, ExperimentReport, Params, RunCtx};
use crate::error::Result;
use crate::linalg::truncated_svd;
use crate::noise::{make_noise_cov, EigenBasis, SpectrumProfile};
use crate::pca_metrics::{abs_cosines, unwhiten_pcs};
use crate::sim::{generate_dataset, SpikedModelSpec};

const SCHEMA: &[Column] = &[
    col("kappa", "condition number"),
    col("cos_u_white", "|<u, u_hat>|"),
    col("cos_u_raw", "|<u, u_hat>|"),
    col("cos_v_white", "|<v, v_hat>|"),
    col("cos_v_raw", "|<v, v_hat>|"),
    col("margin_u", "cos_u_white - cos_u_raw"),
    col("margin_u_se", "standard error of margin_u"),
];

pub(super) struct CosineParams {
    p: usize,
    n: usize,
    ell: f64,
    kappas: Vec<f64>,
    trials: usize,
}

impl Default for CosineParams {
    fn default() -> Self {
        CosineParams { p: 500, n: 1000, ell: 0.05, kappas: vec![1.0, 10.0, 100.0, 1000.0, 10000.0], trials: 50 }
    }
}

impl Params for CosineParams {
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
            "ell" => {
                self.ell = parse(key, value)?;
                check(key, self.ell > 0.0, "must be positive")
            }
            "kappas" => {
                self.kappas = parse_list(key, value)?;
                check(key, self.kappas.iter().all(|&k| k >= 1.0), "condition numbers must be >= 1")
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
            ("ell", self.ell.to_string()),
            ("kappas", join(&self.kappas)),
            ("trials", self.trials.to_string()),
        ]
    }
}

pub(super) fn run(p: &CosineParams, ctx: &RunCtx) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("fig-cosines", SCHEMA);
    let trials = ctx.trials(p.trials);
    report.set("effective_trials", trials);
    for (cfg, &kappa) in p.kappas.iter().enumerate() {
        let noise = make_noise_cov(p.p, kappa, SpectrumProfile::UnitNormLinspace, EigenBasis::Coordinate, 0)?;
        let spec = SpikedModelSpec::new(p.p, p.n, vec![p.ell], noise.clone());
        let res = run_trials(ctx, cfg, trials, |_, seed| {
            let d = generate_dataset(&spec, seed)?;
            let white = truncated_svd(&noise.whiten(&d.y)?, 1)?;
            let raw = truncated_svd(&d.y, 1)?;
            let uhat = unwhiten_pcs(&white.u, &noise)?;
            Ok([
                abs_cosines(&d.u, &uhat)[0],
                abs_cosines(&d.u, &raw.u)[0],
                abs_cosines(&d.z, &white.v)[0],
                abs_cosines(&d.z, &raw.v)[0],
            ])
        })?;
        let column = |k: usize| res.iter().map(|r| r[k]).collect::<Vec<f64>>();
        let margin: Vec<f64> = res.iter().map(|r| r[0] - r[1]).collect();
        report.push(vec![
            kappa.into(),
            mean(&column(0)).into(),
            mean(&column(1)).into(),
            mean(&column(2)).into(),
            mean(&column(3)).into(),
            mean(&margin).into(),
            std_err(&margin).into(),
        ]);
    }
    Ok(report)
}
