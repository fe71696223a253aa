use super::{check, col, join, mean, parse, parse_list, run_trials, std_err, unknown, Column, ExperimentReport, Params, RunCtx};
use crate::eig_shrinkage::{cov_estimate, cov_loss_lowrank, LossFunction};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, Mat, Vector};
use crate::noise::{make_noise_cov, EigenBasis, NoiseModel, SpectrumProfile};
use crate::optshrink::{optshrink_cov_factors, optshrink_predict};
use crate::sim::{generate_dataset, PcGenerator, SpikedModelSpec};
use crate::sv_shrinkage::{shrink_predict, SvShrinker};

const SV_SCHEMA: &[Column] = &[
    col("gamma", "p/n"),
    col("kappa", "condition number"),
    col("n", "samples"),
    col("err_optimal", "relative Frobenius error"),
    col("err_naive", "relative Frobenius error"),
    col("err_optshrink", "relative Frobenius error"),
    col("err_optimal_se", "standard error"),
];

const COV_SCHEMA: &[Column] = &[
    col("gamma", "p/n"),
    col("kappa", "condition number"),
    col("n", "samples"),
    col("err_optimal", "relative loss-norm error"),
    col("err_population", "relative loss-norm error"),
    col("err_optshrink", "relative loss-norm error"),
    col("err_optimal_se", "standard error"),
];

/// How the three signal magnitudes `γ^{1/4} + i·step` are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SpikeDomain {
    /// `ℓ_k = s_k²` in the original coordinates.
    Raw,
    /// `ℓ_k = s_k² / ‖W u_k‖²`, so that each whitened component has
    /// magnitude `s_k` (exact when the `W u_k` are orthogonal).
    Whitened,
}

impl std::str::FromStr for SpikeDomain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(SpikeDomain::Raw),
            "whitened" => Ok(SpikeDomain::Whitened),
            _ => Err(format!("expected raw or whitened, got `{s}`")),
        }
    }
}

impl std::fmt::Display for SpikeDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpikeDomain::Raw => "raw",
            SpikeDomain::Whitened => "whitened",
        })
    }
}

pub(super) struct ComparisonParams {
    p: usize,
    gammas: Vec<f64>,
    kappas: Vec<f64>,
    /// Spacing of the magnitudes `γ^{1/4} + i·step`.
    step: f64,
    variance_ratio: f64,
    spike_domain: SpikeDomain,
    /// Covariance loss; absent for the singular-value comparison.
    loss: Option<LossFunction>,
    trials: usize,
}

impl Default for ComparisonParams {
    fn default() -> Self {
        ComparisonParams {
            p: 1000,
            gammas: vec![0.25, 0.5, 1.0, 2.0],
            kappas: vec![1.0, 10.0, 100.0, 1000.0],
            step: 0.5,
            variance_ratio: 10.0,
            spike_domain: SpikeDomain::Raw,
            loss: None,
            trials: 50,
        }
    }
}

/// Same recipe with magnitudes `γ^{1/4} + i` and nuclear loss.
pub(super) struct CovComparisonParams(ComparisonParams);

impl Default for CovComparisonParams {
    fn default() -> Self {
        CovComparisonParams(ComparisonParams { step: 1.0, loss: Some(LossFunction::Nuclear), ..ComparisonParams::default() })
    }
}

impl Params for CovComparisonParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.0.set(key, value)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        self.0.entries()
    }
}

impl ComparisonParams {
    fn magnitudes(&self, gamma: f64) -> Vec<f64> {
        (1..=3).map(|i| gamma.powf(0.25) + i as f64 * self.step).collect()
    }
}

impl Params for ComparisonParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "p" => {
                self.p = parse(key, value)?;
                check(key, self.p >= 8, "need p >= 8")
            }
            "gammas" => {
                self.gammas = parse_list(key, value)?;
                check(key, self.gammas.iter().all(|&g| g > 0.0), "aspect ratios must be positive")
            }
            "kappas" => {
                self.kappas = parse_list(key, value)?;
                check(key, self.kappas.iter().all(|&k| k >= 1.0), "condition numbers must be >= 1")
            }
            "step" => {
                self.step = parse(key, value)?;
                check(key, self.step > 0.0, "must be positive")
            }
            "variance_ratio" => {
                self.variance_ratio = parse(key, value)?;
                check(key, self.variance_ratio >= 1.0, "must be >= 1")
            }
            "spike_domain" => {
                self.spike_domain = parse(key, value)?;
                Ok(())
            }
            "loss" if self.loss.is_some() => {
                self.loss = Some(parse(key, value)?);
                Ok(())
            }
            "trials" => {
                self.trials = parse(key, value)?;
                check(key, self.trials >= 1, "need at least one trial")
            }
            _ => Err(unknown(key)),
        }
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("p", self.p.to_string()),
            ("gammas", join(&self.gammas)),
            ("kappas", join(&self.kappas)),
            ("step", self.step.to_string()),
            ("variance_ratio", self.variance_ratio.to_string()),
            ("spike_domain", self.spike_domain.to_string()),
            ("trials", self.trials.to_string()),
        ];
        if let Some(loss) = &self.loss {
            out.push(("loss", loss.name().to_string()));
        }
        out
    }
}

struct Setup {
    n: usize,
    noise: NoiseModel,
    pcs: PcGenerator,
    magnitudes: Vec<f64>,
}

fn setups(p: &ComparisonParams) -> Result<Vec<(f64, f64, Setup)>> {
    let mut out = Vec::new();
    for &gamma in &p.gammas {
        let n = (p.p as f64 / gamma).round() as usize;
        if n < 4 {
            return Err(Error::InvalidOverride { key: "gammas".into(), reason: format!("gamma {gamma} leaves n < 4") });
        }
        for &kappa in &p.kappas {
            let noise = make_noise_cov(p.p, kappa, SpectrumProfile::LinspaceInvKappa, EigenBasis::Coordinate, 0)?;
            let pcs = PcGenerator::graded_variances(p.p, p.variance_ratio);
            out.push((gamma, kappa, Setup { n, noise, pcs, magnitudes: p.magnitudes(gamma) }));
        }
    }
    Ok(out)
}

/// Draws the PCs first so the spike sizes can depend on them, then the rest
/// of the dataset with those PCs held fixed.
fn draw(p: &ComparisonParams, s: &Setup, seed: u64) -> Result<crate::sim::Dataset> {
    let mut rng = crate::rng::rng_from_seed(seed);
    let u = s.pcs.draw(p.p, 3, &mut rng)?;
    let ells: Vec<f64> = match p.spike_domain {
        SpikeDomain::Raw => s.magnitudes.iter().map(|m| m * m).collect(),
        SpikeDomain::Whitened => {
            let wu = s.noise.whiten(&u)?;
            s.magnitudes
                .iter()
                .zip(wu.columns())
                .map(|(m, c)| m * m / c.dot(&c))
                .collect()
        }
    };
    let spec = SpikedModelSpec::new(p.p, s.n, ells, s.noise.clone()).with_pcs(PcGenerator::Fixed(u));
    generate_dataset(&spec, crate::rng::derive_seed(seed, 1))
}

fn relative(xhat: &Mat, x: &Mat) -> f64 {
    (frobenius_sq(&(xhat - x)) / frobenius_sq(x)).sqrt()
}

pub(super) fn run_sv(p: &ComparisonParams, ctx: &RunCtx) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("fig-comparison", SV_SCHEMA);
    let trials = ctx.trials(p.trials);
    report.set("effective_trials", trials);
    for (cfg, (gamma, kappa, s)) in setups(p)?.into_iter().enumerate() {
        let res = run_trials(ctx, cfg, trials, |_, seed| {
            let d = draw(p, &s, seed)?;
            let opt = shrink_predict(&d.y, &s.noise, 3, SvShrinker::Optimal)?.xhat;
            let naive = shrink_predict(&d.y, &s.noise, 3, SvShrinker::Naive)?.xhat;
            let os = optshrink_predict(&d.y, 3)?.xhat;
            Ok([relative(&opt, &d.x), relative(&naive, &d.x), relative(&os, &d.x)])
        })?;
        let column = |k: usize| res.iter().map(|r| r[k]).collect::<Vec<f64>>();
        report.push(vec![
            gamma.into(),
            kappa.into(),
            s.n.into(),
            mean(&column(0)).into(),
            mean(&column(1)).into(),
            mean(&column(2)).into(),
            std_err(&column(0)).into(),
        ]);
    }
    Ok(report)
}

pub(super) fn run_cov(p: &CovComparisonParams, ctx: &RunCtx) -> Result<ExperimentReport> {
    let p = &p.0;
    let loss = p.loss.clone().unwrap_or(LossFunction::Nuclear);
    let mut report = ExperimentReport::new("fig-comparison-cov", COV_SCHEMA);
    let trials = ctx.trials(p.trials);
    report.set("effective_trials", trials);
    let empty = Mat::zeros((p.p, 0));
    let none = Vector::zeros(0);
    for (cfg, (gamma, kappa, s)) in setups(p)?.into_iter().enumerate() {
        let res = run_trials(ctx, cfg, trials, |_, seed| {
            let d = draw(p, &s, seed)?;
            let truth = Vector::from(d.spec.ells.clone());
            let scale = cov_loss_lowrank(&loss, &d.u, &truth, &empty, &none)?;
            let err = |basis: &Mat, w: &Vector| -> Result<f64> {
                Ok(cov_loss_lowrank(&loss, basis, w, &d.u, &truth)? / scale)
            };
            let (ob, ow) = cov_estimate(&d.y, &s.noise, 3, &loss)?.factors();
            let (pb, pw) = cov_estimate(&d.y, &s.noise, 3, &LossFunction::Operator)?.factors();
            let (ub, uw) = optshrink_cov_factors(&d.y, 3, &loss)?;
            Ok([err(&ob, &ow)?, err(&pb, &pw)?, err(&ub, &uw)?])
        })?;
        let column = |k: usize| res.iter().map(|r| r[k]).collect::<Vec<f64>>();
        report.push(vec![
            gamma.into(),
            kappa.into(),
            s.n.into(),
            mean(&column(0)).into(),
            mean(&column(1)).into(),
            mean(&column(2)).into(),
            std_err(&column(0)).into(),
        ]);
    }
    Ok(report)
}
