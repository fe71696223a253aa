use super::{check, col, parse, unknown, Cell, Column, ExperimentReport, Params, RunCtx};
use crate::error::Result;
use crate::noise::linspace;
use crate::spectral_params::{cos_inn, cos_out, cos_unwhitened, ell_w_invert, ComponentEstimate, ModelAggregates};
use crate::sv_shrinkage::{naive_t, optimal_t, population_t};

const SCHEMA: &[Column] = &[
    col("sigma_w", "whitened singular value"),
    col("t_opt", "singular value"),
    col("t_naive", "singular value"),
    col("t_pop", "singular value"),
];

pub(super) struct CurveParams {
    gamma: f64,
    tau: f64,
    mu_eps: f64,
    sigma_max: f64,
    points: usize,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams { gamma: 0.5, tau: 1.0, mu_eps: 1.0, sigma_max: 6.0, points: 501 }
    }
}

impl Params for CurveParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "gamma" => {
                self.gamma = parse(key, value)?;
                check(key, self.gamma > 0.0, "must be positive")
            }
            "tau" => {
                self.tau = parse(key, value)?;
                check(key, self.tau > 0.0, "must be positive")
            }
            "mu_eps" => {
                self.mu_eps = parse(key, value)?;
                check(key, self.mu_eps > 0.0, "must be positive")
            }
            "sigma_max" => {
                self.sigma_max = parse(key, value)?;
                check(key, self.sigma_max > 0.0, "must be positive")
            }
            "points" => {
                self.points = parse(key, value)?;
                check(key, self.points >= 2, "need at least two points")
            }
            _ => Err(unknown(key)),
        }
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("gamma", self.gamma.to_string()),
            ("tau", self.tau.to_string()),
            ("mu_eps", self.mu_eps.to_string()),
            ("sigma_max", self.sigma_max.to_string()),
            ("points", self.points.to_string()),
        ]
    }
}

/// Component parameters for a whitened singular value when `τ` and `μ_ε`
/// are given rather than estimated.
fn component(sigma_w: f64, gamma: f64, tau: f64, mu: f64) -> ComponentEstimate {
    let Some(ell_w) = ell_w_invert(sigma_w, gamma) else {
        return ComponentEstimate::below_threshold(sigma_w);
    };
    let c_w = cos_out(ell_w, gamma);
    let s_w = (1.0 - c_w * c_w).max(0.0).sqrt();
    ComponentEstimate {
        sigma_w,
        ell_w,
        c_w,
        s_w,
        c_tilde: cos_inn(ell_w, gamma),
        tau,
        ell: ell_w / tau,
        c: cos_unwhitened(c_w, s_w, mu, tau),
        above_threshold: true,
        demoted: false,
    }
}

pub(super) fn run(p: &CurveParams, _ctx: &RunCtx) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("shrinker-curves", SCHEMA);
    let agg = ModelAggregates { gamma: p.gamma, mu_eps: p.mu_eps, p: 0, n: 0, r: 1 };
    for sigma in linspace(0.0, p.sigma_max, p.points) {
        let c = component(sigma, p.gamma, p.tau, p.mu_eps);
        let row: Vec<Cell> = if c.above_threshold {
            vec![sigma.into(), optimal_t(&c, &agg).into(), naive_t(&c).into(), population_t(&c).into()]
        } else {
            vec![sigma.into(), 0.0.into(), 0.0.into(), 0.0.into()]
        };
        report.push(row);
    }
    Ok(report)
}
