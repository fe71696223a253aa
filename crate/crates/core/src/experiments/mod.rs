//! Named simulation experiments. Each one has a typed parameter set that
//! accepts `key=value` overrides, runs its trials on a shared thread pool,
//! and returns an [`ExperimentReport`] whose rows depend only on the
//! parameters and the master seed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix_io::fmt_f64;
use crate::rng::trial_seed;

mod blp;
mod comparison;
mod cosines;
mod curves;
mod discrepancies;
mod estcov;
mod histograms;
mod nongaussian;
mod oos;

/// Overrides as given on the command line.
pub type Overrides = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            Cell::Text(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) => f.write_str(&fmt_f64(*x)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub name: String,
    /// Every input needed to regenerate the rows, in a stable order.
    pub config: Vec<(String, String)>,
    pub schema: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl ExperimentReport {
    fn new(name: &str, schema: &[Column]) -> Self {
        ExperimentReport { name: name.to_string(), config: Vec::new(), schema: schema.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.schema.len(), "row does not match the {} schema", self.name);
        self.rows.push(row);
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    /// Numeric values of one column, in row order.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .column_index(name)
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no column {name}", self.name)))?;
        self.rows
            .iter()
            .map(|r| r[k].as_f64().ok_or_else(|| Error::Format(format!("column {name} is not numeric"))))
            .collect()
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.schema.iter().map(|c| c.name))?;
        for row in &self.rows {
            out.write_record(row.iter().map(|c| c.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Plain `key=value` lines: the configuration, then one `unit.<column>`
    /// line per column.
    pub fn write_config<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "experiment={}", self.name)?;
        for (k, v) in &self.config {
            writeln!(w, "{k}={v}")?;
        }
        for c in &self.schema {
            writeln!(w, "unit.{}={}", c.name, c.unit)?;
        }
        Ok(())
    }

    /// Writes `<name>.csv` and `<name>.config` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        let cfg_path = dir.join(format!("{}.config", self.name));
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(&csv_path)?))?;
        self.write_config(std::io::BufWriter::new(std::fs::File::create(&cfg_path)?))?;
        Ok((csv_path, cfg_path))
    }
}

/// Typed parameter set of one experiment.
trait Params: Default {
    fn set(&mut self, key: &str, value: &str) -> Result<()>;
    fn entries(&self) -> Vec<(&'static str, String)>;
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| Error::InvalidOverride { key: key.to_string(), reason: e.to_string() })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items = value.split(',').map(|v| parse(key, v)).collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::InvalidOverride { key: key.into(), reason: "empty list".into() });
    }
    Ok(items)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn unknown(key: &str) -> Error {
    Error::InvalidOverride { key: key.into(), reason: "unknown parameter".into() }
}

fn check(key: &str, ok: bool, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidOverride { key: key.into(), reason: reason.into() })
    }
}

/// Settings shared by every experiment run.
#[derive(Debug, Clone, Copy)]
struct RunCtx {
    seed: u64,
    scale: f64,
}

impl RunCtx {
    /// Trial count after the global scale factor; never below one.
    fn trials(&self, base: usize) -> usize {
        ((base as f64 * self.scale).ceil() as usize).max(1)
    }

    fn trial_seed(&self, config: usize, trial: usize) -> u64 {
        trial_seed(self.seed, config as u32, trial as u32)
    }
}

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

/// Worker pool sized by `HS_THREADS` (all cores when unset). BLAS runs
/// single-threaded so results do not depend on the thread count.
fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        unsafe { openblas_set_num_threads(1) };
        let threads = std::env::var("HS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to build the worker pool")
    })
}

/// Runs `f(trial, seed)` for every trial of configuration `config`; results
/// come back in trial order.
fn run_trials<T, F>(ctx: &RunCtx, config: usize, trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync + Send,
{
    pool().install(|| (0..trials).into_par_iter().map(|t| f(t, ctx.trial_seed(config, t))).collect())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean.
fn std_err(xs: &[f64]) -> f64 {
    let k = xs.len();
    if k < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

pub struct ExperimentInfo {
    pub name: &'static str,
    pub summary: &'static str,
}

pub const EXPERIMENTS: &[ExperimentInfo] = &[
    ExperimentInfo { name: "shrinker-curves", summary: "optimal, naive and population shrinkers over a grid of whitened singular values" },
    ExperimentInfo { name: "fig-blp", summary: "prediction error of whitened shrinkage and OptShrink against the best linear predictor as n grows" },
    ExperimentInfo { name: "fig-comparison", summary: "relative prediction error of optimal, naive and unwhitened shrinkage across gamma and kappa" },
    ExperimentInfo { name: "fig-comparison-cov", summary: "relative covariance error of whitened optimal, whitened population and unwhitened eigenvalue shrinkage" },
    ExperimentInfo { name: "fig-cosines", summary: "singular-vector cosines with and without whitening across kappa" },
    ExperimentInfo { name: "fig-estcov", summary: "prediction error with a sample noise covariance from n' pure-noise draws" },
    ExperimentInfo { name: "fig-discrepancies", summary: "gap between predicted and realized error as p grows" },
    ExperimentInfo { name: "fig-oos", summary: "in-sample against out-of-sample prediction error per trial" },
    ExperimentInfo { name: "fig-histograms", summary: "top singular values of raw and whitened data, with both rank estimates" },
    ExperimentInfo { name: "table-nongaussian", summary: "gap between limiting and observed cosines under non-Gaussian noise" },
];

fn dispatch<P: Params>(
    name: &str,
    overrides: &Overrides,
    seed: u64,
    run: fn(&P, &RunCtx) -> Result<ExperimentReport>,
) -> Result<ExperimentReport> {
    let mut params = P::default();
    let mut scale = 1.0;
    for (k, v) in overrides {
        if k == "scale" {
            scale = parse(k, v)?;
            check(k, scale > 0.0 && f64::is_finite(scale), "must be positive")?;
        } else {
            params.set(k, v)?;
        }
    }
    let ctx = RunCtx { seed, scale };
    let mut report = run(&params, &ctx)?;
    debug_assert_eq!(report.name, name);
    let mut config = vec![("seed".to_string(), seed.to_string()), ("scale".to_string(), scale.to_string())];
    config.extend(params.entries().into_iter().map(|(k, v)| (k.to_string(), v)));
    config.append(&mut report.config);
    report.config = config;
    Ok(report)
}

/// Runs a named experiment with `overrides` applied to its defaults.
pub fn run_experiment(name: &str, overrides: &Overrides, seed: u64) -> Result<ExperimentReport> {
    match name {
        "shrinker-curves" => dispatch(name, overrides, seed, curves::run),
        "fig-blp" => dispatch(name, overrides, seed, blp::run),
        "fig-comparison" => dispatch(name, overrides, seed, comparison::run_sv),
        "fig-comparison-cov" => dispatch(name, overrides, seed, comparison::run_cov),
        "fig-cosines" => dispatch(name, overrides, seed, cosines::run),
        "fig-estcov" => dispatch(name, overrides, seed, estcov::run),
        "fig-discrepancies" => dispatch(name, overrides, seed, discrepancies::run),
        "fig-oos" => dispatch(name, overrides, seed, oos::run),
        "fig-histograms" => dispatch(name, overrides, seed, histograms::run),
        "table-nongaussian" => dispatch(name, overrides, seed, nongaussian::run),
        _ => Err(Error::UnknownExperiment(name.to_string())),
    }
}

/// Default parameters of a named experiment.
pub fn default_params(name: &str) -> Result<Vec<(&'static str, String)>> {
    Ok(match name {
        "shrinker-curves" => curves::CurveParams::default().entries(),
        "fig-blp" => blp::BlpParams::default().entries(),
        "fig-comparison" => comparison::ComparisonParams::default().entries(),
        "fig-comparison-cov" => comparison::CovComparisonParams::default().entries(),
        "fig-cosines" => cosines::CosineParams::default().entries(),
        "fig-estcov" => estcov::EstCovParams::default().entries(),
        "fig-discrepancies" => discrepancies::DiscParams::default().entries(),
        "fig-oos" => oos::OosParams::default().entries(),
        "fig-histograms" => histograms::HistParams::default().entries(),
        "table-nongaussian" => nongaussian::NonGaussianParams::default().entries(),
        _ => return Err(Error::UnknownExperiment(name.to_string())),
    })
}

/// Parses `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::InvalidOverride { key: s.to_string(), reason: "expected key=value".into() }),
    }
}
