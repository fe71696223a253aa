//! Command-line front end. Matrix files hold raw samples as columns
//! (headerless CSV or HSMX); they are scaled by `1/√n` on load and
//! predictions are written back in the original units.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetshrink::experiments::{self, Overrides, EXPERIMENTS};
use hetshrink::matrix_io::{read_matrix, write_csv, write_matrix};
use hetshrink::rank_noise::{
    center_rows, diag_noise_var, estimate_rank_raw, estimate_rank_whitened, sample_noise_cov, scale_samples,
    unscale_samples, DEFAULT_EDGE_TRIALS, DEFAULT_RANK_EPS,
};
use hetshrink::{cov_estimate, shrink_predict, Error, LossFunction, Mat, NoiseModel, OosPredictor, Result, SvShrinker};

#[derive(Parser)]
#[command(name = "hetshrink", version, about = "Spectral shrinkage with noise whitening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a data matrix by whitened singular value shrinkage.
    Shrink {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, value_enum, default_value_t = ShrinkerArg::Optimal)]
        shrinker: ShrinkerArg,
        /// Output file (stdout when absent).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Estimate the signal covariance by eigenvalue shrinkage.
    Cov {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, value_enum, default_value_t = LossArg::Fro)]
        loss: LossArg,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit an out-of-sample predictor and save it.
    OosFit {
        #[command(flatten)]
        fit: FitArgs,
        /// Where to write the predictor.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Denoise new samples with a saved predictor.
    OosPredict {
        #[arg(long)]
        predictor: PathBuf,
        /// New samples, one per column.
        input: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Estimate the number of spikes.
    Rank {
        input: PathBuf,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Count whitened singular values above 1 + √γ + eps.
        #[arg(long, conflicts_with = "raw")]
        whitened: bool,
        /// Count raw singular values above a simulated noise edge + eps.
        #[arg(long)]
        raw: bool,
        #[arg(long, default_value_t = DEFAULT_RANK_EPS)]
        eps: f64,
        /// Noise draws used to locate the raw noise edge.
        #[arg(long, default_value_t = DEFAULT_EDGE_TRIALS)]
        edge_trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        center: bool,
    },
    /// Run a named simulation and write `<name>.csv` and `<name>.config`.
    Experiment {
        /// Experiment name; see --list.
        #[arg(required_unless_present = "list")]
        name: Option<String>,
        /// Parameter override `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplies every trial count.
        #[arg(long)]
        scale: Option<f64>,
        /// Output directory (CSV to stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// List experiments and their default parameters.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Data matrix, p rows by n sample columns.
    input: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Number of components; estimated from the whitened spectrum when absent.
    #[arg(long)]
    rank: Option<usize>,
    /// Subtract each row's mean first.
    #[arg(long)]
    center: bool,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct NoiseArgs {
    /// Dense p×p noise covariance.
    #[arg(long, value_name = "FILE")]
    noise_cov: Option<PathBuf>,
    /// Per-coordinate noise variances (one row or one column).
    #[arg(long, value_name = "FILE")]
    noise_diag: Option<PathBuf>,
    /// `sample:FILE` for pure-noise samples, or `diag` for per-coordinate
    /// variances of the data itself.
    #[arg(long, value_name = "METHOD")]
    estimate_noise: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShrinkerArg {
    Optimal,
    Naive,
    Population,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Fro,
    Op,
    Nuc,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Raw samples from `path`, optionally centered, in the scaled convention.
fn load_data(path: &Path, center: bool) -> Result<Mat> {
    let raw = read_matrix(path)?;
    if raw.ncols() < 2 {
        return Err(invalid(format!("{}: need at least two sample columns", path.display())));
    }
    let raw = if center { center_rows(&raw) } else { raw };
    Ok(scale_samples(&raw))
}

fn load_noise(args: &NoiseArgs, y: &Mat) -> Result<NoiseModel> {
    let noise = if let Some(path) = &args.noise_cov {
        NoiseModel::dense(read_matrix(path)?)?
    } else if let Some(path) = &args.noise_diag {
        let m = read_matrix(path)?;
        let values = match m.dim() {
            (_, 1) => m.column(0).to_owned(),
            (1, _) => m.row(0).to_owned(),
            (r, c) => return Err(invalid(format!("noise variances must be a single row or column, got {r}x{c}"))),
        };
        NoiseModel::diagonal(values)?
    } else {
        match args.estimate_noise.as_deref() {
            Some("diag") => diag_noise_var(y)?,
            Some(m) if m.starts_with("sample:") => {
                let est = sample_noise_cov(&read_matrix(Path::new(&m["sample:".len()..]))?)?;
                for w in &est.warnings {
                    log::warn!("{w}");
                }
                est.model
            }
            Some(m) => return Err(invalid(format!("unknown noise estimator `{m}`; use sample:FILE or diag"))),
            None => unreachable!("clap requires one noise source"),
        }
    };
    if noise.p() != y.nrows() {
        return Err(Error::DimensionMismatch {
            context: "noise covariance",
            expected: y.nrows().to_string(),
            found: noise.p().to_string(),
        });
    }
    Ok(noise)
}

fn resolve_rank(rank: Option<usize>, y: &Mat, noise: &NoiseModel) -> Result<usize> {
    match rank {
        Some(r) => Ok(r),
        None => {
            let gamma = y.nrows() as f64 / y.ncols() as f64;
            let r = estimate_rank_whitened(&noise.whiten(y)?, gamma, DEFAULT_RANK_EPS)?;
            log::info!("estimated rank {r}");
            Ok(r)
        }
    }
}

fn emit(m: &Mat, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_matrix(m, path),
        None => {
            let stdout = io::stdout();
            write_csv(m, stdout.lock())
        }
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Shrink { fit, shrinker, out } => {
            let y = load_data(&fit.input, fit.center)?;
            let noise = load_noise(&fit.noise, &y)?;
            let r = resolve_rank(fit.rank, &y, &noise)?;
            let shrinker = match shrinker {
                ShrinkerArg::Optimal => SvShrinker::Optimal,
                ShrinkerArg::Naive => SvShrinker::Naive,
                ShrinkerArg::Population => SvShrinker::Population,
            };
            let res = shrink_predict(&y, &noise, r, shrinker)?;
            warn_all(&res.warnings);
            emit(&unscale_samples(&res.xhat), out.as_deref())
        }
        Command::Cov { fit, loss, out } => {
            let y = load_data(&fit.input, fit.center)?;
            let noise = load_noise(&fit.noise, &y)?;
            let r = resolve_rank(fit.rank, &y, &noise)?;
            let loss = match loss {
                LossArg::Fro => LossFunction::Frobenius,
                LossArg::Op => LossFunction::Operator,
                LossArg::Nuc => LossFunction::Nuclear,
            };
            let est = cov_estimate(&y, &noise, r, &loss)?;
            warn_all(&est.warnings);
            emit(&est.sigma_x_hat, out.as_deref())
        }
        Command::OosFit { fit, out } => {
            let y = load_data(&fit.input, fit.center)?;
            let noise = load_noise(&fit.noise, &y)?;
            let r = resolve_rank(fit.rank, &y, &noise)?;
            let predictor = OosPredictor::fit(&y, &noise, r)?;
            let mut w = BufWriter::new(File::create(&out)?);
            predictor.write_to(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::OosPredict { predictor, input, out } => {
            let predictor = OosPredictor::read_from(BufReader::new(File::open(&predictor)?))?;
            // The predictor acts on each column separately, so no rescaling.
            let y0 = read_matrix(&input)?;
            emit(&predictor.predict_columns(&y0)?, out.as_deref())
        }
        Command::Rank { input, noise, whitened: _, raw, eps, edge_trials, seed, center } => {
            let y = load_data(&input, center)?;
            let noise = load_noise(&noise, &y)?;
            let r = if raw {
                let est = estimate_rank_raw(&y, &noise, eps, edge_trials, seed)?;
                log::info!("raw noise edge {}", est.edge);
                est.rank
            } else {
                let gamma = y.nrows() as f64 / y.ncols() as f64;
                estimate_rank_whitened(&noise.whiten(&y)?, gamma, eps)?
            };
            println!("{r}");
            Ok(())
        }
        Command::Experiment { name, set, seed, scale, out, list } => {
            if list {
                for e in EXPERIMENTS {
                    println!("{}: {}", e.name, e.summary);
                    for (k, v) in experiments::default_params(e.name)? {
                        println!("    {k}={v}");
                    }
                }
                return Ok(());
            }
            let name = name.expect("clap requires a name without --list");
            let mut overrides = Overrides::new();
            for s in &set {
                let (k, v) = experiments::parse_override(s)?;
                overrides.insert(k, v);
            }
            if let Some(scale) = scale {
                overrides.insert("scale".into(), scale.to_string());
            }
            let report = experiments::run_experiment(&name, &overrides, seed)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let (csv, cfg) = report.write_to_dir(&dir)?;
                    eprintln!("wrote {} and {}", csv.display(), cfg.display());
                    Ok(())
                }
                None => report.write_csv(io::stdout().lock()),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
