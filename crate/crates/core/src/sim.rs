//! Spiked-model data generation: `Y = X + ε` with `X_j = Σ_k √ℓ_k z_jk u_k`
//! and `ε_j = Σ_ε^{1/2} g_j`, every column divided by `√n`.

use rand::Rng as _;
use rand::SeedableRng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_columns, Mat, Vector};
use crate::noise::NoiseModel;
use crate::rng::Rng;

/// Distribution of the i.i.d. unit-variance entries of `Z` and `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryDist {
    Gaussian,
    Rademacher,
    /// Student t with `df > 2` degrees of freedom, rescaled to unit variance.
    StudentT(f64),
}

impl EntryDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EntryDist::StudentT(df) if !(df > 2.0 && df.is_finite()) => Err(
                Error::InvalidArgument(format!("student t needs df > 2 for unit variance, got {df}")),
            ),
            _ => Ok(()),
        }
    }

    /// Fills a matrix with independent draws.
    pub fn sample_matrix(&self, rows: usize, cols: usize, rng: &mut Rng) -> Result<Mat> {
        self.validate()?;
        Ok(match *self {
            EntryDist::Gaussian => Mat::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng)),
            EntryDist::Rademacher => Mat::from_shape_simple_fn((rows, cols), || {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }),
            EntryDist::StudentT(df) => {
                let t = StudentT::new(df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let scale = ((df - 2.0) / df).sqrt();
                Mat::from_shape_simple_fn((rows, cols), || scale * t.sample(rng))
            }
        })
    }
}

impl std::str::FromStr for EntryDist {
    type Err = Error;

    /// `gaussian`, `rademacher`, or `t<df>` such as `t10`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(EntryDist::Gaussian),
            "rademacher" => Ok(EntryDist::Rademacher),
            _ => {
                let df = s
                    .strip_prefix("student_t")
                    .or_else(|| s.strip_prefix('t'))
                    .and_then(|d| d.trim_start_matches(['(', ':', '=']).trim_end_matches(')').parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown distribution `{s}`")))?;
                let d = EntryDist::StudentT(df);
                d.validate()?;
                Ok(d)
            }
        }
    }
}

impl std::fmt::Display for EntryDist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntryDist::Gaussian => write!(f, "gaussian"),
            EntryDist::Rademacher => write!(f, "rademacher"),
            EntryDist::StudentT(df) => write!(f, "t{df}"),
        }
    }
}

/// How the true principal components are drawn. All random variants are
/// orthonormalized by Gram-Schmidt in column order.
#[derive(Debug, Clone)]
pub enum PcGenerator {
    /// Independent uniformly random directions.
    UniformSphere,
    /// Component `k` has independent `N(0, v_k[i])` entries; each profile
    /// sums to 1. Zero variances give a random vector on a sub-support.
    VarianceProfile(Vec<Vector>),
    /// Component `k` is constant `1/√|S_k|` on the coordinate set `S_k`.
    SplitSupport(Vec<Vec<bool>>),
    /// Caller-supplied orthonormal columns.
    Fixed(Mat),
}

impl PcGenerator {
    /// Uniform first component, then two halves with random entries:
    /// zero on the first half, then zero on the second half.
    pub fn half_supports(p: usize) -> Self {
        let half = p / 2;
        let mut second = Vector::zeros(p);
        let mut third = Vector::zeros(p);
        for i in 0..p {
            if i >= half {
                second[i] = 1.0 / (p - half) as f64;
            } else {
                third[i] = 1.0 / half as f64;
            }
        }
        PcGenerator::VarianceProfile(vec![Vector::from_elem(p, 1.0 / p as f64), second, third])
    }

    /// Uniform first component; then linearly decreasing and linearly
    /// increasing variance profiles whose extreme ratio is `ratio`.
    pub fn graded_variances(p: usize, ratio: f64) -> Self {
        let ramp = crate::noise::linspace(1.0, ratio, p);
        let total = ramp.sum();
        let up = ramp / total;
        let down: Vector = up.iter().rev().copied().collect();
        PcGenerator::VarianceProfile(vec![Vector::from_elem(p, 1.0 / p as f64), down, up])
    }

    /// `r` disjoint contiguous blocks of (nearly) equal size.
    pub fn contiguous_blocks(p: usize, r: usize) -> Self {
        let masks = (0..r)
            .map(|k| (0..p).map(|i| i * r / p == k).collect())
            .collect();
        PcGenerator::SplitSupport(masks)
    }

    fn components(&self) -> Option<usize> {
        match self {
            PcGenerator::UniformSphere => None,
            PcGenerator::VarianceProfile(v) => Some(v.len()),
            PcGenerator::SplitSupport(m) => Some(m.len()),
            PcGenerator::Fixed(u) => Some(u.ncols()),
        }
    }

    fn validate(&self, p: usize, r: usize) -> Result<()> {
        if let Some(k) = self.components() {
            if k < r {
                return Err(Error::InvalidArgument(format!(
                    "PC generator describes {k} components but rank is {r}"
                )));
            }
        }
        match self {
            PcGenerator::UniformSphere => Ok(()),
            PcGenerator::VarianceProfile(profiles) => {
                for (k, v) in profiles.iter().take(r).enumerate() {
                    if v.len() != p {
                        return Err(Error::dims("variance profile", p, v.len()));
                    }
                    if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                        return Err(Error::InvalidArgument(format!("profile {k} has a negative entry")));
                    }
                    let s = v.sum();
                    if (s - 1.0).abs() > 1e-8 {
                        return Err(Error::InvalidArgument(format!("profile {k} sums to {s}, not 1")));
                    }
                }
                Ok(())
            }
            PcGenerator::SplitSupport(masks) => {
                for (k, m) in masks.iter().take(r).enumerate() {
                    if m.len() != p {
                        return Err(Error::dims("support mask", p, m.len()));
                    }
                    if !m.iter().any(|&b| b) {
                        return Err(Error::InvalidArgument(format!("support mask {k} is empty")));
                    }
                }
                Ok(())
            }
            PcGenerator::Fixed(u) => {
                if u.nrows() != p {
                    return Err(Error::dims("fixed PCs", format!("{p} rows"), format!("{} rows", u.nrows())));
                }
                let g = u.t().dot(u);
                for i in 0..u.ncols() {
                    for j in 0..u.ncols() {
                        let t = if i == j { 1.0 } else { 0.0 };
                        if (g[[i, j]] - t).abs() > 1e-10 {
                            return Err(Error::InvalidArgument("fixed PCs are not orthonormal".into()));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Draws a p×r orthonormal matrix.
    pub fn draw(&self, p: usize, r: usize, rng: &mut Rng) -> Result<Mat> {
        self.validate(p, r)?;
        let raw = match self {
            PcGenerator::UniformSphere => Mat::from_shape_simple_fn((p, r), || StandardNormal.sample(rng)),
            PcGenerator::VarianceProfile(profiles) => {
                let mut m = Mat::zeros((p, r));
                for (k, v) in profiles.iter().take(r).enumerate() {
                    for i in 0..p {
                        let g: f64 = StandardNormal.sample(rng);
                        m[[i, k]] = g * v[i].sqrt();
                    }
                }
                m
            }
            PcGenerator::SplitSupport(masks) => {
                let mut m = Mat::zeros((p, r));
                for (k, mask) in masks.iter().take(r).enumerate() {
                    let size = mask.iter().filter(|&&b| b).count() as f64;
                    for (i, &b) in mask.iter().enumerate() {
                        if b {
                            m[[i, k]] = size.sqrt().recip();
                        }
                    }
                }
                m
            }
            PcGenerator::Fixed(u) => return Ok(u.slice(ndarray::s![.., ..r]).to_owned()),
        };
        orthonormalize_columns(&raw)
    }
}

#[derive(Debug, Clone)]
pub struct SpikedModelSpec {
    pub p: usize,
    pub n: usize,
    /// Signal variances `ℓ_k`, one per component.
    pub ells: Vec<f64>,
    pub pcs: PcGenerator,
    pub factor_dist: EntryDist,
    pub noise_dist: EntryDist,
    pub noise: NoiseModel,
}

impl SpikedModelSpec {
    pub fn new(p: usize, n: usize, ells: Vec<f64>, noise: NoiseModel) -> Self {
        SpikedModelSpec {
            p,
            n,
            ells,
            pcs: PcGenerator::UniformSphere,
            factor_dist: EntryDist::Gaussian,
            noise_dist: EntryDist::Gaussian,
            noise,
        }
    }

    pub fn with_pcs(mut self, pcs: PcGenerator) -> Self {
        self.pcs = pcs;
        self
    }

    pub fn with_noise_dist(mut self, d: EntryDist) -> Self {
        self.noise_dist = d;
        self
    }

    pub fn with_factor_dist(mut self, d: EntryDist) -> Self {
        self.factor_dist = d;
        self
    }

    pub fn r(&self) -> usize {
        self.ells.len()
    }

    pub fn gamma(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("p and n must be positive".into()));
        }
        if self.r() > self.p.min(self.n) {
            return Err(Error::InvalidArgument(format!(
                "rank {} exceeds min(p, n) = {}",
                self.r(),
                self.p.min(self.n)
            )));
        }
        if self.ells.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("signal variances must be positive".into()));
        }
        if self.noise.p() != self.p {
            return Err(Error::dims("noise model", self.p, self.noise.p()));
        }
        self.factor_dist.validate()?;
        self.noise_dist.validate()?;
        self.pcs.validate(self.p, self.r())
    }

    /// Population signal covariance `Σ_k ℓ_k u_k u_kᵀ` for a given `U`.
    pub fn signal_cov(&self, u: &Mat) -> Mat {
        let scaled = u * &Vector::from(self.ells.clone()).insert_axis(ndarray::Axis(0));
        scaled.dot(&u.t())
    }
}

/// One draw from the spiked model. All p×n matrices carry the `1/√n`
/// column scaling.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Mat,
    pub x: Mat,
    pub eps: Mat,
    /// True principal components (p×r, orthonormal).
    pub u: Mat,
    /// Factor values (n×r, unit variance).
    pub z: Mat,
    pub spec: SpikedModelSpec,
    pub seed: u64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn signal_cov(&self) -> Mat {
        self.spec.signal_cov(&self.u)
    }
}

/// `n` scaled noise columns `W⁻¹ G / √n`.
pub fn sample_noise(noise: &NoiseModel, n: usize, dist: EntryDist, rng: &mut Rng) -> Result<Mat> {
    let g = dist.sample_matrix(noise.p(), n, rng)?;
    Ok(noise.unwhiten(&g)? / (n as f64).sqrt())
}

/// Draws `U`, then `Z`, then the noise, from a generator seeded by `seed`.
pub fn generate_dataset(spec: &SpikedModelSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Rng::seed_from_u64(seed);
    let (p, n, r) = (spec.p, spec.n, spec.r());
    let u = spec.pcs.draw(p, r, &mut rng)?;
    let z = spec.factor_dist.sample_matrix(n, r, &mut rng)?;
    let x = signal_from_factors(&u, &spec.ells, &z);
    let eps = sample_noise(&spec.noise, n, spec.noise_dist, &mut rng)?;
    let y = &x + &eps;
    Ok(Dataset { y, x, eps, u, z, spec: spec.clone(), seed })
}

/// Sample covariance `(1/m) Σ ε_i ε_iᵀ` of `m` Gaussian noise vectors. For
/// `m ≥ p` the Gram matrix is drawn through the Bartlett decomposition of
/// the Wishart distribution instead of materializing the p×m samples.
pub fn sample_noise_covariance(noise: &NoiseModel, m: usize, rng: &mut Rng) -> Result<Mat> {
    let p = noise.p();
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one noise sample".into()));
    }
    let root = noise.unwhitener();
    let factor = if m >= p {
        let mut l = Mat::zeros((p, p));
        for i in 0..p {
            let chi = ChiSquared::new((m - i) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            l[[i, i]] = chi.sample(rng).sqrt();
            for j in 0..i {
                l[[i, j]] = StandardNormal.sample(rng);
            }
        }
        root.dot(&l)
    } else {
        root.dot(&EntryDist::Gaussian.sample_matrix(p, m, rng)?)
    };
    let cov = factor.dot(&factor.t()) / m as f64;
    Ok((&cov + &cov.t()) * 0.5)
}

/// `U diag(√ℓ) Zᵀ / √n`.
pub fn signal_from_factors(u: &Mat, ells: &[f64], z: &Mat) -> Mat {
    let n = z.nrows();
    let w = Vector::from_iter(ells.iter().map(|l| l.sqrt() / (n as f64).sqrt()));
    let scaled = u * &w.insert_axis(ndarray::Axis(0));
    scaled.dot(&z.t())
}
