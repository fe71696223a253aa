//! Dense linear-algebra helpers shared by every estimator.
//!
//! Heavy lifting goes to LAPACK through `ndarray-linalg`. Leading singular
//! triplets of large matrices come from Golub-Kahan-Lanczos bidiagonalization
//! with full reorthogonalization, which only needs matrix-vector products and
//! is much cheaper than a full SVD when a handful of components is wanted.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::{EigValsh, Eigh, JobSvd, SVDDC, UPLO};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type Mat = Array2<f64>;
pub type Vector = Array1<f64>;

/// Matrices whose smaller side is at most this size use a dense SVD.
const DENSE_CUTOFF: usize = 64;

/// Relative residual at which a Lanczos Ritz triplet is accepted.
pub const LANCZOS_TOL: f64 = 1e-11;

/// Fixed seed for the Lanczos start vector, so results never depend on
/// caller RNG state.
const START_SEED: u64 = 0x6c61_6e63_7a6f_7321;

/// Leading singular triplets, ordered by decreasing singular value.
///
/// Signs are normalized so that the largest-magnitude entry of each left
/// vector is positive.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub s: Vector,
    pub v: Mat,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    fn empty(m: usize, n: usize) -> Self {
        Svd {
            u: Mat::zeros((m, 0)),
            s: Vector::zeros(0),
            v: Mat::zeros((n, 0)),
        }
    }
}

/// Top `k` singular triplets of `a`.
pub fn truncated_svd(a: &Mat, k: usize) -> Result<Svd> {
    truncated_svd_tol(a, k, LANCZOS_TOL)
}

pub fn truncated_svd_tol(a: &Mat, k: usize, tol: f64) -> Result<Svd> {
    let (m, n) = a.dim();
    let q = m.min(n);
    if k > q {
        return Err(Error::InvalidArgument(format!(
            "requested {k} singular triplets of a {m}x{n} matrix"
        )));
    }
    if k == 0 {
        return Ok(Svd::empty(m, n));
    }
    let mut svd = if q <= DENSE_CUTOFF || 3 * k >= q {
        dense_svd(a, k)?
    } else {
        lanczos_svd(a, k, tol)?
    };
    fix_signs(&mut svd);
    Ok(svd)
}

fn dense_svd(a: &Mat, k: usize) -> Result<Svd> {
    let (u, s, vt) = a.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Linalg("gesdd returned no left vectors".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("gesdd returned no right vectors".into()))?;
    Ok(Svd {
        u: u.slice(s![.., ..k]).to_owned(),
        s: s.slice(s![..k]).to_owned(),
        v: vt.slice(s![..k, ..]).t().to_owned(),
    })
}

fn random_unit(len: usize, rng: &mut ChaCha8Rng) -> Vector {
    let v: Vector = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let nrm = norm(&v.view());
    v / nrm
}

/// Two passes of classical Gram-Schmidt against `basis`.
fn reorthogonalize(w: &mut Vector, basis: &[Vector]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(w);
            w.scaled_add(-c, b);
        }
    }
}

/// A fresh unit vector orthogonal to `basis`.
fn orthogonal_restart(len: usize, basis: &[Vector], rng: &mut ChaCha8Rng) -> Vector {
    loop {
        let mut w = random_unit(len, rng);
        reorthogonalize(&mut w, basis);
        let nrm = norm(&w.view());
        if nrm > 1e-6 {
            return w / nrm;
        }
    }
}

fn lanczos_svd(a: &Mat, k: usize, tol: f64) -> Result<Svd> {
    let (m, n) = a.dim();
    let q = m.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);

    let mut us: Vec<Vector> = Vec::new();
    let mut vs: Vec<Vector> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut scale = 0.0_f64;

    let mut v = random_unit(n, &mut rng);
    let mut beta_prev = 0.0;
    let mut next_check = (2 * k).max(k + 8).min(q);

    loop {
        let j = alphas.len();
        let mut u = a.dot(&v);
        if j > 0 {
            u.scaled_add(-beta_prev, &us[j - 1]);
        }
        reorthogonalize(&mut u, &us);
        let mut alpha = norm(&u.view());
        scale = scale.max(alpha);
        if alpha <= 1e-14 * scale {
            alpha = 0.0;
            u = orthogonal_restart(m, &us, &mut rng);
        } else {
            u /= alpha;
        }
        let mut w = a.t().dot(&u);
        w.scaled_add(-alpha, &v);
        vs.push(v);
        us.push(u);
        alphas.push(alpha);
        let steps = j + 1;

        let mut beta = 0.0;
        if steps < q {
            reorthogonalize(&mut w, &vs);
            beta = norm(&w.view());
            scale = scale.max(beta);
            if beta <= 1e-14 * scale {
                beta = 0.0;
                w = orthogonal_restart(n, &vs, &mut rng);
            } else {
                w /= beta;
            }
        }
        betas.push(beta);

        if steps >= next_check || steps == q {
            let b = bidiagonal(&alphas, &betas);
            let (x, sig, yt) = b.svddc(JobSvd::All)?;
            let x = x.ok_or_else(|| Error::Linalg("bidiagonal SVD failed".into()))?;
            let yt = yt.ok_or_else(|| Error::Linalg("bidiagonal SVD failed".into()))?;
            let top = sig[0].max(f64::MIN_POSITIVE);
            let converged = steps == q
                || (0..k).all(|i| (beta * x[[steps - 1, i]]).abs() <= tol * top);
            if converged {
                let ub = columns_to_matrix(&us);
                let vb = columns_to_matrix(&vs);
                return Ok(Svd {
                    u: ub.dot(&x.slice(s![.., ..k])),
                    s: sig.slice(s![..k]).to_owned(),
                    v: vb.dot(&yt.slice(s![..k, ..]).t()),
                });
            }
            next_check = (steps + (steps / 8).max(4)).min(q);
        }
        v = w;
        beta_prev = beta;
    }
}

fn bidiagonal(alphas: &[f64], betas: &[f64]) -> Mat {
    let j = alphas.len();
    let mut b = Mat::zeros((j, j));
    for i in 0..j {
        b[[i, i]] = alphas[i];
        if i + 1 < j {
            b[[i, i + 1]] = betas[i];
        }
    }
    b
}

fn columns_to_matrix(cols: &[Vector]) -> Mat {
    let len = cols.first().map_or(0, |c| c.len());
    let mut out = Mat::zeros((len, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}

fn fix_signs(svd: &mut Svd) {
    for c in 0..svd.s.len() {
        if largest_entry_negative(&svd.u.column(c)) {
            svd.u.column_mut(c).mapv_inplace(|x| -x);
            svd.v.column_mut(c).mapv_inplace(|x| -x);
        }
    }
}

/// True when the entry of largest magnitude is negative (first one wins ties).
pub fn largest_entry_negative(x: &ArrayView1<f64>) -> bool {
    let mut best = 0.0_f64;
    let mut neg = false;
    for &e in x.iter() {
        if e.abs() > best {
            best = e.abs();
            neg = e < 0.0;
        }
    }
    neg
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn canonical_column_signs(m: &mut Mat) {
    for mut col in m.columns_mut() {
        if largest_entry_negative(&col.view()) {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// All `min(m, n)` singular values in decreasing order.
pub fn singular_values(a: &Mat) -> Result<Vector> {
    let (m, n) = a.dim();
    let q = m.min(n);
    if q == 0 {
        return Ok(Vector::zeros(0));
    }
    if q <= DENSE_CUTOFF {
        let (_, s, _) = a.svddc(JobSvd::None)?;
        return Ok(s);
    }
    let gram = if m <= n { a.dot(&a.t()) } else { a.t().dot(a) };
    let ev = gram.eigvalsh(UPLO::Lower)?;
    Ok(ev.iter().rev().map(|&l| l.max(0.0).sqrt()).collect())
}

/// Largest singular value.
pub fn op_norm(a: &Mat) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(truncated_svd(a, 1)?.s[0])
}

pub fn norm(x: &ArrayView1<f64>) -> f64 {
    x.dot(x).sqrt()
}

pub fn frobenius_sq(a: &Mat) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Eigenpairs of a symmetric matrix, eigenvalues in decreasing order.
pub fn sym_eigh(a: &Mat) -> Result<(Vector, Mat)> {
    let (vals, vecs) = a.eigh(UPLO::Lower)?;
    let p = vals.len();
    let order: Vec<usize> = (0..p).rev().collect();
    let vals: Vector = order.iter().map(|&i| vals[i]).collect();
    let vecs = vecs.select(Axis(1), &order);
    Ok((vals, vecs))
}

/// Eigenvalues of a symmetric matrix in decreasing order.
pub fn sym_eigvals(a: &Mat) -> Result<Vector> {
    let vals = a.eigvalsh(UPLO::Lower)?;
    Ok(vals.iter().rev().copied().collect())
}

pub fn is_symmetric(a: &Mat, tol: f64) -> bool {
    let (m, n) = a.dim();
    if m != n {
        return false;
    }
    let scale = a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(1.0);
    (0..m).all(|i| (0..i).all(|j| (a[[i, j]] - a[[j, i]]).abs() <= tol * scale))
}

/// Orthonormal basis for the column span of `a` (modified Gram-Schmidt, two
/// passes). Fails when the columns are numerically dependent.
pub fn orthonormalize_columns(a: &Mat) -> Result<Mat> {
    let (p, r) = a.dim();
    let mut q = Mat::zeros((p, r));
    for j in 0..r {
        let mut w = a.column(j).to_owned();
        let orig = norm(&w.view());
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let c = qi.dot(&w);
                w.scaled_add(-c, &qi);
            }
        }
        let nrm = norm(&w.view());
        if orig == 0.0 || nrm <= 1e-10 * orig {
            return Err(Error::InvalidArgument(format!(
                "column {j} is linearly dependent on the preceding columns"
            )));
        }
        q.column_mut(j).assign(&(w / nrm));
    }
    Ok(q)
}

/// Symmetric square root `B (BᵀB)^{-1/2}` orthonormalization of the columns,
/// the orthonormal set closest to `b` in Frobenius norm.
pub fn symmetric_orthonormalize(b: &Mat) -> Result<Mat> {
    let g = b.t().dot(b);
    let (vals, vecs) = sym_eigh(&g)?;
    if vals.iter().any(|&l| l <= 1e-14 * vals[0].max(f64::MIN_POSITIVE)) {
        return Err(Error::Linalg("columns are linearly dependent".into()));
    }
    let inv_sqrt = Vector::from_iter(vals.iter().map(|l| 1.0 / l.sqrt()));
    let scaled = &vecs * &inv_sqrt.insert_axis(Axis(0));
    Ok(b.dot(&scaled.dot(&vecs.t())))
}
