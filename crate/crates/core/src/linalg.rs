//! Small dense linear-algebra helpers shared by the model modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Singular value cutoff `sigma_max * max(rows, cols) * eps`.
pub fn rank_tolerance(sigma_max: f64, rows: usize, cols: usize) -> f64 {
    sigma_max * rows.max(cols) as f64 * f64::EPSILON
}

/// Thin SVD `m = U diag(s) Vᵀ`, singular values nonincreasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

// nalgebra's implicit-shift bidiagonal iteration can return a wrong
// factorization for exactly rank-deficient products such as X·B with
// rank(B) < d, so the decomposition comes from faer. nalgebra is only the
// fallback if faer reports non-convergence.
pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return ThinSvd { u: DMatrix::zeros(rows, 0), singular_values: DVector::zeros(0), v: DMatrix::zeros(cols, 0) };
    }
    match to_faer(m).thin_svd() {
        Ok(svd) => {
            let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
            ThinSvd {
                u: DMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
                singular_values: DVector::from_fn(k, |i, _| s[i]),
                v: DMatrix::from_fn(cols, k, |i, j| v[(i, j)]),
            }
        }
        Err(_) => {
            let svd = m.clone().svd(true, true);
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            ThinSvd {
                u: DMatrix::from_fn(rows, k, |i, j| u[(i, order[j])]),
                singular_values: DVector::from_fn(k, |i, _| svd.singular_values[order[i]]),
                v: DMatrix::from_fn(cols, k, |i, j| vt[(order[j], i)]),
            }
        }
    }
}

/// Singular values, nonincreasing.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    thin_svd(m).singular_values
}

/// Number of singular values above [`rank_tolerance`].
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = singular_values(m);
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    let tol = rank_tolerance(smax, m.nrows(), m.ncols());
    sv.iter().filter(|&&s| s > tol).count()
}

/// Rank of a symmetric PSD matrix from its eigenvalues, using the same
/// scale-invariant rule applied to `|eigenvalue|`.
pub fn psd_rank_from_eigenvalues(eigenvalues: &[f64], dim: usize) -> usize {
    let emax = eigenvalues.iter().fold(0.0_f64, |m, &e| m.max(e.abs()));
    if emax <= 0.0 {
        return 0;
    }
    let tol = rank_tolerance(emax, dim, dim);
    eigenvalues.iter().filter(|&&e| e > tol).count()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky of `(m + mᵀ)/2`. No jitter is added: a failure is reported.
pub fn spd_cholesky(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    let sym = symmetrize(m);
    let min_pivot = sym.diagonal().min();
    Cholesky::new(sym).ok_or(Error::NotPositiveDefinite {
        what,
        dim: m.nrows(),
        min_pivot,
    })
}

pub fn cholesky_log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// descending and eigenvector columns permuted to match.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let k = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(k, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), k);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn standard_normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill; the order is part of the reproducibility contract
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn standard_normal_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Minimum-norm least-squares solution `A⁺ y` through the SVD, discarding
/// singular values at or below [`rank_tolerance`]. Returns the solution and
/// the numerical rank that was used.
pub fn min_norm_solve(a: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, usize) {
    let d = a.ncols();
    if a.is_empty() {
        return (DVector::zeros(d), 0);
    }
    let svd = thin_svd(a);
    let (u, v) = (&svd.u, &svd.v);
    let smax = svd.singular_values.max();
    let tol = rank_tolerance(smax, a.nrows(), a.ncols());
    let mut theta = DVector::zeros(d);
    let mut rank = 0;
    if smax <= 0.0 {
        return (theta, 0);
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            rank += 1;
            let coef = u.column(k).dot(y) / s;
            theta.axpy(coef, &v.column(k), 1.0);
        }
    }
    (theta, rank)
}

/// Orthonormal basis for the column space of a full-column-rank matrix
/// (thin QR, signs fixed so the R diagonal is positive).
pub fn orthonormalize_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthogonal projector onto the column space of `m`, built from the left
/// singular vectors above the rank threshold.
pub fn column_space_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = m.nrows();
    let mut proj = DMatrix::zeros(rows, rows);
    if m.is_empty() {
        return proj;
    }
    let svd = thin_svd(m);
    let u = &svd.u;
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return proj;
    }
    let tol = rank_tolerance(smax, m.nrows(), m.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let col = u.column(k);
            proj += col * col.transpose();
        }
    }
    proj
}
