//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative eigenvalue cutoff for pseudo-inverting Gram matrices.
///
/// Gram eigenvalues are squared singular values of the design, so this
/// corresponds to a singular-value ratio of about 3e-6. Rounding noise in
/// the eigenvalues sits near `n * eps`, well below the cutoff.
pub const GRAM_EIG_RTOL: f64 = 1e-11;

/// Relative singular-value cutoff for rank decisions on dense designs.
pub const SVD_RTOL: f64 = 1e-10;

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v)
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix via its
/// eigendecomposition. Returns the inverse and the retained rank.
pub fn pinv_symmetric(h: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let n = h.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if max_ev <= 0.0 {
        return (DMatrix::zeros(n, n), 0);
    }
    let cut = rel_tol * max_ev;
    let mut scaled = eig.eigenvectors.clone();
    let mut rank = 0;
    for (j, &ev) in eig.eigenvalues.iter().enumerate() {
        let w = if ev > cut {
            rank += 1;
            1.0 / ev
        } else {
            0.0
        };
        scaled.column_mut(j).scale_mut(w);
    }
    (&scaled * eig.eigenvectors.transpose(), rank)
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// General pseudo-inverse through the SVD with a relative singular-value cutoff.
///
/// The decomposition comes from faer: nalgebra's SVD can return factors
/// that do not reconstruct tall, well-conditioned inputs.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = to_faer(m).thin_svd().expect("SVD did not converge");
    let (u, v) = (svd.U(), svd.V());
    let sv = svd.S().column_vector();
    let smax = (0..sv.nrows()).map(|k| sv[k]).fold(0.0_f64, f64::max);
    let mut out = DMatrix::zeros(c, r);
    if smax == 0.0 {
        return out;
    }
    for k in 0..sv.nrows() {
        if sv[k] > rel_tol * smax {
            let inv = 1.0 / sv[k];
            for j in 0..r {
                let uj = u[(j, k)] * inv;
                for i in 0..c {
                    out[(i, j)] += v[(i, k)] * uj;
                }
            }
        }
    }
    out
}

/// Singular values of `m` in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv = to_faer(m).singular_values().expect("SVD did not converge");
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

pub fn numerical_rank(sv_desc: &[f64], rel_tol: f64) -> usize {
    match sv_desc.first() {
        Some(&smax) if smax > 0.0 => sv_desc.iter().filter(|&&s| s > rel_tol * smax).count(),
        _ => 0,
    }
}

pub fn matrix_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    numerical_rank(&singular_values(m), rel_tol)
}

/// Solves `a x = b` for symmetric positive semidefinite `a`.
///
/// Uses a Cholesky factorization when `a` is numerically positive definite
/// and falls back to the minimum-norm solution otherwise. The flag reports
/// whether the fallback was taken.
pub fn solve_psd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    if let Some(ch) = a.clone().cholesky() {
        let diag_min = ch.l_dirty().diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        let diag_max = ch.l_dirty().diagonal().iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        // reject factorizations of numerically singular matrices
        if diag_max > 0.0 && diag_min > 1e-7 * diag_max {
            return (ch.solve(b), false);
        }
    }
    let (inv, _) = pinv_symmetric(a, GRAM_EIG_RTOL);
    (inv * b, true)
}

/// Maximum modulus over the eigenvalues of a square matrix.
///
/// Computed from Gelfand's formula `ρ = lim ‖Mⁿ‖^{1/n}` by normalized
/// repeated squaring rather than a Schur decomposition: both nalgebra's and
/// faer's shifted QR can stall on Kronecker-structured operators with
/// clustered spectra, while squaring always terminates. After `j` squarings
/// the estimate is off by at most `log(κ nᵐ)/n` with `n = 2ʲ`, so 64 steps
/// leave only rounding error.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let scale = m.norm();
    if m.nrows() == 0 || scale == 0.0 {
        return 0.0;
    }
    let mut p = m / scale;
    let mut log_rho = scale.ln();
    let mut weight = 1.0;
    for _ in 0..64 {
        let sq = &p * &p;
        let c = sq.norm();
        if c == 0.0 {
            // nilpotent
            return 0.0;
        }
        weight *= 0.5;
        log_rho += weight * c.ln();
        p = sq / c;
    }
    log_rho.exp()
}
