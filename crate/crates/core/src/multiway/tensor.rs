//! Column-major K-mode arrays: unfoldings and mode products.
//!
//! An array with dims `(m_1, …, m_K)` stores entry `(i_1, …, i_K)` at
//! `Σ_k i_k · Π_{j<k} m_j`. The mode-k unfolding is the `m_k × Π_{j≠k} m_j`
//! matrix whose columns enumerate the remaining indices with the earliest
//! mode varying fastest.

use nalgebra::DMatrix;

use crate::error::{BlinError, Result};

/// `(inner, m_k, outer)` block sizes around mode `k`.
pub(crate) fn split_dims(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let inner: usize = dims[..mode].iter().product();
    let outer: usize = dims[mode + 1..].iter().product();
    (inner, dims[mode], outer)
}

fn check(values: &[f64], dims: &[usize], mode: usize) -> Result<()> {
    if mode >= dims.len() {
        return Err(BlinError::Shape(format!("mode {mode} out of range for {} modes", dims.len())));
    }
    if values.len() != dims.iter().product::<usize>() {
        return Err(BlinError::Shape(format!("{} values do not fill dims {dims:?}", values.len())));
    }
    Ok(())
}

pub fn mode_matricize(values: &[f64], dims: &[usize], mode: usize) -> Result<DMatrix<f64>> {
    check(values, dims, mode)?;
    let (inner, m, outer) = split_dims(dims, mode);
    Ok(DMatrix::from_fn(m, inner * outer, |i, col| {
        let (a, c) = (col % inner, col / inner);
        values[a + inner * (i + m * c)]
    }))
}

/// Inverse of [`mode_matricize`].
pub fn fold(matrix: &DMatrix<f64>, dims: &[usize], mode: usize) -> Result<Vec<f64>> {
    if mode >= dims.len() {
        return Err(BlinError::Shape(format!("mode {mode} out of range for {} modes", dims.len())));
    }
    let (inner, m, outer) = split_dims(dims, mode);
    if matrix.shape() != (m, inner * outer) {
        return Err(BlinError::Shape(format!(
            "matrix {:?} cannot fold into dims {dims:?} along mode {mode}",
            matrix.shape()
        )));
    }
    let mut out = vec![0.0; inner * m * outer];
    for c in 0..outer {
        for i in 0..m {
            for a in 0..inner {
                out[a + inner * (i + m * c)] = matrix[(i, a + inner * c)];
            }
        }
    }
    Ok(out)
}

/// `X ×_k M`: entry `(…, i, …)` becomes `Σ_j M[i, j] X[…, j, …]`.
pub fn mode_product(values: &[f64], dims: &[usize], mode: usize, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check(values, dims, mode)?;
    let (inner, mk, outer) = split_dims(dims, mode);
    if m.ncols() != mk {
        return Err(BlinError::Shape(format!("factor has {} columns, mode has {mk}", m.ncols())));
    }
    let rows = m.nrows();
    let mut out = vec![0.0; inner * rows * outer];
    mode_product_into(values, (inner, mk, outer), m, &mut out, 1.0);
    Ok(out)
}

/// Accumulate `scale · (X ×_k M)` into `out` for a square `M`.
pub(crate) fn mode_product_into(
    values: &[f64],
    (inner, mk, outer): (usize, usize, usize),
    m: &DMatrix<f64>,
    out: &mut [f64],
    scale: f64,
) {
    let rows = m.nrows();
    for c in 0..outer {
        for j in 0..mk {
            let src = &values[inner * (j + mk * c)..inner * (j + mk * c + 1)];
            for i in 0..rows {
                let w = scale * m[(i, j)];
                if w == 0.0 {
                    continue;
                }
                let dst = &mut out[inner * (i + rows * c)..inner * (i + rows * c + 1)];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
}
