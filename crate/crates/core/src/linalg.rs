//! Dense helpers shared by the model, representation and scoring code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Deviation from symmetry above which ingestion logs a warning.
pub const SYMMETRY_WARN: f64 = 1e-8;
/// Deviation from symmetry above which ingestion fails.
pub const SYMMETRY_ERROR: f64 = 1e-4;

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let p = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in (i + 1)..p {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Returns `(A + Aᵀ)/2`, rejecting inputs that are far from symmetric.
pub fn symmetrize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let dev = max_asymmetry(a);
    if dev > SYMMETRY_ERROR {
        return Err(Error::Asymmetric(dev));
    }
    if dev > SYMMETRY_WARN {
        log::warn!("symmetrizing matrix with asymmetry {dev:e}");
    }
    Ok((a + a.transpose()) * 0.5)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Unit lower-triangular `L` and diagonal `d` with `A = L diag(d) Lᵀ`.
///
/// No pivoting: row `i` of `L` holds the regression of variable `i` on
/// variables `0..i` (negated through `L⁻¹`), which is exactly the sequential
/// projection the representation code needs. Fails when a pivot is not
/// positive relative to the diagonal scale.
pub fn ldlt(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = a.nrows();
    let scale = (0..p).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let floor = scale * 1e-14;
    let mut l = DMatrix::<f64>::identity(p, p);
    let mut d = DVector::<f64>::zeros(p);
    for j in 0..p {
        let mut dj = a[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        if !(dj > floor) {
            return Err(Error::Singular(format!(
                "pivot {j} of the LDLᵀ factorization is {dj:e}"
            )));
        }
        d[j] = dj;
        for i in (j + 1)..p {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok((l, d))
}

/// Inverse of a unit lower-triangular matrix by forward substitution.
pub fn unit_lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let mut inv = DMatrix::<f64>::identity(p, p);
    for col in 0..p {
        for i in (col + 1)..p {
            let mut s = 0.0;
            for k in col..i {
                s += l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -s;
        }
    }
    inv
}

/// Solves `A x = b` for symmetric positive-definite `A`.
///
/// A ridge of `1e-10 · trace(A)/dim` is added only when the plain Cholesky
/// factorization fails.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    let dim = a.nrows().max(1) as f64;
    let ridge = 1e-10 * a.trace() / dim;
    let mut reg = a.clone();
    for i in 0..a.nrows() {
        reg[(i, i)] += ridge;
    }
    match reg.cholesky() {
        Some(chol) => {
            log::warn!(
                "added ridge {ridge:e} to a near-singular {0}x{0} system",
                a.nrows()
            );
            Ok(chol.solve(b))
        }
        None => Err(Error::Numerical(format!(
            "{0}x{0} submatrix is singular even after ridge regularization",
            a.nrows()
        ))),
    }
}

/// `log det A` for symmetric positive-definite `A`.
pub fn log_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    Ok(chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum())
}

pub fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}
