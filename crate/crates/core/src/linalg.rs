//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

pub fn vec_norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix is not invertible", m.nrows(), m.ncols())))
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let min = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn is_normal(a: &DMatrix<f64>) -> bool {
    let lhs = a * a.transpose();
    let rhs = a.transpose() * a;
    (lhs - rhs).norm() <= 1e-12 * (1.0 + a.norm() * a.norm())
}

pub fn is_idempotent(p: &DMatrix<f64>, tol: f64) -> bool {
    p.is_square() && (p * p - p).norm() <= tol * (1.0 + p.norm())
}

/// Rank of a projection, read off its trace.
pub fn projection_rank(p: &DMatrix<f64>) -> usize {
    p.trace().round().max(0.0) as usize
}

/// Orthonormal basis of the column space of `m` with `rank` columns.
pub fn column_basis(m: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let n = m.nrows();
    if rank == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    // nalgebra does not sort singular values; pick the largest ones.
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DMatrix::from_fn(n, rank, |r, c| u[(r, order[c])])
}

/// Orthonormalise the columns of a full-column-rank matrix.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let q = m.clone().qr().q();
    q.columns(0, m.ncols()).into_owned()
}

/// Projection onto span(`range`) along span(`kernel`); the two bases must
/// together span the whole space.
pub fn oblique_projection(range: &DMatrix<f64>, kernel: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = range.nrows();
    let k = range.ncols();
    if k + kernel.ncols() != n {
        return Err(Error::Dimension(format!(
            "subspace dimensions {k} + {} do not add up to {n}",
            kernel.ncols()
        )));
    }
    let mut basis = DMatrix::zeros(n, n);
    basis.columns_mut(0, k).copy_from(range);
    basis.columns_mut(k, n - k).copy_from(kernel);
    let inv = inverse(&basis)?;
    let mut sel = DMatrix::zeros(n, n);
    for i in 0..k {
        sel[(i, i)] = 1.0;
    }
    Ok(&basis * sel * inv)
}

/// Matrix sign function by scaled Newton iteration.
pub fn matrix_sign(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut s = a.clone();
    for _ in 0..100 {
        let det = s.determinant().abs();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular("matrix sign iteration hit a singular iterate".into()));
        }
        let c = det.powf(-1.0 / n as f64);
        let scaled = &s * c;
        let next = (&scaled + inverse(&scaled)?) * 0.5;
        let delta = (&next - &s).norm();
        s = next;
        if delta <= 1e-14 * s.norm().max(1.0) {
            return Ok(s);
        }
    }
    Ok(s)
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_of_diagonal_is_max_abs_entry() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert!((op_norm(&m) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sign_gives_stable_projection() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, 0.0, 2.0]);
        let s = matrix_sign(&a).unwrap();
        let p = (identity(2) - s) * 0.5;
        assert!(is_idempotent(&p, 1e-10));
        assert!((&a * &p - &p * &a).norm() < 1e-10);
        assert_eq!(projection_rank(&p), 1);
    }

    #[test]
    fn oblique_projection_is_idempotent() {
        let r = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let k = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let p = oblique_projection(&r, &k).unwrap();
        assert!(is_idempotent(&p, 1e-12));
        assert!((&p * &k).norm() < 1e-12);
        assert!((&p * &r - &r).norm() < 1e-12);
    }
}
