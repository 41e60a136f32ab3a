//! Dense kernels backed by faer, exposed on nalgebra types.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

fn real_to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn complex_to_faer(a: &DMatrix<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Eigenvalues and right eigenvectors of a general real matrix.
pub fn eig_general(a: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let evd = real_to_faer(a)
        .eigen()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = (0..a.nrows()).map(|j| evd.S()[j]).collect();
    Ok((values, from_faer(evd.U())))
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    real_to_faer(a)
        .eigenvalues()
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Singular values in non-increasing order.
pub fn singular_values(a: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    complex_to_faer(a)
        .singular_values()
        .map_err(|e| Error::Eigen(format!("svd: {e:?}")))
}

pub fn smallest_singular_value(a: &DMatrix<Complex64>) -> Result<f64> {
    Ok(singular_values(a)?.last().copied().unwrap_or(0.0))
}

pub fn inverse(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let lu = complex_to_faer(a).partial_piv_lu();
    from_faer(lu.inverse().as_ref())
}

/// Moore–Penrose pseudoinverse, singular values below
/// `max(m, n) * eps * sigma_max` treated as zero.
pub fn pseudoinverse(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (m, n) = a.shape();
    let svd = complex_to_faer(a)
        .thin_svd()
        .map_err(|e| Error::Eigen(format!("svd: {e:?}")))?;
    let k = m.min(n);
    let s: Vec<f64> = (0..k).map(|i| svd.S()[i].re).collect();
    let cutoff = s.first().copied().unwrap_or(0.0) * (m.max(n) as f64) * f64::EPSILON;
    let u = svd.U();
    let v = svd.V();
    let mut out = DMatrix::zeros(n, m);
    for (r, &sr) in s.iter().enumerate() {
        if sr <= cutoff {
            continue;
        }
        let inv = 1.0 / sr;
        for j in 0..m {
            let uj = u[(j, r)].conj() * inv;
            for i in 0..n {
                out[(i, j)] += v[(i, r)] * uj;
            }
        }
    }
    Ok(out)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(g: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let evd = complex_to_faer(g)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = (0..g.nrows()).map(|i| evd.S()[i].re).collect();
    Ok((values, from_faer(evd.U())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pinv_of_tall_matrix_is_left_inverse() {
        let a = DMatrix::from_row_slice(
            3,
            2,
            &[
                c(1., 1.),
                c(0., 0.),
                c(2., 0.),
                c(1., -1.),
                c(0., 3.),
                c(1., 0.),
            ],
        );
        let p = pseudoinverse(&a).unwrap();
        let id = &p * &a;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pinv_of_rank_deficient_matrix_satisfies_penrose() {
        let a = DMatrix::from_row_slice(
            2,
            3,
            &[
                c(1., 0.),
                c(2., 0.),
                c(3., 0.),
                c(2., 0.),
                c(4., 0.),
                c(6., 0.),
            ],
        );
        let p = pseudoinverse(&a).unwrap();
        let apa = &a * &p * &a;
        assert!((apa - &a).norm() < 1e-12);
    }

    #[test]
    fn eig_of_rotation_is_conjugate_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let (vals, _) = eig_general(&a).unwrap();
        let mut ims: Vec<f64> = vals.iter().map(|v| v.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 2.0).abs() < 1e-12 && (ims[1] - 2.0).abs() < 1e-12);
    }
}
