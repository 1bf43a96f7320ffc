//! Small dense-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn delete_row(a: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    a.clone().remove_row(r)
}

pub fn delete_row_col(a: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    a.clone().remove_row(r).remove_column(r)
}

pub fn delete_entry(v: &DVector<f64>, r: usize) -> DVector<f64> {
    v.clone().remove_row(r)
}

/// Determinant by LU with partial pivoting; the sign is preserved.
pub fn det(a: &DMatrix<f64>) -> f64 {
    a.clone().lu().determinant()
}

/// Determinant that must be strictly positive and finite (information
/// matrices at a maximum).
pub fn positive_det(a: &DMatrix<f64>, what: &str) -> Result<f64> {
    let d = det(a);
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Conditioning { what: what.to_string(), determinants: vec![d] })
    }
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Conditioning { what: what.to_string(), determinants: vec![det(a)] })
}

pub fn inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or_else(|| Error::Conditioning { what: what.to_string(), determinants: vec![det(a)] })
}

/// Stacks a row vector on top of a matrix with the same number of columns.
pub fn stack_row(top: &DVector<f64>, rest: &DMatrix<f64>) -> DMatrix<f64> {
    let p = top.len();
    debug_assert_eq!(rest.ncols(), p);
    let mut out = DMatrix::zeros(rest.nrows() + 1, p);
    out.row_mut(0).copy_from(&top.transpose());
    out.rows_mut(1, rest.nrows()).copy_from(rest);
    out
}

pub fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
