//! Dense symmetric eigendecomposition.
//!
//! Positive-type verification and kernel factorization both reduce to
//! the full spectrum of a real symmetric matrix. This module wraps the
//! LAPACK divide-and-conquer routine `dsyevd` from the system BLAS
//! library behind a safe interface returning eigenvalues in ascending
//! order with orthonormal eigenvectors as matrix columns.
//!
//! The first call pins the BLAS thread count to one (before the library
//! initializes its thread pool), so repeated runs reduce sums in the
//! same order and produce bit-identical spectra.

use nalgebra::DMatrix;
use std::sync::Once;

use crate::{Error, Result};

#[link(name = "openblas")]
extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
}

static PIN_BLAS_THREADS: Once = Once::new();

fn pin_blas_threads() {
    PIN_BLAS_THREADS.call_once(|| {
        // honored by the BLAS runtime when read before pool start-up
        if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
            std::env::set_var("OPENBLAS_NUM_THREADS", "1");
        }
    });
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Only the lower triangle is read. Returns `(eigenvalues, vectors)`
/// with eigenvalues ascending and the i-th column of `vectors` the unit
/// eigenvector of the i-th eigenvalue.
pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::Domain(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let n_usize = matrix.nrows();
    if n_usize == 0 {
        return Err(Error::Domain("eigendecomposition of an empty matrix".into()));
    }
    let n = i32::try_from(n_usize)
        .map_err(|_| Error::Domain(format!("matrix dimension {n_usize} exceeds i32")))?;
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "eigendecomposition input carries a non-finite value".into(),
        ));
    }
    pin_blas_threads();

    // column-major copy; overwritten with eigenvectors on exit
    let mut a: Vec<f64> = matrix.as_slice().to_vec();
    let mut w = vec![0.0f64; n_usize];
    let jobz = b'V';
    let uplo = b'L';
    let mut info: i32 = 0;

    // workspace query
    let mut work_query = [0.0f64; 1];
    let mut iwork_query = [0i32; 1];
    let neg_one: i32 = -1;
    unsafe {
        dsyevd_(
            &jobz,
            &uplo,
            &n,
            a.as_mut_ptr(),
            &n,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &neg_one,
            iwork_query.as_mut_ptr(),
            &neg_one,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Domain(format!(
            "eigensolver workspace query failed (info = {info})"
        )));
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];

    unsafe {
        dsyevd_(
            &jobz,
            &uplo,
            &n,
            a.as_mut_ptr(),
            &n,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Domain(format!(
            "eigensolver did not converge (info = {info})"
        )));
    }
    if w.iter().any(|v| !v.is_finite()) || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "eigensolver produced a non-finite value".into(),
        ));
    }
    let vectors = DMatrix::from_column_slice(n_usize, n_usize, &a);
    Ok((w, vectors))
}
