//! Dense complex linear-algebra helpers used by the beamformer designs.
//!
//! Everything here works on small matrices (a handful of antennas), so the
//! helpers favour clarity over blocking or in-place tricks.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Orthonormal basis (as columns) of the right nullspace of `m`.
///
/// Singular values at or below `max(rows, cols) * eps * sigma_max` count as
/// zero. A matrix with no rows has the whole space as its nullspace.
pub fn nullspace(m: &CMatrix) -> CMatrix {
    let (rows, cols) = m.shape();
    if rows == 0 {
        return CMatrix::identity(cols, cols);
    }
    // Pad with zero rows so the SVD returns a full set of right singular vectors.
    let padded_rows = rows.max(cols);
    let mut sq = CMatrix::zeros(padded_rows, cols);
    sq.rows_mut(0, rows).copy_from(m);
    let svd = SVD::new(sq, false, true);
    let v = svd.v_t.expect("right singular vectors requested").adjoint();
    let sigma_max = svd.singular_values.max();
    let tol = padded_rows as f64 * f64::EPSILON * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    v.columns(rank, cols - rank).into_owned()
}

/// Numerical rank under the same threshold as [`nullspace`].
pub fn rank(m: &CMatrix) -> usize {
    m.ncols() - nullspace(m).ncols()
}

/// Dominant right singular vector and its squared singular value.
pub fn dominant_right_singular(m: &CMatrix) -> (CVector, f64) {
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let s = svd.singular_values[0];
    (v_t.row(0).adjoint(), s * s)
}

/// Dominant left singular vector of `m`.
pub fn dominant_left_singular(m: &CMatrix) -> CVector {
    let svd = SVD::new(m.clone(), true, false);
    svd.u
        .expect("left singular vectors requested")
        .column(0)
        .into_owned()
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn hermitian_max_eigenvalue(m: &CMatrix) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

/// `Q^{-1/2}` for a Hermitian positive definite `Q`, via eigendecomposition.
pub fn hermitian_inv_sqrt(q: &CMatrix) -> Result<CMatrix> {
    let eig = SymmetricEigen::new(q.clone());
    if let Some(&bad) = eig
        .eigenvalues
        .iter()
        .find(|&&l| l <= 0.0 || !l.is_finite())
    {
        return Err(Error::Numerical(format!(
            "matrix is not positive definite (eigenvalue {bad:e})"
        )));
    }
    let scales = eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0));
    let v = &eig.eigenvectors;
    Ok(v * CMatrix::from_diagonal(&scales) * v.adjoint())
}

/// Solves `a x = b` for Hermitian positive definite `a`.
pub fn solve_hpd(a: &CMatrix, b: &CVector) -> Result<CVector> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Cholesky factorization failed".into()))?;
    Ok(chol.solve(b))
}

/// Distance between `a` and `b` after rotating `a` by the common phase that
/// best aligns it with `b`.
pub fn phase_aligned_distance(a: &CVector, b: &CVector) -> f64 {
    let ip = a.dotc(b);
    let phase = if ip.norm() > 0.0 {
        ip / ip.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    (b - a * phase).norm()
}

/// Unit-norm copy of `v`. Zero vectors are returned unchanged.
pub fn normalized(v: &CVector) -> CVector {
    let n = v.norm();
    if n > 0.0 {
        v.unscale(n)
    } else {
        v.clone()
    }
}

/// `v v^H`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// `|a^H b|^2`.
pub fn abs2_inner(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm_sqr()
}
