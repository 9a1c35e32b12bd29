//! Dense linear-algebra helpers shared by the attack and divergence code.
//!
//! All channel and covariance matrices in this library are real-valued
//! (pure delay channels have 0/1 entries and every covariance built from
//! them stays real), while signal vectors are complex. Matrices are stored
//! as `DMatrix<f64>` and applied to complex vectors plane-by-plane, which
//! keeps Hermitian quadratic forms exactly real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix, after symmetrizing the input
/// to remove rounding skew from matrix products.
pub fn sym_eig(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// Moore-Penrose pseudoinverse of a positive semidefinite matrix, together
/// with its square computed in the same eigenbasis.
///
/// Eigenvalues below `rel_cutoff` times the largest eigenvalue are treated
/// as exact zeros. The square is formed by squaring the inverted spectrum,
/// not by multiplying two independently truncated pseudoinverses, so both
/// results share one cutoff decision.
pub struct PsdPinv {
    /// `M†`
    pub pinv: DMatrix<f64>,
    /// `(M†)²`
    pub pinv_sq: DMatrix<f64>,
    /// Number of spectral components retained.
    pub rank: usize,
}

/// Compute [`PsdPinv`] for a symmetric PSD matrix.
pub fn pinv_psd(m: &DMatrix<f64>, rel_cutoff: f64) -> PsdPinv {
    let (vals, vecs) = sym_eig(m);
    let lmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rel_cutoff * lmax;
    let mut inv = DVector::zeros(vals.len());
    let mut inv_sq = DVector::zeros(vals.len());
    let mut rank = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > cutoff {
            inv[i] = 1.0 / v;
            inv_sq[i] = 1.0 / (v * v);
            rank += 1;
        }
    }
    let pinv = &vecs * DMatrix::from_diagonal(&inv) * vecs.transpose();
    let pinv_sq = &vecs * DMatrix::from_diagonal(&inv_sq) * vecs.transpose();
    PsdPinv { pinv, pinv_sq, rank }
}

/// Result of factoring a nominally PSD matrix as `F·Fᵀ`.
pub struct PsdFactor {
    /// `N × r` factor with `r` the number of strictly positive eigenvalues.
    pub factor: DMatrix<f64>,
    /// Smallest eigenvalue of the input before clipping.
    pub min_eig: f64,
    /// True when an eigenvalue below `-eps_rel·λ_max` was clipped, i.e. the
    /// input was not PSD within tolerance.
    pub clipped_negative: bool,
}

/// Factor a symmetric matrix as `F·Fᵀ` through its eigendecomposition.
///
/// Eigenvalues in `[-eps_rel·λ_max, 0)` are rounding debris and are clipped
/// to zero silently; anything more negative is also clipped but reported
/// through [`PsdFactor::clipped_negative`]. Cholesky is not usable here
/// because the matrices of interest are singular at the optimum.
pub fn psd_factor(m: &DMatrix<f64>, eps_rel: f64) -> PsdFactor {
    let (vals, vecs) = sym_eig(m);
    let lmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let eps = eps_rel * lmax.max(f64::MIN_POSITIVE);
    let min_eig = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    // Spectrum within ±eps of zero is rounding debris on both sides.
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > eps).collect();
    let n = m.nrows();
    let mut factor = DMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        for row in 0..n {
            factor[(row, col)] = vecs[(row, i)] * s;
        }
    }
    PsdFactor {
        factor,
        min_eig,
        clipped_negative: min_eig < -eps,
    }
}

/// Inverse of a symmetric positive definite matrix, with diagonal loading
/// `1e-12·tr(M)/N` applied when the condition number exceeds `1e12`.
pub fn hermitian_inverse_loaded(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let (vals, vecs) = sym_eig(m);
    let lmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    if lmax <= 0.0 {
        return Err(Error::Numerical("matrix has no positive spectrum".into()));
    }
    let lmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin < -1e-10 * lmax {
        return Err(Error::Numerical(format!(
            "matrix is not PSD (min eigenvalue {lmin:.3e})"
        )));
    }
    let loading = if lmin <= lmax * 1e-12 {
        1e-12 * m.trace() / n as f64
    } else {
        0.0
    };
    let mut inv = DVector::zeros(n);
    for i in 0..n {
        inv[i] = 1.0 / (vals[i].max(0.0) + loading);
    }
    Ok(&vecs * DMatrix::from_diagonal(&inv) * vecs.transpose())
}

/// Apply a real matrix to a complex vector.
pub fn apply_real(m: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(m.ncols(), v.len(), "matrix/vector dimension mismatch");
    let re = DVector::from_iterator(v.len(), v.iter().map(|c| c.re));
    let im = DVector::from_iterator(v.len(), v.iter().map(|c| c.im));
    let ore = m * re;
    let oim = m * im;
    ore.iter()
        .zip(oim.iter())
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect()
}

/// Hermitian quadratic form `wᴴ M w` for a real symmetric `M` and complex
/// `w`. The cross terms of the real and imaginary planes cancel exactly,
/// so the result carries no imaginary residue at all.
pub fn quad_form(m: &DMatrix<f64>, w: &[Complex64]) -> f64 {
    assert_eq!(m.ncols(), w.len(), "matrix/vector dimension mismatch");
    let re = DVector::from_iterator(w.len(), w.iter().map(|c| c.re));
    let im = DVector::from_iterator(w.len(), w.iter().map(|c| c.im));
    re.dot(&(m * &re)) + im.dot(&(m * &im))
}

/// Quadratic form against a scaled identity: `wᴴ w · inv_scale`.
pub fn quad_form_scaled_identity(inv_scale: f64, w: &[Complex64]) -> f64 {
    w.iter().map(|c| c.norm_sqr()).sum::<f64>() * inv_scale
}

/// Squared Frobenius norm.
pub fn frob_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}
