//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{DoaError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

pub const J: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Returns `(A + Aᴴ)/2` and the largest entrywise deviation `|A - Aᴴ|/2`.
pub fn hermitian_part(a: &CMat) -> (CMat, f64) {
    let ah = a.adjoint();
    let max_asym = (a - &ah).iter().map(|z| z.norm()).fold(0.0, f64::max) / 2.0;
    ((a + ah) * c(0.5, 0.0), max_asym)
}

/// Hermitian eigen-decomposition with eigenvalues sorted ascending.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let (sym, _) = hermitian_part(a);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = a.nrows();
    let mut vecs = CMat::zeros(n, order.len());
    let mut vals = Vec::with_capacity(order.len());
    for (dst, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Numerical rank with the relative tolerance [`RANK_TOL`].
pub fn rank(a: &CMat) -> usize {
    let sv = singular_values(a);
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

pub fn rank_real(a: &RMat) -> usize {
    rank(&to_complex(a))
}

/// Moore-Penrose pseudo-inverse via SVD.
pub fn pinv(a: &CMat) -> CMat {
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.pseudo_inverse(RANK_TOL * max).expect("svd computed with both factors")
}

/// Hermitian square root of a PSD matrix; eigenvalues below `1e-14 * max` clamp to zero.
pub fn psd_sqrt(a: &CMat) -> CMat {
    let (vals, vecs) = eigh(a);
    let max = vals.iter().copied().fold(0.0, f64::max);
    let floor = 1e-14 * max;
    let d = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| c(if l > floor { l.sqrt() } else { 0.0 }, 0.0)),
    );
    &vecs * CMat::from_diagonal(&d) * vecs.adjoint()
}

/// Projector onto the orthogonal complement of the column space of `a`
/// (`I - A(AᴴA)⁻¹Aᴴ`), computed from a thin QR factorisation.
pub fn proj_perp(a: &CMat) -> CMat {
    let n = a.nrows();
    let q = a.clone().qr().q();
    CMat::identity(n, n) - &q * q.adjoint()
}

/// Condition number of a Hermitian PSD matrix from its eigenvalues.
pub fn hermitian_condition(a: &CMat) -> f64 {
    let (vals, _) = eigh(a);
    let max = vals.iter().copied().fold(f64::MIN, f64::max);
    let min = vals.iter().copied().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `A X = B` by LU and rejects systems whose 2-norm condition number exceeds `max_cond`.
pub fn solve_checked(a: &CMat, b: &CMat, what: &'static str, max_cond: f64) -> Result<CMat> {
    let sv = singular_values(a);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::MAX, f64::min);
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !cond.is_finite() || cond > max_cond {
        return Err(DoaError::IllConditioned { what, cond });
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(DoaError::IllConditioned { what, cond })
}

/// Column-major vectorisation.
pub fn vec_of(a: &CMat) -> CVec {
    CVec::from_column_slice(a.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v.as_slice())
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
