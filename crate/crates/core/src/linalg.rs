//! Small dense complex matrix helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Condition numbers above this raise [`Error::Conditioning`].
pub const MAX_CONDITION: f64 = 1e12;

pub fn identity(m: usize) -> CMat {
    CMat::identity(m, m)
}

pub fn scalar(v: C64) -> CMat {
    CMat::from_element(1, 1, v)
}

pub fn from_real(m: usize, n: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(m, n, data.iter().map(|&v| C64::new(v, 0.0)))
}

/// Frobenius norm.
pub fn norm(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse via LU with partial pivoting; `x` only labels the error.
pub fn inverse(a: &CMat, x: f64) -> Result<CMat> {
    if a.nrows() == 1 && a.ncols() == 1 {
        let v = a[(0, 0)];
        if v.norm() == 0.0 || !v.is_finite() {
            return Err(Error::Singular { x });
        }
        return Ok(scalar(v.inv()));
    }
    let inv = a.clone().lu().try_inverse().ok_or(Error::Singular { x })?;
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::Conditioning { x, cond });
    }
    Ok(inv)
}

pub fn det(a: &CMat) -> C64 {
    if a.nrows() == 1 {
        return a[(0, 0)];
    }
    a.clone().lu().determinant()
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint()
}

/// `(M - M*) / (2i)`, the Hermitian imaginary part.
pub fn im_part(m: &CMat) -> CMat {
    (m - m.adjoint()) / C64::new(0.0, 2.0)
}

/// `(M + M*) / 2`.
pub fn re_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    hermitian_eigen(h).0
}

/// Eigen-decomposition `H = V diag(w) V*` of a Hermitian matrix, ascending `w`.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let sym = re_part(h);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(h.nrows(), h.ncols());
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

pub fn min_eigenvalue(h: &CMat) -> f64 {
    hermitian_eigenvalues(h).first().copied().unwrap_or(f64::NAN)
}

/// Relative deviation from Hermitian symmetry, `‖A − A*‖ / max(‖A‖, tiny)`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = norm(a);
    let d = norm(&(a - a.adjoint()));
    if n == 0.0 {
        d
    } else {
        d / n
    }
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Apply `f` to the eigenvalues of a Hermitian matrix: `V diag(f(w)) V*`.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (w, v) = hermitian_eigen(h);
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        w.len(),
        w.iter().map(|&l| f(l)),
    ));
    &v * d * v.adjoint()
}

/// Bilinear form `(ξ, A η) = Σ conj(ξ_j) (Aη)_j`.
pub fn bilinear(xi: &[C64], a: &CMat, eta: &[C64]) -> C64 {
    let eta = nalgebra::DVector::from_column_slice(eta);
    let aeta = a * eta;
    xi.iter().zip(aeta.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Row-major `[re, im]` pairs: the JSON shape of a matrix in reports.
pub fn to_pairs(a: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
}

pub fn ser_mat<S: serde::Serializer>(a: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&to_pairs(a), s)
}

pub fn ser_mats<S: serde::Serializer>(a: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<_> = a.iter().map(to_pairs).collect();
    serde::Serialize::serialize(&v, s)
}

pub fn ser_opt_mat<S: serde::Serializer>(a: &Option<CMat>, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&a.as_ref().map(to_pairs), s)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    a.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_diagonal() {
        let a = from_real(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let inv = inverse(&a, 0.0).unwrap();
        assert!((inv[(1, 1)].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ill_conditioned_is_rejected() {
        let a = from_real(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        assert!(matches!(inverse(&a, 1.5), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn hermitian_eigenvalues_sorted() {
        let a = from_real(2, 2, &[0.0, 1.0, 1.0, 2.0]);
        let w = hermitian_eigenvalues(&a);
        let s = 2f64.sqrt();
        assert!((w[0] - (1.0 - s)).abs() < 1e-14);
        assert!((w[1] - (1.0 + s)).abs() < 1e-14);
    }

    #[test]
    fn im_part_of_complex_scalar() {
        let m = scalar(C64::new(1.0, -3.0));
        assert!((im_part(&m)[(0, 0)] - C64::new(-3.0, 0.0)).norm() < 1e-15);
    }
}
