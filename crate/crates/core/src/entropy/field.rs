//! Scalar abstraction so the structured solver runs in real arithmetic when
//! every operator of the program is real.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// `f64` or `Complex<f64>`.
pub(crate) trait Field: ComplexField<RealField = f64> + Copy + Send + Sync {
    /// Whether the field carries an imaginary part.
    const COMPLEX: bool;
    /// Converts from a complex number (imaginary part dropped for `f64`).
    fn from_c64(z: C64) -> Self;
    /// Converts into a complex number.
    fn into_c64(self) -> C64;
}

impl Field for f64 {
    const COMPLEX: bool = false;
    fn from_c64(z: C64) -> Self {
        z.re
    }
    fn into_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Field for C64 {
    const COMPLEX: bool = true;
    fn from_c64(z: C64) -> Self {
        z
    }
    fn into_c64(self) -> C64 {
        self
    }
}

pub(crate) fn from_cmat<T: Field>(m: &CMat) -> DMatrix<T> {
    m.map(T::from_c64)
}

pub(crate) fn to_cmat<T: Field>(m: &DMatrix<T>) -> CMat {
    m.map(T::into_c64)
}

/// `Re Tr(A† B)`.
pub(crate) fn re_inner<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x.conjugate() * *y).real())
        .sum()
}

/// Ascending eigen-decomposition of a Hermitian matrix.
pub(crate) fn eigh<T: Field>(m: &DMatrix<T>) -> Result<(Vec<f64>, DMatrix<T>)> {
    let n = m.nrows();
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(herm, 1e-15, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigen-decomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((vals, vecs))
}

/// Largest eigenvalue of a Hermitian matrix.
pub(crate) fn lambda_max<T: Field>(m: &DMatrix<T>) -> Result<f64> {
    let (vals, _) = eigh(m)?;
    vals.last()
        .copied()
        .ok_or_else(|| Error::Numerical("empty matrix".into()))
}

/// Nonzero entries of each element of the orthonormal basis of Hermitian
/// (or real symmetric) `n × n` matrices under `Re Tr(A† B)`, in the order
/// used by [`coordinates`].
pub(crate) fn basis_entries<T: Field>(n: usize) -> Vec<Vec<(usize, usize, T)>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in r..n {
            if r == c {
                out.push(vec![(r, r, T::one())]);
                continue;
            }
            out.push(vec![(r, c, T::from_real(s)), (c, r, T::from_real(s))]);
            if T::COMPLEX {
                out.push(vec![(r, c, T::from_c64(C64::new(0.0, s))), (c, r, T::from_c64(C64::new(0.0, -s)))]);
            }
        }
    }
    out
}

/// The basis of [`basis_entries`] as dense matrices.
#[cfg(test)]
pub(crate) fn hermitian_basis<T: Field>(n: usize) -> Vec<DMatrix<T>> {
    basis_entries::<T>(n)
        .into_iter()
        .map(|entries| {
            let mut m = DMatrix::<T>::zeros(n, n);
            for (r, c, v) in entries {
                m[(r, c)] = v;
            }
            m
        })
        .collect()
}

/// Coordinates of a Hermitian matrix in the basis of [`basis_entries`].
///
/// Only the nonzero entries of each (sparse) basis element are visited.
pub(crate) fn coordinates<T: Field>(m: &DMatrix<T>) -> Vec<f64> {
    let n = m.nrows();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in r..n {
            if r == c {
                out.push(m[(r, r)].real());
                continue;
            }
            // Re Tr(B m) with B = s(E_rc + E_cr): s (m_cr + m_rc)
            out.push(s * (m[(c, r)].real() + m[(r, c)].real()));
            if T::COMPLEX {
                // B = s(i E_rc - i E_cr): Re[i s m_cr - i s m_rc] = s (Im m_rc - Im m_cr)
                out.push(s * (m[(r, c)].imaginary() - m[(c, r)].imaginary()));
            }
        }
    }
    out
}

/// Inverse of [`coordinates`].
pub(crate) fn from_coordinates<T: Field>(x: &[f64], n: usize) -> DMatrix<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::<T>::zeros(n, n);
    let mut q = 0;
    for r in 0..n {
        for c in r..n {
            if r == c {
                m[(r, r)] = T::from_real(x[q]);
                q += 1;
                continue;
            }
            let re = s * x[q];
            q += 1;
            let im = if T::COMPLEX {
                q += 1;
                s * x[q - 1]
            } else {
                0.0
            };
            m[(r, c)] = T::from_c64(C64::new(re, im));
            m[(c, r)] = T::from_c64(C64::new(re, -im));
        }
    }
    m
}
