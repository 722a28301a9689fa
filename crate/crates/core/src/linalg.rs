//! Dense complex linear algebra on finite-dimensional Hilbert spaces.
//!
//! Tensor products follow the convention that the left factor carries the
//! most significant index, so `|i⟩ ⊗ |j⟩` sits at position `i * d_B + j`.
//! Entropies are in bits with `0 log 0 = 0`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Complex double.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMat = DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = DVector<C64>;

/// Hermiticity tolerance (max-abs entry of `A - A†`).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue for a density matrix.
pub const PSD_TOL: f64 = 1e-10;

/// Shorthand for a real complex number.
#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A vector in a finite-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket(CVec);

impl Ket {
    /// Wraps a column vector.
    pub fn from_vector(v: CVec) -> Self {
        Ket(v)
    }

    /// Builds a ket from its amplitudes.
    pub fn from_amplitudes(amps: &[C64]) -> Self {
        Ket(CVec::from_column_slice(amps))
    }

    /// Builds a ket with real amplitudes.
    pub fn from_real(amps: &[f64]) -> Self {
        Ket(CVec::from_iterator(amps.len(), amps.iter().map(|&x| c(x))))
    }

    /// Computational basis vector `|index⟩` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Dimension(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = CVec::zeros(dim);
        v[index] = c(1.0);
        Ok(Ket(v))
    }

    /// Zero vector.
    pub fn zeros(dim: usize) -> Self {
        Ket(CVec::zeros(dim))
    }

    /// Dimension of the ambient space.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Underlying column vector.
    pub fn vector(&self) -> &CVec {
        &self.0
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.0.dotc(&other.0)
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &Ket) -> Ket {
        Ket(self.0.kronecker(&other.0))
    }

    /// Scaled copy.
    pub fn scale(&self, s: C64) -> Ket {
        Ket(&self.0 * s)
    }

    /// Sum of two kets.
    pub fn add(&self, other: &Ket) -> Ket {
        Ket(&self.0 + &other.0)
    }

    /// Difference of two kets.
    pub fn sub(&self, other: &Ket) -> Ket {
        Ket(&self.0 - &other.0)
    }

    /// Rank-one operator `|self⟩⟨self|`.
    pub fn projector(&self) -> Operator {
        Operator(&self.0 * self.0.adjoint())
    }

    /// Amplitudes are all real to within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.0.iter().all(|z| z.im.abs() <= tol)
    }
}

/// A linear operator on a finite-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(CMat);

impl Operator {
    /// Wraps a matrix.
    pub fn from_matrix(m: CMat) -> Self {
        Operator(m)
    }

    /// Builds an operator from a real matrix.
    pub fn from_real(m: &DMatrix<f64>) -> Self {
        Operator(m.map(c))
    }

    /// Zero operator.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Operator(CMat::zeros(rows, cols))
    }

    /// Identity on a space of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        Operator(CMat::identity(dim, dim))
    }

    /// Diagonal operator with real entries.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMat::zeros(n, n);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = c(x);
        }
        Operator(m)
    }

    /// Underlying matrix.
    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    /// Consumes the wrapper.
    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        if self.cols() != other.rows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(Operator(&self.0 * &other.0))
    }

    /// Applies the operator to a ket.
    pub fn apply(&self, k: &Ket) -> Result<Ket> {
        if self.cols() != k.dim() {
            return Err(Error::Dimension(format!(
                "cannot apply {}x{} operator to ket of dimension {}",
                self.rows(),
                self.cols(),
                k.dim()
            )));
        }
        Ok(Ket(&self.0 * k.vector()))
    }

    /// Sum of two operators of equal shape.
    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same_shape(other)?;
        Ok(Operator(&self.0 + &other.0))
    }

    /// Difference of two operators of equal shape.
    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.check_same_shape(other)?;
        Ok(Operator(&self.0 - &other.0))
    }

    /// Real multiple.
    pub fn scale(&self, s: f64) -> Operator {
        Operator(&self.0 * c(s))
    }

    /// Trace.
    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `Tr(self · other)`.
    pub fn trace_product(&self, other: &Operator) -> Result<C64> {
        if self.cols() != other.rows() || self.rows() != other.cols() {
            return Err(Error::Dimension("trace of product needs matching shapes".into()));
        }
        Ok(trace_of_product(&self.0, &other.0))
    }

    /// Expectation value `⟨k|self|k⟩`.
    pub fn expectation(&self, k: &Ket) -> Result<C64> {
        let v = self.apply(k)?;
        Ok(k.inner(&v))
    }

    /// Largest absolute entry of `self - self†`.
    pub fn hermitian_deviation(&self) -> f64 {
        if self.rows() != self.cols() {
            return f64::INFINITY;
        }
        max_abs_diff(&self.0, &self.0.adjoint())
    }

    /// Hermitian to within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(self + self†) / 2`.
    pub fn hermitian_part(&self) -> Operator {
        Operator((&self.0 + self.0.adjoint()) * c(0.5))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return f64::INFINITY;
        }
        max_abs_diff(&self.0, &other.0)
    }

    /// All entries have vanishing imaginary part.
    pub fn is_real(&self, tol: f64) -> bool {
        self.0.iter().all(|z| z.im.abs() <= tol)
    }

    fn check_same_shape(&self, other: &Operator) -> Result<()> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(Error::Dimension(format!(
                "shape {}x{} differs from {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(())
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Validates an operator against the density-matrix tolerances.
    pub fn new(op: Operator) -> Result<Self> {
        if op.rows() != op.cols() {
            return Err(Error::InvalidDensity(format!(
                "not square ({}x{})",
                op.rows(),
                op.cols()
            )));
        }
        let dev = op.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace is {tr}")));
        }
        let (vals, _) = eig_hermitian(&op)?;
        if vals[0] < -PSD_TOL {
            return Err(Error::InvalidDensity(format!(
                "smallest eigenvalue {:.3e} is negative",
                vals[0]
            )));
        }
        Ok(DensityMatrix(op))
    }

    /// Pure state `|k⟩⟨k| / ⟨k|k⟩`.
    pub fn from_ket(k: &Ket) -> Result<Self> {
        let n = k.norm();
        if n == 0.0 {
            return Err(Error::InvalidDensity("zero ket".into()));
        }
        DensityMatrix::new(k.scale(c(1.0 / n)).projector().hermitian_part())
    }

    /// `I / dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(Operator::identity(dim).scale(1.0 / dim as f64))
    }

    /// Dimension of the state space.
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    /// The underlying operator.
    pub fn operator(&self) -> &Operator {
        &self.0
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> &CMat {
        self.0.matrix()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        // Validated at construction, so the decomposition cannot fail.
        eig_hermitian(&self.0).map(|(v, _)| v).unwrap_or_default()
    }

    /// `Tr(ρ A)` as a real number (imaginary part discarded).
    pub fn expectation(&self, a: &Operator) -> Result<f64> {
        Ok(self.0.trace_product(a)?.re)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    Operator(a.matrix().kronecker(b.matrix()))
}

/// Kronecker product of a list of operators (left to right).
pub fn tensor_all(ops: &[&Operator]) -> Result<Operator> {
    let mut it = ops.iter();
    let first = it
        .next()
        .ok_or_else(|| Error::Dimension("empty tensor product".into()))?;
    Ok(it.fold((*first).clone(), |acc, o| tensor(&acc, o)))
}

/// Traces out every subsystem not listed in `keep`.
///
/// `dims` lists the subsystem dimensions; `keep` must be strictly increasing.
/// The result retains the kept subsystems in their original order.
pub fn partial_trace(m: &Operator, dims: &[usize], keep: &[usize]) -> Result<Operator> {
    let total: usize = dims.iter().product();
    if m.rows() != total || m.cols() != total {
        return Err(Error::Dimension(format!(
            "operator is {}x{} but subsystem dimensions multiply to {total}",
            m.rows(),
            m.cols()
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("invalid kept subsystems {keep:?}")));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kdims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let kdim: usize = kdims.iter().product();
    let tdim: usize = tdims.iter().product();

    // Strides of each subsystem in the full index.
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let full_index = |kidx: usize, tidx: usize| -> usize {
        let mut idx = 0;
        let mut r = kidx;
        for (pos, &sub) in keep.iter().enumerate().rev() {
            idx += (r % kdims[pos]) * strides[sub];
            r /= kdims[pos];
        }
        let mut r = tidx;
        for (pos, &sub) in traced.iter().enumerate().rev() {
            idx += (r % tdims[pos]) * strides[sub];
            r /= tdims[pos];
        }
        idx
    };

    let src = m.matrix();
    let mut out = CMat::zeros(kdim, kdim);
    for a in 0..kdim {
        for b in 0..kdim {
            let mut s = C64::new(0.0, 0.0);
            for t in 0..tdim {
                s += src[(full_index(a, t), full_index(b, t))];
            }
            out[(a, b)] = s;
        }
    }
    Ok(Operator(out))
}

/// Eigen-decomposition of a Hermitian operator.
///
/// Returns ascending eigenvalues and the matching orthonormal eigenvectors as
/// the columns of a unitary.
pub fn eig_hermitian(h: &Operator) -> Result<(Vec<f64>, Operator)> {
    if h.rows() != h.cols() {
        return Err(Error::Dimension("eigen-decomposition needs a square matrix".into()));
    }
    let dev = h.hermitian_deviation();
    let scale = h.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-9 * (1.0 + scale) {
        return Err(Error::NotHermitian(dev));
    }
    let (vals, vecs) = eigh(&h.hermitian_part().0)?;
    Ok((vals, Operator(vecs)))
}

/// Ascending eigen-decomposition of a Hermitian matrix (no checks).
pub(crate) fn eigh(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), 1e-15, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigen-decomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((vals, vecs))
}

/// Shannon entropy in bits of a list of weights, ignoring non-positive entries.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.eigenvalues())
}

/// Entropy in bits of an arbitrary positive semidefinite operator, without
/// trace normalisation (eigenvalues below zero are treated as zero).
pub fn operator_entropy(m: &Operator) -> Result<f64> {
    let (vals, _) = eig_hermitian(m)?;
    Ok(shannon_entropy(&vals))
}

/// Real embedding `[[Re H, -Im H], [Im H, Re H]]` of a complex matrix.
///
/// For Hermitian `H` the result is real symmetric and its spectrum is that
/// of `H` with every eigenvalue doubled in multiplicity.
pub fn complex_to_real_embedding(h: &Operator) -> DMatrix<f64> {
    let (r, cdim) = (h.rows(), h.cols());
    let m = h.matrix();
    let mut out = DMatrix::<f64>::zeros(2 * r, 2 * cdim);
    for i in 0..r {
        for j in 0..cdim {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + cdim)] = z.re;
            out[(i, j + cdim)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

/// `Tr(a b)` without forming the product.
pub(crate) fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub(crate) fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
