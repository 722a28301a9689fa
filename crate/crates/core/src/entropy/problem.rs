//! The entropy program and its canonical conic form.
//!
//! For quadrature nodes `t_i` with weights `w_i` and key projectors
//! `P_a = |a⟩⟨a| ⊗ I_d`, the bound on `S(A|E)` in bits is
//!
//! ```text
//! c_m + Σ_i Σ_a α_i Tr[P_a (ζ + ζ† + (1 - t_i) η)] + α_i t_i Tr θ
//!   over σ, ζ, η, θ (one ζ, η, θ per node and key value)
//!   with [[σ, ζ], [ζ†, η]] ⪰ 0, [[σ, ζ†], [ζ, θ]] ⪰ 0,
//!        Tr σ = 1, Tr(E_k σ) = f_k,
//! ```
//!
//! where `α_i = w_i / (t_i ln 2)` and `c_m = Σ_i α_i`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, Operator};
use crate::povm::ConstraintSet;

use super::quadrature::Quadrature;

/// Tolerance on constraint values and per-setting normalisation.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// A fully specified entropy program.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    /// Dimension of each party's time space.
    pub d: usize,
    /// Quadrature rule.
    pub quadrature: Quadrature,
    /// Equality constraints `Tr(E_k σ) = f_k`, the trace constraint excluded.
    pub constraints: Vec<(Operator, f64)>,
    /// Key projectors `|a⟩⟨a| ⊗ I_d`.
    pub key_projectors: Vec<Operator>,
}

/// Projectors `|a⟩⟨a| ⊗ I_d` onto Alice's key values.
pub fn key_pinching_projectors(d: usize) -> Vec<Operator> {
    (0..d)
        .map(|a| {
            let diag: Vec<f64> = (0..d * d).map(|k| if k / d == a { 1.0 } else { 0.0 }).collect();
            Operator::diagonal(&diag)
        })
        .collect()
}

impl SdpProblem {
    /// Builds a program from arbitrary Hermitian constraints.
    ///
    /// Exact duplicates are removed.
    pub fn new(d: usize, quadrature: Quadrature, constraints: Vec<(Operator, f64)>) -> Result<Self> {
        let n = d * d;
        let mut kept: Vec<(Operator, f64)> = Vec::with_capacity(constraints.len());
        for (op, f) in constraints {
            if op.rows() != n || op.cols() != n {
                return Err(Error::Dimension(format!(
                    "constraint operator is {}x{}, expected {n}x{n}",
                    op.rows(),
                    op.cols()
                )));
            }
            let dev = op.hermitian_deviation();
            if dev > 1e-12 {
                return Err(Error::NotHermitian(dev));
            }
            if !f.is_finite() {
                return Err(Error::InvalidParameter("non-finite constraint value".into()));
            }
            let duplicate = kept
                .iter()
                .any(|(o, g)| (g - f).abs() <= 1e-14 && o.max_abs_diff(&op) <= 1e-14);
            if !duplicate {
                kept.push((op, f));
            }
        }
        Ok(SdpProblem { d, quadrature, constraints: kept, key_projectors: key_pinching_projectors(d) })
    }

    /// Dimension `d²` of the state space.
    pub fn n(&self) -> usize {
        self.d * self.d
    }

    /// Number of auxiliary blocks (one per node and key value).
    pub fn block_count(&self) -> usize {
        self.quadrature.m() * self.key_projectors.len()
    }

    /// All data are real, so the program is invariant under complex
    /// conjugation and a real symmetric `σ` attains the optimum.
    pub fn is_real(&self) -> bool {
        self.constraints.iter().all(|(o, _)| o.is_real(0.0))
            && self.key_projectors.iter().all(|p| p.is_real(0.0))
    }

    /// Dimension of the affine set of Hermitian `σ` meeting the equality
    /// constraints (zero when the constraints are informationally complete).
    pub fn sigma_free_dimension(&self) -> usize {
        let n = self.n();
        let rows: Vec<Vec<f64>> = std::iter::once(Operator::identity(n))
            .chain(self.constraints.iter().map(|(o, _)| o.clone()))
            .map(|o| hermitian_param_coeffs(o.matrix()))
            .collect();
        n * n - numerical_rank(&rows)
    }
}

/// Assembles the program for observed statistics.
///
/// Checks that every value lies in `[0, 1]` and that each setting's values
/// plus its omitted mass sum to one.
pub fn assemble_sdp(constraints: &ConstraintSet, quadrature: Quadrature) -> Result<SdpProblem> {
    for s in &constraints.settings {
        let mut total = s.omitted_mass;
        for c in &s.constraints {
            if c.value < -CONSTRAINT_TOL || c.value > 1.0 + CONSTRAINT_TOL {
                return Err(Error::InvalidParameter(format!(
                    "constraint {} of {} has value {} outside [0, 1]",
                    c.label, s.name, c.value
                )));
            }
            total += c.value;
        }
        if (total - 1.0).abs() > CONSTRAINT_TOL {
            return Err(Error::InvalidParameter(format!(
                "values of setting {} sum to {total}",
                s.name
            )));
        }
    }
    let list = constraints.iter().map(|c| (c.operator.clone(), c.value)).collect();
    SdpProblem::new(constraints.d, quadrature, list)
}

/// Coefficients `x ↦ Tr(A H(x))` for the Hermitian parametrisation of
/// [`hermitian_param_index`]: diagonal entries, then real and imaginary parts
/// of the strict upper triangle, row by row.
pub fn hermitian_param_coeffs(a: &CMat) -> Vec<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in r..n {
            if r == c {
                out.push(a[(r, r)].re);
            } else {
                out.push(2.0 * a[(r, c)].re);
                out.push(2.0 * a[(r, c)].im);
            }
        }
    }
    out
}

/// Hermitian parameter slots of an `n × n` matrix, in the order used by
/// [`hermitian_param_coeffs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HermitianParam {
    /// Real diagonal entry `(r, r)`.
    Diag(usize),
    /// `Re H_{rc}` for `r < c`.
    Re(usize, usize),
    /// `Im H_{rc}` for `r < c`.
    Im(usize, usize),
}

/// Enumerates the `n²` real parameters of a Hermitian `n × n` matrix.
pub fn hermitian_param_index(n: usize) -> Vec<HermitianParam> {
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in r..n {
            if r == c {
                out.push(HermitianParam::Diag(r));
            } else {
                out.push(HermitianParam::Re(r, c));
                out.push(HermitianParam::Im(r, c));
            }
        }
    }
    out
}

/// Rank of a set of real row vectors (Gram eigenvalues above a relative
/// threshold).
pub(crate) fn numerical_rank(rows: &[Vec<f64>]) -> usize {
    let k = rows.len();
    if k == 0 {
        return 0;
    }
    let gram = nalgebra::DMatrix::<f64>::from_fn(k, k, |i, j| {
        rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum()
    });
    let vals = gram.symmetric_eigenvalues();
    let top = vals.iter().copied().fold(0.0, f64::max);
    vals.iter().filter(|&&v| v > 1e-12 * top.max(1e-300)).count()
}

/// One nonzero entry of a variable's coefficient matrix in a PSD block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockEntry {
    /// Variable index.
    pub var: usize,
    /// Row within the block.
    pub row: usize,
    /// Column within the block.
    pub col: usize,
    /// Real part.
    pub re: f64,
    /// Imaginary part.
    pub im: f64,
}

/// A Hermitian linear matrix inequality `Σ_j x_j F_j ⪰ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdBlock {
    /// Human-readable tag, e.g. `gamma1[i=0,a=1]`.
    pub name: String,
    /// Complex dimension of the block.
    pub dim: usize,
    /// Dimension of the real symmetric embedding `[[Re, -Im], [Im, Re]]`.
    pub embedded_dim: usize,
    /// All nonzero coefficient entries (both triangles listed).
    pub entries: Vec<BlockEntry>,
}

/// A linear equality `Σ_j a_j x_j = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearEquality {
    /// Tag such as `trace` or the click label.
    pub name: String,
    /// Sparse coefficients `(var, value)`.
    pub coeffs: Vec<(usize, f64)>,
    /// Right-hand side.
    pub rhs: f64,
}

/// The program in solver-neutral form over real variables `x`:
/// minimise `objective_constant + objective · x` subject to the equalities
/// and every block being positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalSdp {
    /// Format tag.
    pub format: String,
    /// Constant `c_m`.
    pub objective_constant: f64,
    /// Number of real variables.
    pub n_vars: usize,
    /// Variable names (`sigma`, `zeta[i,a]`, `eta[i,a]`, `theta[i,a]` with
    /// the entry and part).
    pub var_names: Vec<String>,
    /// Linear objective coefficients.
    pub objective: Vec<f64>,
    /// Equality constraints.
    pub equalities: Vec<LinearEquality>,
    /// Linear matrix inequalities.
    pub psd_blocks: Vec<PsdBlock>,
}

/// Variable offsets of the canonical form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn sigma(&self) -> usize {
        0
    }
    fn block_base(&self, k: usize) -> usize {
        self.n * self.n + k * 4 * self.n * self.n
    }
    /// First of `2n²` entries: `Re ζ_{rc}`, `Im ζ_{rc}` at `2 (r n + c)`.
    pub fn zeta(&self, k: usize) -> usize {
        self.block_base(k)
    }
    pub fn eta(&self, k: usize) -> usize {
        self.block_base(k) + 2 * self.n * self.n
    }
    pub fn theta(&self, k: usize) -> usize {
        self.block_base(k) + 3 * self.n * self.n
    }
    pub fn total(&self, blocks: usize) -> usize {
        self.block_base(blocks)
    }
}

fn push_hermitian(
    entries: &mut Vec<BlockEntry>,
    base: usize,
    n: usize,
    row_off: usize,
    col_off: usize,
) {
    for (p, slot) in hermitian_param_index(n).into_iter().enumerate() {
        let var = base + p;
        let mut put = |row, col, re, im| entries.push(BlockEntry { var, row, col, re, im });
        match slot {
            HermitianParam::Diag(r) => put(row_off + r, col_off + r, 1.0, 0.0),
            HermitianParam::Re(r, c) => {
                put(row_off + r, col_off + c, 1.0, 0.0);
                put(row_off + c, col_off + r, 1.0, 0.0);
            }
            HermitianParam::Im(r, c) => {
                put(row_off + r, col_off + c, 0.0, 1.0);
                put(row_off + c, col_off + r, 0.0, -1.0);
            }
        }
    }
}

/// Places `ζ` at `(row_off, col_off)` and `ζ†` at the transposed position.
fn push_general(entries: &mut Vec<BlockEntry>, base: usize, n: usize, row_off: usize, col_off: usize) {
    for r in 0..n {
        for c in 0..n {
            let re = base + 2 * (r * n + c);
            let im = re + 1;
            entries.push(BlockEntry { var: re, row: row_off + r, col: col_off + c, re: 1.0, im: 0.0 });
            entries.push(BlockEntry { var: re, row: col_off + c, col: row_off + r, re: 1.0, im: 0.0 });
            entries.push(BlockEntry { var: im, row: row_off + r, col: col_off + c, re: 0.0, im: 1.0 });
            entries.push(BlockEntry { var: im, row: col_off + c, col: row_off + r, re: 0.0, im: -1.0 });
        }
    }
}

fn hermitian_names(prefix: &str, n: usize) -> Vec<String> {
    hermitian_param_index(n)
        .into_iter()
        .map(|s| match s {
            HermitianParam::Diag(r) => format!("{prefix}[{r},{r}]"),
            HermitianParam::Re(r, c) => format!("{prefix}[{r},{c}].re"),
            HermitianParam::Im(r, c) => format!("{prefix}[{r},{c}].im"),
        })
        .collect()
}

impl SdpProblem {
    /// Builds the solver-neutral conic form.
    pub fn to_canonical(&self) -> CanonicalSdp {
        let n = self.n();
        let lay = Layout { n };
        let nb = self.block_count();
        let n_vars = lay.total(nb);
        let alphas = self.quadrature.prefactors();
        let mut objective = vec![0.0; n_vars];
        let mut var_names = hermitian_names("sigma", n);
        let mut psd_blocks = Vec::with_capacity(2 * nb);

        for (i, (&t, &alpha)) in self.quadrature.nodes.iter().zip(&alphas).enumerate() {
            for (a, p) in self.key_projectors.iter().enumerate() {
                let k = i * self.key_projectors.len() + a;
                let pm = p.matrix();
                for r in 0..n {
                    for c in 0..n {
                        var_names.push(format!("zeta[{i},{a}][{r},{c}].re"));
                        var_names.push(format!("zeta[{i},{a}][{r},{c}].im"));
                        // 2 Re Tr(P ζ) = 2 Σ_{rc} Re(P_cr ζ_rc)
                        let base = lay.zeta(k) + 2 * (r * n + c);
                        objective[base] += 2.0 * alpha * pm[(c, r)].re;
                        objective[base + 1] -= 2.0 * alpha * pm[(c, r)].im;
                    }
                }
                var_names.extend(hermitian_names(&format!("eta[{i},{a}]"), n));
                for (q, coef) in hermitian_param_coeffs(pm).into_iter().enumerate() {
                    objective[lay.eta(k) + q] += alpha * (1.0 - t) * coef;
                }
                var_names.extend(hermitian_names(&format!("theta[{i},{a}]"), n));
                for (q, slot) in hermitian_param_index(n).into_iter().enumerate() {
                    if let HermitianParam::Diag(_) = slot {
                        objective[lay.theta(k) + q] += alpha * t;
                    }
                }

                let mut g1 = Vec::new();
                push_hermitian(&mut g1, lay.sigma(), n, 0, 0);
                push_general(&mut g1, lay.zeta(k), n, 0, n);
                push_hermitian(&mut g1, lay.eta(k), n, n, n);
                psd_blocks.push(PsdBlock {
                    name: format!("gamma1[{i},{a}]"),
                    dim: 2 * n,
                    embedded_dim: 4 * n,
                    entries: g1,
                });
                let mut g2 = Vec::new();
                push_hermitian(&mut g2, lay.sigma(), n, 0, 0);
                push_general(&mut g2, lay.zeta(k), n, n, 0);
                push_hermitian(&mut g2, lay.theta(k), n, n, n);
                psd_blocks.push(PsdBlock {
                    name: format!("gamma2[{i},{a}]"),
                    dim: 2 * n,
                    embedded_dim: 4 * n,
                    entries: g2,
                });
            }
        }

        let sparse = |coeffs: Vec<f64>| -> Vec<(usize, f64)> {
            coeffs
                .into_iter()
                .enumerate()
                .filter(|(_, v)| *v != 0.0)
                .collect()
        };
        let mut equalities = vec![LinearEquality {
            name: "trace".into(),
            coeffs: sparse(hermitian_param_coeffs(&CMat::identity(n, n))),
            rhs: 1.0,
        }];
        for (k, (op, f)) in self.constraints.iter().enumerate() {
            equalities.push(LinearEquality {
                name: format!("constraint[{k}]"),
                coeffs: sparse(hermitian_param_coeffs(op.matrix())),
                rhs: *f,
            });
        }

        CanonicalSdp {
            format: "hdqkd-sdp/1".into(),
            objective_constant: self.quadrature.entropy_constant(),
            n_vars,
            var_names,
            objective,
            equalities,
            psd_blocks,
        }
    }
}

/// A Hermitian operator as a list of nonzero `(row, col, re, im)` entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseOperator {
    /// Dimension.
    pub dim: usize,
    /// Nonzero entries.
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl SparseOperator {
    /// Collects the nonzero entries of an operator.
    pub fn from_operator(op: &Operator) -> Self {
        let m = op.matrix();
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                if z.re != 0.0 || z.im != 0.0 {
                    entries.push((r, c, z.re, z.im));
                }
            }
        }
        SparseOperator { dim: m.nrows(), entries }
    }
}

/// Program data together with its canonical form, for export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpExport {
    /// Local time dimension `d`.
    pub d: usize,
    /// Quadrature nodes.
    pub nodes: Vec<f64>,
    /// Quadrature weights.
    pub weights: Vec<f64>,
    /// Constraint operators `E_k` with values `f_k`.
    pub constraints: Vec<(SparseOperator, f64)>,
    /// Key projectors.
    pub key_projectors: Vec<SparseOperator>,
    /// Canonical conic form.
    pub canonical: CanonicalSdp,
}

impl SdpProblem {
    /// Serialises the program and its canonical form as JSON.
    pub fn export_json(&self) -> Result<String> {
        let export = SdpExport {
            d: self.d,
            nodes: self.quadrature.nodes.clone(),
            weights: self.quadrature.weights.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|(o, f)| (SparseOperator::from_operator(o), *f))
                .collect(),
            key_projectors: self.key_projectors.iter().map(SparseOperator::from_operator).collect(),
            canonical: self.to_canonical(),
        };
        serde_json::to_string(&export).map_err(|e| Error::Numerical(format!("serialisation: {e}")))
    }
}
