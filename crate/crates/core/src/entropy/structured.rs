//! Barrier method over `σ` with the auxiliary blocks eliminated.
//!
//! For a positive definite `σ` and one block (key projector `P`, node `t`,
//! prefactor `α`) the minimum over `ζ, η, θ` is reached at `η = ζ†σ⁻¹ζ`,
//! `θ = ζσ⁻¹ζ†` and `ζ` solving
//!
//! ```text
//! (1 - t) σ⁻¹ ζ P + t ζ σ⁻¹ = -P,
//! ```
//!
//! leaving `h(σ) = Re Tr(P ζ)`, a convex, 1-homogeneous function. The
//! program becomes `min c_m + Σ α h(σ)` over states meeting the equality
//! constraints, solved by damped Newton steps on
//! `c_m + Σ α h(σ) - τ log det σ` restricted to the affine constraint set,
//! with `τ` driven to zero.
//!
//! When the constraints admit no positive definite state (a pure target
//! state, say) the right-hand side is blended with that of the maximally
//! mixed state, `f_ε = (1 - ε) f + ε f_mix`, and `ε` is driven to zero
//! along with `τ`.
//!
//! Every reported bound is certified. For any matrices `B` with
//! `B P P⁺ = B` and any multipliers `ν` of an orthonormal basis `R_r` of the
//! constraint span,
//!
//! ```text
//! c_m + Σ_r ν_r b_r - λ_max(Σ_r ν_r R_r + Σ_blocks Q(B))
//! Q(B) = B P⁺ B† / (α(1 - t)) + G G† / (α t),   G = α P - B†
//! ```
//!
//! lower-bounds the program; `B = -α(1 - t) σ⁻¹ ζ P` and `ν` fitted to the
//! barrier gradient make it tight up to `O(n τ)`.
//!
//! Zero-valued positive semidefinite constraints confine every feasible
//! state to the common kernel `V` of their operators; the program is then
//! solved for `V†σV`, with the key projectors compressed to `V†PV`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Operator, C64};

use super::field::{basis_entries, coordinates, eigh, from_cmat, from_coordinates, lambda_max, re_inner, to_cmat, Field};
use super::problem::SdpProblem;
use super::solve::{Backend, SdpSolution, SolveStatus, SolverOptions};

/// Constraint values at or below this are treated as exact zeros.
const ZERO_VALUE_TOL: f64 = 1e-13;

struct Block {
    key: usize,
    t: f64,
    alpha: f64,
}

struct Setup<T: Field> {
    n: usize,
    c_m: f64,
    blocks: Vec<Block>,
    projectors: Vec<DMatrix<T>>,
    /// Orthonormal basis of the span of `{I, E_k}`.
    rows: Vec<DMatrix<T>>,
    /// `⟨R_r, σ⟩` for every feasible `σ`.
    b: Vec<f64>,
    /// Number of directions preserving all constraints.
    free_dim: usize,
    /// `F_a` with `P_a = F_a F_a†`, one per key value.
    factors: Vec<DMatrix<T>>,
    /// Minimum-norm solution of the constraints.
    sigma_part: DMatrix<T>,
    /// Isometry from the reduced space into the full one, when the
    /// zero-valued constraints confine the state to a subspace.
    lift: Option<DMatrix<T>>,
    /// Bound above which the program is certified infeasible.
    infeasible_above: f64,
}

/// Orthonormal basis (as columns) of the common kernel of the positive
/// semidefinite constraints whose value is zero. Every feasible state is
/// supported there. `None` when no reduction applies.
fn zero_face<T: Field>(problem: &SdpProblem) -> Result<Option<DMatrix<T>>> {
    let n = problem.n();
    let mut sum = DMatrix::<T>::zeros(n, n);
    let mut any = false;
    for (o, f) in &problem.constraints {
        if f.abs() > ZERO_VALUE_TOL {
            continue;
        }
        let m: DMatrix<T> = from_cmat(o.matrix());
        let (vals, _) = eigh(&m)?;
        if vals[0] < -1e-12 * vals[n - 1].abs().max(1.0) {
            continue;
        }
        sum += m.scale(1.0 / vals[n - 1].max(1e-300));
        any = true;
    }
    if !any {
        return Ok(None);
    }
    let (vals, vecs) = eigh(&sum)?;
    let top = vals[n - 1];
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] <= 1e-10 * top).collect();
    if keep.len() == n {
        return Ok(None);
    }
    let mut v = DMatrix::<T>::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        v.set_column(dst, &vecs.column(src));
    }
    Ok(Some(v))
}

fn setup<T: Field>(problem: &SdpProblem) -> Result<Setup<T>> {
    let lift = zero_face::<T>(problem)?;
    let restrict = |m: DMatrix<T>| -> DMatrix<T> {
        match &lift {
            Some(v) => {
                let r = v.adjoint() * m * v;
                (&r + r.adjoint()).scale(0.5)
            }
            None => m,
        }
    };
    let n = lift.as_ref().map_or(problem.n(), |v| v.ncols());
    if n == 0 {
        return Err(Error::Infeasible("zero-valued constraints exclude every state".into()));
    }
    let mut ops: Vec<DMatrix<T>> = vec![DMatrix::<T>::identity(n, n)];
    let mut rhs = vec![1.0];
    for (o, f) in &problem.constraints {
        ops.push(restrict(from_cmat(o.matrix())));
        rhs.push(*f);
    }
    let coords: Vec<Vec<f64>> = ops.iter().map(coordinates).collect();
    let dim = coords[0].len();
    let k = coords.len();
    let gram = DMatrix::<f64>::from_fn(k, k, |i, j| {
        coords[i].iter().zip(&coords[j]).map(|(a, b)| a * b).sum()
    });
    let (vals, vecs) = eigh(&gram)?;
    let top = vals.last().copied().unwrap_or(0.0);
    let rhs_norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut q_rows: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    for (idx, &lam) in vals.iter().enumerate() {
        let u = vecs.column(idx);
        let ub: f64 = u.iter().zip(&rhs).map(|(x, y)| x * y).sum();
        if lam <= 1e-11 * top {
            if ub.abs() > 1e-8 * rhs_norm.max(1.0) {
                return Err(Error::Infeasible(
                    "constraint values are linearly inconsistent".into(),
                ));
            }
            continue;
        }
        let s = 1.0 / lam.sqrt();
        let mut row = vec![0.0; dim];
        for (i, c) in coords.iter().enumerate() {
            let w = u[i] * s;
            for (r, x) in row.iter_mut().zip(c) {
                *r += w * x;
            }
        }
        q_rows.push(row);
        b.push(ub * s);
    }
    let free_dim = dim - q_rows.len();

    let mut part = vec![0.0; dim];
    for (q, &bi) in q_rows.iter().zip(&b) {
        for (p, x) in part.iter_mut().zip(q) {
            *p += bi * x;
        }
    }
    let sigma_part = from_coordinates(&part, n);

    let alphas = problem.quadrature.prefactors();
    let mut blocks = Vec::new();
    for (&t, &alpha) in problem.quadrature.nodes.iter().zip(&alphas) {
        for key in 0..problem.key_projectors.len() {
            blocks.push(Block { key, t, alpha });
        }
    }
    let mut projectors = Vec::new();
    let mut factors = Vec::new();
    for p in &problem.key_projectors {
        let f = low_rank_factor(&restrict(from_cmat(p.matrix())))?;
        projectors.push(&f * f.adjoint());
        factors.push(f);
    }
    Ok(Setup {
        n,
        c_m: problem.quadrature.entropy_constant(),
        blocks,
        projectors,
        factors,
        rows: q_rows.iter().map(|q| from_coordinates(q, n)).collect(),
        b,
        free_dim,
        sigma_part,
        lift,
        infeasible_above: (problem.d as f64).log2() + 1e-3,
    })
}

/// `F` with `F F† = P` for positive semidefinite `P`, keeping only the
/// numerically nonzero eigenvalues.
fn low_rank_factor<T: Field>(p: &DMatrix<T>) -> Result<DMatrix<T>> {
    let (vals, vecs) = eigh(p)?;
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-12 * top.max(1e-300)).collect();
    let mut f = DMatrix::<T>::zeros(p.nrows(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        f.set_column(dst, &vecs.column(src).scale(vals[src].sqrt()));
    }
    Ok(f)
}

/// Per key value: `F̃ = U†F` in the eigenbasis of `σ` and the node-free
/// pieces of the block equation.
struct KeyFactors<T: Field> {
    ft: DMatrix<T>,
    /// `Λ F̃`.
    lft: DMatrix<T>,
    /// `Λ F̃ M`, where `F̃†ΛF̃ = M Ξ M†`.
    w: DMatrix<T>,
    /// `W† F̃`.
    w_ft: DMatrix<T>,
    xi: Vec<f64>,
}

/// Block solution `ζ = Z_l Z_r†` and the products reused by the Hessian.
struct BlockState<T: Field> {
    /// Column weights of the block solve, `-(1 - t) / (t (t λ_r + (1 - t) ξ_c))`.
    sc: DMatrix<f64>,
    zeta: DMatrix<T>,
    zl: DMatrix<T>,
    /// `ζ P̃`.
    zp: DMatrix<T>,
    zp_lft: DMatrix<T>,
    zp_w: DMatrix<T>,
    /// `ζ† Z_l`.
    zh_zl: DMatrix<T>,
}

struct Eval<T: Field> {
    lambda: Vec<f64>,
    u: DMatrix<T>,
    obj: f64,
    logdet: f64,
    keys: Vec<KeyFactors<T>>,
    states: Vec<BlockState<T>>,
    /// `Σ α ((1 - t) ζ P ζ† + t ζ† ζ)` in the eigenbasis.
    ce: DMatrix<T>,
    /// `[ζF̃ | Z_r]` over all blocks; the Hessian's dense products are
    /// taken against it in one go.
    right: DMatrix<T>,
}

fn scale_both<T: Field>(m: &DMatrix<T>, left: &[f64], right: &[f64]) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].scale(left[r] * right[c]))
}

fn scale_rows<T: Field>(m: &DMatrix<T>, w: &[f64]) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].scale(w[r]))
}

fn hadamard<T: Field>(m: &DMatrix<T>, w: &DMatrix<f64>) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].scale(w[(r, c)]))
}

fn hstack<T: Field>(parts: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = parts[0].nrows();
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::<T>::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.view_mut((0, at), (rows, p.ncols())).copy_from(p);
        at += p.ncols();
    }
    out
}

fn evaluate<T: Field>(s: &Setup<T>, sigma: &DMatrix<T>) -> Result<Option<Eval<T>>> {
    let (lambda, u) = eigh(sigma)?;
    if lambda[0] <= 0.0 {
        return Ok(None);
    }
    let n = s.n;
    let ut = u.adjoint();
    let mut keys = Vec::with_capacity(s.factors.len());
    for f in &s.factors {
        let ft = &ut * f;
        let lft = scale_rows(&ft, &lambda);
        let (xi, m) = eigh(&(ft.adjoint() * &lft))?;
        let w = &lft * m;
        let w_ft = w.adjoint() * &ft;
        keys.push(KeyFactors { ft, lft, w, w_ft, xi: xi.iter().map(|x| x.max(0.0)).collect() });
    }
    let mut obj = s.c_m;
    let mut ce = DMatrix::<T>::zeros(n, n);
    let mut states = Vec::with_capacity(s.blocks.len());
    let mut right_parts = Vec::with_capacity(2 * s.blocks.len());
    for blk in &s.blocks {
        let kf = &keys[blk.key];
        let t = blk.t;
        let sc = DMatrix::from_fn(n, kf.xi.len(), |r, c| {
            -(1.0 - t) / (t * (t * lambda[r] + (1.0 - t) * kf.xi[c]))
        });
        // ζ solves the block equation with right-hand side -P̃.
        let a2 = -hadamard(&(&kf.ft * (kf.ft.adjoint() * &kf.w)), &sc);
        let zl = hstack(&[&kf.ft.scale(-1.0 / t), &a2]);
        let zr = hstack(&[&kf.lft, &kf.w]);
        let zeta = &zl * zr.adjoint();
        let zf = &zl * (zr.adjoint() * &kf.ft);
        let zp = &zf * kf.ft.adjoint();
        obj += blk.alpha * re_inner(&kf.ft, &zf);
        let gram = zl.adjoint() * &zl;
        ce += (&zf * zf.adjoint()).scale(blk.alpha * (1.0 - t)) + (&zr * gram * zr.adjoint()).scale(blk.alpha * t);
        let zp_lft = &zp * &kf.lft;
        let zp_w = &zp * &kf.w;
        let zh_zl = zeta.adjoint() * &zl;
        right_parts.push(zf);
        right_parts.push(zr);
        states.push(BlockState { sc, zeta, zl, zp, zp_lft, zp_w, zh_zl });
    }
    let right = hstack(&right_parts.iter().collect::<Vec<_>>());
    let logdet = lambda.iter().map(|x| x.ln()).sum();
    Ok(Some(Eval { lambda, u, obj, logdet, keys, states, ce, right }))
}

/// `out[a, :] += c · m[b, :]`.
fn add_row<T: Field>(out: &mut DMatrix<T>, a: usize, m: &DMatrix<T>, b: usize, c: T) {
    for j in 0..m.ncols() {
        out[(a, j)] += c * m[(b, j)];
    }
}

/// `out += x ⊗ (c · m[b, :])` for a column `x` given entrywise.
fn add_outer<T: Field>(out: &mut DMatrix<T>, x: impl Fn(usize) -> T, m: &DMatrix<T>, b: usize, c: T) {
    for j in 0..m.ncols() {
        let y = c * m[(b, j)];
        for i in 0..out.nrows() {
            out[(i, j)] += x(i) * y;
        }
    }
}

impl<T: Field> Eval<T> {
    /// Gradient of the objective in the eigenbasis, `-Λ⁻¹ CE Λ⁻¹`.
    fn objective_gradient(&self) -> DMatrix<T> {
        let inv: Vec<f64> = self.lambda.iter().map(|x| 1.0 / x).collect();
        -scale_both(&self.ce, &inv, &inv)
    }

    /// Second directional derivative of the objective in the eigenbasis
    /// along `Λ E Λ`, for a sparse Hermitian `E` given by its entries.
    fn hessian_apply(&self, s: &Setup<T>, e: &[(usize, usize, T)]) -> DMatrix<T> {
        let n = s.n;
        let mut left_parts = Vec::with_capacity(2 * s.blocks.len());
        for (blk, st) in s.blocks.iter().zip(&self.states) {
            let kf = &self.keys[blk.key];
            let t = blk.t;
            let one_t = T::from_real(1.0 - t);
            let tt = T::from_real(t);
            // R = (1 - t) E ζP̃ + t ζ E, only ever needed times thin matrices.
            let r_times = |m: &DMatrix<T>, zpm: &DMatrix<T>| {
                let mut out = DMatrix::<T>::zeros(n, m.ncols());
                for &(a, b, v) in e {
                    add_row(&mut out, a, zpm, b, v * one_t);
                    add_outer(&mut out, |i| st.zeta[(i, a)], m, b, v * tt);
                }
                out
            };
            let r_lft = r_times(&kf.lft, &st.zp_lft);
            let r_w = r_times(&kf.w, &st.zp_w);
            let mut rh_zl = DMatrix::<T>::zeros(n, st.zl.ncols());
            for &(a, b, v) in e {
                add_row(&mut rh_zl, a, &st.zh_zl, b, v * tt);
                add_outer(&mut rh_zl, |i| st.zp[(a, i)].conjugate(), &st.zl, b, v * one_t);
            }
            let amat = hadamard(&r_w, &st.sc);
            let dzf = r_lft.scale(1.0 / t) + &amat * &kf.w_ft;
            let lt: Vec<f64> = self.lambda.iter().map(|x| x / t).collect();
            let dzl = scale_rows(&rh_zl, &lt) + &kf.w * (amat.adjoint() * &st.zl);
            left_parts.push(dzf.scale(blk.alpha * (1.0 - t)));
            left_parts.push(dzl.scale(blk.alpha * t));
        }
        let left = hstack(&left_parts.iter().collect::<Vec<_>>());
        let z = left * self.right.adjoint();
        let mut y = DMatrix::<T>::zeros(n, n);
        for &(a, b, v) in e {
            add_row(&mut y, a, &self.ce, b, v);
        }
        let inv: Vec<f64> = self.lambda.iter().map(|x| 1.0 / x).collect();
        let ones = vec![1.0; n];
        let y = scale_both(&y, &ones, &inv);
        &y + y.adjoint() - scale_both(&(&z + z.adjoint()), &inv, &inv)
    }

    /// Newton matrix and gradient of `objective - τ log det σ` in the
    /// coordinates `X ↦ σ^{1/2} X σ^{1/2}` (eigenbasis), where the barrier
    /// Hessian is `τ I`.
    fn newton_system(&self, s: &Setup<T>, tau: f64) -> (DMatrix<f64>, DVector<f64>) {
        let n = s.n;
        let sq: Vec<f64> = self.lambda.iter().map(|x| x.sqrt()).collect();
        let isq: Vec<f64> = sq.iter().map(|x| 1.0 / x).collect();
        let basis = basis_entries::<T>(n);
        let dim = basis.len();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for (j, entries) in basis.iter().enumerate() {
            let e: Vec<(usize, usize, T)> =
                entries.iter().map(|&(a, b, v)| (a, b, v.scale(isq[a] * isq[b]))).collect();
            let col = coordinates(&scale_both(&self.hessian_apply(s, &e), &sq, &sq));
            for (i, x) in col.into_iter().enumerate() {
                h[(i, j)] = x;
            }
            h[(j, j)] += tau;
        }
        let h = (&h + h.transpose()).scale(0.5);
        (h, scaled_gradient(self, tau))
    }
}

/// Certified lower bound at `σ` from the dual point built out of the
/// block solutions and the constraint multipliers `nu`.
fn certificate<T: Field>(s: &Setup<T>, ev: &Eval<T>, nu: &[f64]) -> Result<f64> {
    let u = &ev.u;
    let ut = u.adjoint();
    let inv: Vec<f64> = ev.lambda.iter().map(|x| 1.0 / x).collect();
    let mut m = DMatrix::<T>::zeros(s.n, s.n);
    for (r, &v) in s.rows.iter().zip(nu) {
        m += r.scale(v);
    }
    for (blk, st) in s.blocks.iter().zip(&ev.states) {
        let p = &s.projectors[blk.key];
        let a = blk.alpha;
        let t = blk.t;
        // W = σ⁻¹ ζ; B = -α(1 - t) W P, so B P⁺ B† / (α(1 - t)) = α(1 - t) W P W†.
        let w = u * scale_rows(&st.zeta, &inv) * &ut;
        let wp = &w * p;
        let g = p.scale(a) + wp.adjoint().scale(a * (1.0 - t));
        if t < 1.0 {
            m += (&wp * w.adjoint()).scale(a * (1.0 - t));
        }
        m += (&g * g.adjoint()).scale(1.0 / (a * t));
    }
    let lmax = lambda_max(&m)?;
    let nb: f64 = nu.iter().zip(&s.b).map(|(x, y)| x * y).sum();
    Ok(s.c_m + nb - lmax)
}

#[cfg(test)]
fn to_original<T: Field>(ev: &Eval<T>, m: &DMatrix<T>) -> DMatrix<T> {
    &ev.u * m * ev.u.adjoint()
}

pub(crate) fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if problem.is_real() {
        run::<f64>(problem, opts)
    } else {
        run::<C64>(problem, opts)
    }
}

fn failed(status: SolveStatus, iterations: usize) -> SdpSolution {
    SdpSolution {
        bound: f64::NAN,
        objective: f64::NAN,
        duality_gap: f64::NAN,
        status,
        sigma_star: None,
        iterations,
        backend: Backend::Structured,
    }
}

fn state_from<T: Field>(s: &Setup<T>, sigma: &DMatrix<T>) -> Option<DensityMatrix> {
    let m = match &s.lift {
        Some(v) => to_cmat(&(v * sigma * v.adjoint())),
        None => to_cmat(sigma),
    };
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = m.trace().re;
    DensityMatrix::new(Operator::from_matrix(m / C64::new(tr, 0.0))).ok()
}

/// Constraint rows in the scaled eigenbasis coordinates, as columns of an
/// orthonormal `Q` together with `R` from `S† = Q R`.
fn scaled_constraints<T: Field>(s: &Setup<T>, ev: &Eval<T>) -> (DMatrix<f64>, DMatrix<f64>) {
    let sq: Vec<f64> = ev.lambda.iter().map(|x| x.sqrt()).collect();
    let ut = ev.u.adjoint();
    let dim = if T::COMPLEX { s.n * s.n } else { s.n * (s.n + 1) / 2 };
    let mut st = DMatrix::<f64>::zeros(dim, s.rows.len());
    for (j, r) in s.rows.iter().enumerate() {
        let c = coordinates(&scale_both(&(&ut * r * &ev.u), &sq, &sq));
        st.set_column(j, &DVector::from_vec(c));
    }
    let qr = st.qr();
    (qr.q(), qr.r())
}

/// Multipliers of the orthonormal constraint rows best matching the
/// gradient `g` given in scaled coordinates.
fn multipliers(q: &DMatrix<f64>, r: &DMatrix<f64>, g: &DVector<f64>) -> Vec<f64> {
    let qg = q.transpose() * g;
    r.solve_upper_triangular(&qg).map_or_else(|| vec![0.0; qg.len()], |v| v.as_slice().to_vec())
}

/// Scaled gradient of `objective - τ log det σ`.
fn scaled_gradient<T: Field>(ev: &Eval<T>, tau: f64) -> DVector<f64> {
    let sq: Vec<f64> = ev.lambda.iter().map(|x| x.sqrt()).collect();
    let mut gs = scale_both(&ev.objective_gradient(), &sq, &sq);
    for i in 0..sq.len() {
        gs[(i, i)] -= T::from_real(tau);
    }
    DVector::from_vec(coordinates(&gs))
}

/// Newton direction (original basis) at `ev` preserving every constraint,
/// with the squared Newton decrement and the size of the scaled gradient
/// left after removing the constraint directions.
fn newton_direction<T: Field>(s: &Setup<T>, ev: &Eval<T>, tau: f64) -> Result<(DMatrix<T>, f64, f64)> {
    let n = s.n;
    let sq: Vec<f64> = ev.lambda.iter().map(|x| x.sqrt()).collect();
    let (h, g) = ev.newton_system(s, tau);
    let (q, _) = scaled_constraints(s, ev);
    let projected = &g - &q * (q.transpose() * &g);
    let residual = projected.amax();
    let ch = cholesky_shifted(&h)?;
    let hg = ch.solve(&g);
    let hq = ch.solve(&q);
    let m = q.transpose() * &hq;
    let y = cholesky_shifted(&m)?.solve(&(-(q.transpose() * &hg)));
    let mut x = -(hg + hq * y);
    x -= &q * (q.transpose() * &x);
    let dec2 = x.dot(&(&h * &x));
    let xt: DMatrix<T> = from_coordinates(x.as_slice(), n);
    let mut delta = &ev.u * scale_both(&xt, &sq, &sq) * ev.u.adjoint();
    // Remove the rounding drift off the constraint set.
    for r in &s.rows {
        let c = re_inner(r, &delta);
        delta -= r.scale(c);
    }
    Ok((delta, dec2, residual))
}

/// Damped Newton centering at fixed `τ`. Returns the final evaluation and
/// whether the line search failed.
fn center<T: Field>(
    s: &Setup<T>,
    sigma: &mut DMatrix<T>,
    tau: f64,
    opts: &SolverOptions,
    iterations: &mut usize,
) -> Result<Option<(Eval<T>, bool)>> {
    let mut ev = match evaluate(s, sigma)? {
        Some(ev) => ev,
        None => return Ok(None),
    };
    let mut last_dec2 = f64::INFINITY;
    for _ in 0..60 {
        if s.free_dim == 0 || *iterations >= opts.max_iterations {
            break;
        }
        *iterations += 1;
        let (delta, dec2, residual) = newton_direction(s, &ev, tau)?;
        // The certificate absorbs a residual up to about τ through the
        // barrier term; once the decrement stalls, rounding dominates.
        if residual <= CENTERING_RESIDUAL * tau || dec2 / tau < 1e-16 || dec2 >= last_dec2 {
            break;
        }
        last_dec2 = if dec2 / tau < 0.04 { 0.5 * dec2 } else { f64::INFINITY };
        let phi0 = ev.obj - tau * ev.logdet;
        let mut len = 1.0;
        let mut accepted = None;
        // Inside the quadratic region the full step is taken as long as it
        // stays positive definite; the decrease in φ may be below its
        // rounding there.
        let quadratic = dec2 / tau < 0.04;
        for _ in 0..60 {
            let cand = &*sigma + delta.scale(len);
            if let Some(e2) = evaluate(s, &cand)? {
                let phi = e2.obj - tau * e2.logdet;
                if quadratic || phi <= phi0 - 0.1 * len * dec2 {
                    accepted = Some((cand, e2));
                    break;
                }
            }
            len *= 0.5;
        }
        match accepted {
            Some((cand, e2)) => {
                *sigma = cand;
                ev = e2;
            }
            None => return Ok(Some((ev, true))),
        }
    }
    Ok(Some((ev, false)))
}

fn run<T: Field>(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let s = match setup::<T>(problem) {
        Ok(s) => s,
        Err(Error::Infeasible(_)) => return Ok(failed(SolveStatus::Infeasible, 0)),
        Err(e) => return Err(e),
    };
    let n = s.n;
    let nf = n as f64;
    let mix = DMatrix::<T>::identity(n, n).scale(1.0 / nf);

    // Starting point on the blended constraint set.
    let (lp, _) = eigh(&s.sigma_part)?;
    let target = 0.01 / nf;
    let mut eps = if lp[0] >= target { 0.0 } else { (target - lp[0]) / (1.0 / nf - lp[0]) };
    let mut sigma = s.sigma_part.scale(1.0 - eps) + mix.scale(eps);

    // While ε > 0 the barrier dominates, keeping the iterate near the
    // analytic centre where the blend can shrink fastest.
    let tau_start = 1.0 / nf;
    let mut tau = if eps > 0.0 { PHASE_ONE_TAU } else { tau_start };
    // The certificate at a centred point is loose by about n τ.
    let tau_min = 0.25 * opts.gap_tolerance / nf;
    let tau_floor = 1e-3 * tau_min;
    let mut iterations = 0usize;
    let mut best = f64::NEG_INFINITY;
    let mut eps_stalls = 0usize;
    let mut flat_steps = 0usize;

    loop {
        let (ev, stalled) = match center(&s, &mut sigma, tau, opts, &mut iterations)? {
            Some(r) => r,
            None => return Ok(failed(SolveStatus::NumericalFailure, iterations)),
        };

        let (q, r) = scaled_constraints(&s, &ev);
        let nu = multipliers(&q, &r, &scaled_gradient(&ev, tau));
        let lb = certificate(&s, &ev, &nu)?;
        let previous = best;
        if lb.is_finite() && lb > best {
            best = lb;
        }
        // The objective only bounds the optimum from above once ε = 0.
        let gap = if eps == 0.0 { ev.obj - best } else { f64::NAN };
        if eps == 0.0 && previous.is_finite() {
            let gain = best - previous;
            if gain <= 0.01 * gap.max(0.0) {
                flat_steps += 1;
            } else {
                flat_steps = 0;
            }
        }
        if opts.verbose {
            eprintln!(
                "structured: it={iterations} tau={tau:.2e} eps={eps:.2e} obj={:.10} lb={lb:.10} gap={gap:.2e} lmin={:.2e}",
                ev.obj, ev.lambda[0]
            );
        }
        // A certified bound above a feasible objective is rounding.
        let bound = if !best.is_finite() {
            f64::NAN
        } else if eps == 0.0 {
            best.min(ev.obj)
        } else {
            best
        };
        let finish = |status: SolveStatus, sigma: &DMatrix<T>| SdpSolution {
            bound,
            objective: ev.obj,
            duality_gap: if eps == 0.0 { ev.obj - bound } else { f64::NAN },
            status,
            sigma_star: if eps == 0.0 { state_from(&s, sigma) } else { None },
            iterations,
            backend: Backend::Structured,
        };
        if best > s.infeasible_above {
            return Ok(finish(SolveStatus::Infeasible, &sigma));
        }
        let converged = eps == 0.0 && gap <= opts.gap_tolerance * best.abs().max(1.0);
        // Past τ_min the bound only improves through rounding; two steps
        // without progress end the run.
        let flat = tau < tau_min && flat_steps >= 2;
        let exhausted = iterations >= opts.max_iterations
            || stalled
            || flat
            || (tau <= tau_floor && (eps == 0.0 || eps_stalls > 200));
        if converged || exhausted {
            let status = if eps == 0.0 {
                SdpSolution::classify(gap.max(0.0), best, opts)
            } else {
                SolveStatus::NumericalFailure
            };
            return Ok(finish(status, &sigma));
        }

        if eps > 0.0 {
            // Shrink the blend, keeping a fraction of the smallest eigenvalue.
            let lmin = ev.lambda[0];
            let beta = 0.1;
            let alpha_room = if lmin < 1.0 / nf {
                (1.0 / nf - beta * lmin) / (1.0 / nf - lmin)
            } else {
                f64::INFINITY
            };
            let alpha_full = 1.0 / (1.0 - eps);
            let (alpha, next) = if alpha_room >= alpha_full {
                (alpha_full, 0.0)
            } else {
                (alpha_room, 1.0 - alpha_room * (1.0 - eps))
            };
            sigma = sigma.scale(alpha) - mix.scale(alpha - 1.0);
            if next > 0.5 * eps {
                eps_stalls += 1;
            }
            eps = next;
            if eps == 0.0 {
                tau = tau.min(tau_start);
                continue;
            }
            if eps_stalls < 20 {
                continue;
            }
        }
        if tau > tau_floor {
            tau = if tau > tau_min { (tau / 10.0).max(tau_min) } else { (tau / 4.0).max(tau_floor) };
        }
    }
}

/// Centering stops once the scaled gradient residual is below this
/// multiple of `τ`.
const CENTERING_RESIDUAL: f64 = 1e-3;

/// Barrier weight while the constraint blend is being removed.
const PHASE_ONE_TAU: f64 = 1.0;

/// Cholesky factor of a symmetric positive (semi)definite matrix, with a
/// small diagonal shift when the plain factorisation fails.
fn cholesky_shifted(h: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut hm = h.clone();
        for i in 0..hm.nrows() {
            hm[(i, i)] += shift;
        }
        if let Some(ch) = hm.cholesky() {
            return Ok(ch);
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
    Err(Error::Numerical("Newton system is not positive definite".into()))
}
