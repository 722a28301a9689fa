//! Generic primal-dual interior point method on the canonical conic form.
//!
//! Solves `min cᵀy` subject to `A y = b` and `Σ_j y_j F_j ⪰ 0` for every
//! block (complex blocks handled through their real symmetric embedding),
//! with an infeasible start and Mehrotra predictor-corrector steps along
//! the HKM direction. The Schur complement is formed densely, so the cost is
//! cubic in the number of variables; this backend is meant for small
//! instances and as an independent cross-check of the structured solver.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{CMat, DensityMatrix, Operator, C64};

use super::problem::{hermitian_param_index, CanonicalSdp, HermitianParam, SdpProblem};
use super::solve::{Backend, SdpSolution, SolveStatus, SolverOptions};

/// Variable count above which the dense backend refuses to run.
pub const DENSE_MAX_VARS: usize = 6000;

/// Second-order correction terms of a predictor-corrector step.
type Correction<'a> = Option<(&'a [DMatrix<f64>], &'a [DMatrix<f64>])>;

/// Sparse real symmetric coefficient matrix `(row, col, value)`.
type Sparse = Vec<(usize, usize, f64)>;

struct Block {
    dim: usize,
    vars: Vec<(usize, Sparse)>,
}

fn embed_blocks(can: &CanonicalSdp) -> Vec<Block> {
    can.psd_blocks
        .iter()
        .map(|b| {
            let s = b.dim;
            let mut by_var: BTreeMap<usize, Sparse> = BTreeMap::new();
            for e in &b.entries {
                let list = by_var.entry(e.var).or_default();
                if e.re != 0.0 {
                    list.push((e.row, e.col, e.re));
                    list.push((e.row + s, e.col + s, e.re));
                }
                if e.im != 0.0 {
                    list.push((e.row, e.col + s, -e.im));
                    list.push((e.row + s, e.col, e.im));
                }
            }
            Block { dim: 2 * s, vars: by_var.into_iter().collect() }
        })
        .collect()
}

/// `Σ_j y_j F_j` for one block.
fn apply(block: &Block, y: &DVector<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(block.dim, block.dim);
    for (j, f) in &block.vars {
        let yj = y[*j];
        if yj != 0.0 {
            for &(r, c, v) in f {
                m[(r, c)] += v * yj;
            }
        }
    }
    m
}

/// Adds `⟨F_j, X⟩` to `out[j]`.
fn adjoint_into(block: &Block, x: &DMatrix<f64>, out: &mut DVector<f64>) {
    for (j, f) in &block.vars {
        out[*j] += f.iter().map(|&(r, c, v)| v * x[(r, c)]).sum::<f64>();
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `α ≤ 1` with `P + α Δ ⪰ 0`, given the Cholesky factor of `P`.
fn max_step(l: &DMatrix<f64>, delta: &DMatrix<f64>) -> Result<f64> {
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let w = sym(&linv * delta * linv.transpose());
    let lmin = w.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if lmin >= 0.0 { 1.0 } else { (-1.0 / lmin).min(1.0) })
}

/// Outcome of the conic solve.
struct ConicResult {
    y: DVector<f64>,
    primal: f64,
    dual: f64,
    /// Largest of the relative primal, slack and dual residuals and gap.
    residual: f64,
    iterations: usize,
}

fn solve_conic(can: &CanonicalSdp, opts: &SolverOptions) -> Result<ConicResult> {
    let nv = can.n_vars;
    if nv > DENSE_MAX_VARS {
        return Err(Error::InvalidParameter(format!(
            "{nv} variables exceed the dense backend limit of {DENSE_MAX_VARS}"
        )));
    }
    let blocks = embed_blocks(can);
    let c = DVector::from_column_slice(&can.objective);

    // Equality rows reduced to an orthonormal independent set.
    let k = can.equalities.len();
    let mut a_raw = DMatrix::<f64>::zeros(k, nv);
    let mut b_raw = DVector::<f64>::zeros(k);
    for (i, eq) in can.equalities.iter().enumerate() {
        for &(j, v) in &eq.coeffs {
            a_raw[(i, j)] += v;
        }
        b_raw[i] = eq.rhs;
    }
    let gram = &a_raw * a_raw.transpose();
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > 1e-11 * top).collect();
    for i in 0..k {
        if !keep.contains(&i) {
            let proj = eig.eigenvectors.column(i).dot(&b_raw);
            if proj.abs() > 1e-8 * b_raw.norm().max(1.0) {
                return Err(Error::Infeasible("constraint values are linearly inconsistent".into()));
            }
        }
    }
    let mut a = DMatrix::<f64>::zeros(keep.len(), nv);
    let mut b = DVector::<f64>::zeros(keep.len());
    for (r, &i) in keep.iter().enumerate() {
        let u = eig.eigenvectors.column(i);
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        a.row_mut(r).copy_from(&((u.transpose() * &a_raw) * s));
        b[r] = u.dot(&b_raw) * s;
    }
    let p = keep.len();

    let total_dim: usize = blocks.iter().map(|b| b.dim).sum();
    let mut y = DVector::<f64>::zeros(nv);
    let mut w = DVector::<f64>::zeros(p);
    let mut s_mats: Vec<DMatrix<f64>> = blocks.iter().map(|b| DMatrix::identity(b.dim, b.dim)).collect();
    let mut x_mats = s_mats.clone();
    let tol = opts.gap_tolerance.min(1e-8);
    let mut best: Option<ConicResult> = None;

    for it in 0..opts.max_iterations {
        let Some(chol_s) = s_mats
            .iter()
            .map(|s| s.clone().cholesky().map(|ch| ch.l()))
            .collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let Some(chol_x) = x_mats
            .iter()
            .map(|x| x.clone().cholesky().map(|ch| ch.l()))
            .collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let s_inv: Vec<DMatrix<f64>> = chol_s
            .iter()
            .map(|l| {
                let li = l.clone().solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()));
                li.map(|li| li.transpose() * li)
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Numerical("singular slack".into()))?;

        let rp = &b - &a * &y;
        let rs: Vec<DMatrix<f64>> = blocks.iter().zip(&s_mats).map(|(bl, s)| apply(bl, &y) - s).collect();
        let mut fx = DVector::<f64>::zeros(nv);
        for (bl, x) in blocks.iter().zip(&x_mats) {
            adjoint_into(bl, x, &mut fx);
        }
        let rd = &c - a.transpose() * &w - &fx;
        let mu: f64 = x_mats.iter().zip(&s_mats).map(|(x, s)| x.dot(s)).sum::<f64>() / total_dim as f64;

        let primal = c.dot(&y);
        let dual = b.dot(&w);
        let pinf = rp.norm() / (1.0 + b.norm());
        let sinf = rs.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let dinf = rd.norm() / (1.0 + c.norm());
        let gap = (primal - dual).abs() / (1.0 + primal.abs() + dual.abs());
        if opts.verbose {
            eprintln!(
                "dense: it={it} primal={primal:.10} dual={dual:.10} pinf={pinf:.1e} dinf={dinf:.1e} mu={mu:.1e}"
            );
        }
        let residual = pinf.max(sinf).max(dinf).max(gap);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(ConicResult { y: y.clone(), primal, dual, residual, iterations: it });
        }
        if residual < tol {
            break;
        }

        // Schur complement M_ij = Tr(F_i X F_j S⁻¹).
        let mut m = DMatrix::<f64>::zeros(nv, nv);
        for ((bl, x), si) in blocks.iter().zip(&x_mats).zip(&s_inv) {
            for (i, fi) in &bl.vars {
                for (j, fj) in &bl.vars {
                    if j < i {
                        continue;
                    }
                    let mut v = 0.0;
                    for &(r, cc, a1) in fi {
                        for &(pp, q, a2) in fj {
                            v += a1 * a2 * x[(cc, pp)] * si[(q, r)];
                        }
                    }
                    m[(*i, *j)] += v;
                }
            }
        }
        for i in 0..nv {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        // Loss of definiteness here means the iterates are as accurate as
        // double precision allows; the best iterate so far is returned.
        // Augmented system [[M, -Aᵀ], [A, 0]] [Δy; Δw] = [h; r_p], factorised
        // once per iteration; more robust than the normal equations when M
        // is badly conditioned near the optimum.
        let mut kkt = DMatrix::<f64>::zeros(nv + p, nv + p);
        kkt.view_mut((0, 0), (nv, nv)).copy_from(&m);
        kkt.view_mut((0, nv), (nv, p)).copy_from(&(-a.transpose()));
        kkt.view_mut((nv, 0), (p, nv)).copy_from(&a);
        let kkt_lu = kkt.lu();

        let direction = |target: f64, corr: Correction<'_>| {
            let mut t_mats = Vec::with_capacity(blocks.len());
            let mut h = -rd.clone();
            for (idx, bl) in blocks.iter().enumerate() {
                let x = &x_mats[idx];
                let si = &s_inv[idx];
                let mut t = si * target - x - sym(x * &rs[idx] * si);
                if let Some((dx, ds)) = corr {
                    t -= sym(&dx[idx] * &ds[idx] * si);
                }
                adjoint_into(bl, &t, &mut h);
                t_mats.push(t);
            }
            let mut rhs = DVector::<f64>::zeros(nv + p);
            rhs.rows_mut(0, nv).copy_from(&h);
            rhs.rows_mut(nv, p).copy_from(&rp);
            let sol = kkt_lu.solve(&rhs)?;
            let dy = sol.rows(0, nv).into_owned();
            let dw = sol.rows(nv, p).into_owned();
            let mut dss = Vec::with_capacity(blocks.len());
            let mut dxs = Vec::with_capacity(blocks.len());
            for (idx, bl) in blocks.iter().enumerate() {
                let fdy = apply(bl, &dy);
                let dx = &t_mats[idx] - sym(&x_mats[idx] * &fdy * &s_inv[idx]);
                dss.push(fdy + &rs[idx]);
                dxs.push(dx);
            }
            Some((dy, dw, dss, dxs))
        };
        let steps = |dss: &[DMatrix<f64>], dxs: &[DMatrix<f64>]| -> Result<(f64, f64)> {
            let mut ap: f64 = 1.0;
            let mut ad: f64 = 1.0;
            for i in 0..blocks.len() {
                ap = ap.min(max_step(&chol_s[i], &dss[i])?);
                ad = ad.min(max_step(&chol_x[i], &dxs[i])?);
            }
            Ok((ap, ad))
        };

        let Some((_, _, ds_aff, dx_aff)) = direction(0.0, None) else { break };
        let Ok((ap, ad)) = steps(&ds_aff, &dx_aff) else { break };
        let mu_aff: f64 = (0..blocks.len())
            .map(|i| (&x_mats[i] + &dx_aff[i] * ad).dot(&(&s_mats[i] + &ds_aff[i] * ap)))
            .sum::<f64>()
            / total_dim as f64;
        let centering = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let Some((dy, dw, dss, dxs)) = direction(centering * mu, Some((&dx_aff, &ds_aff))) else {
            break;
        };
        let Ok((ap, ad)) = steps(&dss, &dxs) else { break };
        let ap = (0.95 * ap).min(1.0);
        let ad = (0.95 * ad).min(1.0);
        y += &dy * ap;
        w += &dw * ad;
        for i in 0..blocks.len() {
            s_mats[i] = sym(&s_mats[i] + &dss[i] * ap);
            x_mats[i] = sym(&x_mats[i] + &dxs[i] * ad);
        }
    }
    best.ok_or_else(|| Error::Numerical("interior point method made no progress".into()))
}

fn sigma_from_params(y: &DVector<f64>, n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for (q, slot) in hermitian_param_index(n).into_iter().enumerate() {
        match slot {
            HermitianParam::Diag(r) => m[(r, r)] = C64::new(y[q], 0.0),
            HermitianParam::Re(r, c) => {
                m[(r, c)].re = y[q];
                m[(c, r)].re = y[q];
            }
            HermitianParam::Im(r, c) => {
                m[(r, c)].im = y[q];
                m[(c, r)].im = -y[q];
            }
        }
    }
    m
}

pub(crate) fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let can = problem.to_canonical();
    let res = match solve_conic(&can, opts) {
        Ok(r) => r,
        Err(Error::Infeasible(_)) => {
            return Ok(SdpSolution {
                bound: f64::NAN,
                objective: f64::NAN,
                duality_gap: f64::NAN,
                status: SolveStatus::Infeasible,
                sigma_star: None,
                iterations: 0,
                backend: Backend::Dense,
            })
        }
        Err(e) => return Err(e),
    };
    let bound = can.objective_constant + res.dual;
    let objective = can.objective_constant + res.primal;
    let gap = objective - bound;
    let status = if res.residual <= opts.gap_tolerance.min(1e-8) {
        SolveStatus::Optimal
    } else if res.residual <= 1e-5 {
        SolveStatus::NearOptimal
    } else {
        SolveStatus::NumericalFailure
    };
    let n = problem.n();
    let sigma = sigma_from_params(&res.y, n);
    let tr = sigma.trace().re;
    let sigma_star = DensityMatrix::new(Operator::from_matrix(sigma / C64::new(tr, 0.0))).ok();
    Ok(SdpSolution {
        bound,
        objective,
        duality_gap: gap,
        status,
        sigma_star,
        iterations: res.iterations,
        backend: Backend::Dense,
    })
}
