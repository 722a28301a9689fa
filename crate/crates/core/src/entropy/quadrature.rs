//! Gauss-Radau quadrature on `[0, 1]` with the right endpoint fixed.
//!
//! Nodes come from the eigenvalues of the Legendre Jacobi matrix whose last
//! diagonal entry is modified so that `x = 1` is a zero of the resulting
//! orthogonal polynomial (Golub's construction); weights are the squared
//! first eigenvector components.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes `t_i ∈ (0, 1]` (ascending, last one equal to 1) and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    /// Nodes in ascending order; the last equals 1.
    pub nodes: Vec<f64>,
    /// Positive weights summing to 1.
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Number of nodes.
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ_i w_i / (t_i ln 2)`, the constant term of the entropy bound.
    pub fn entropy_constant(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w / (t * std::f64::consts::LN_2))
            .sum()
    }

    /// Per-node prefactors `w_i / (t_i ln 2)`.
    pub fn prefactors(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w / (t * std::f64::consts::LN_2))
            .collect()
    }

    /// `∫_0^1 f ≈ Σ_i w_i f(t_i)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// `m`-point Gauss-Radau rule on `[0, 1]` with fixed node `t_m = 1`.
///
/// Exact for polynomials of degree up to `2m - 2`.
pub fn gauss_radau(m: usize) -> Result<Quadrature> {
    if m == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
    }
    if m == 1 {
        return Ok(Quadrature { nodes: vec![1.0], weights: vec![1.0] });
    }
    // Legendre recurrence on [-1, 1]: zero diagonal, off-diagonal k/√(4k²-1).
    let beta = |k: usize| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    };
    // Radau modification: α_m = 1 + δ_{m-1} with (J_{m-1} - I) δ = β_{m-1}² e_{m-1}.
    let n = m - 1;
    let mut shifted = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        shifted[(i, i)] = -1.0;
        if i + 1 < n {
            shifted[(i, i + 1)] = beta(i + 1);
            shifted[(i + 1, i)] = beta(i + 1);
        }
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = beta(n) * beta(n);
    let delta = shifted
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Radau modification system".into()))?;

    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 0..n {
        jac[(i, i + 1)] = beta(i + 1);
        jac[(i + 1, i)] = beta(i + 1);
    }
    jac[(m - 1, m - 1)] = 1.0 + delta[n - 1];

    let eig = SymmetricEigen::try_new(jac, 1e-16, 0)
        .ok_or_else(|| Error::Numerical("Jacobi eigen-decomposition did not converge".into()))?;
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let x = eig.eigenvalues[k];
            let v0 = eig.eigenvectors[(0, k)];
            // μ₀ = 2 on [-1, 1]; halve for [0, 1].
            ((x + 1.0) / 2.0, v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    // The modified matrix has 1 as an exact eigenvalue; remove rounding.
    nodes[m - 1] = 1.0;
    Ok(Quadrature { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let q = gauss_radau(2).unwrap();
        assert!((q.nodes[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(q.nodes[1], 1.0);
        assert!((q.weights[0] - 0.75).abs() < 1e-15);
        assert!((q.weights[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn endpoint_weight_is_inverse_square() {
        for m in 1..=20 {
            let q = gauss_radau(m).unwrap();
            assert!((q.weights[m - 1] - 1.0 / (m * m) as f64).abs() < 1e-13, "m={m}");
        }
    }

    #[test]
    fn nodes_in_unit_interval() {
        for m in 1..=20 {
            let q = gauss_radau(m).unwrap();
            assert!(q.nodes.iter().all(|&t| t > 0.0 && t <= 1.0));
            assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
