//! Random test matrices shared by the integration tests.
#![allow(dead_code)]

use hdqkd_core::linalg::{DensityMatrix, Operator, C64};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with independent standard complex Gaussian entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

pub fn random_operator(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Operator {
    Operator::from_matrix(ginibre(rows, cols, rng))
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Operator {
    let g = ginibre(n, n, rng);
    Operator::from_matrix((&g + g.adjoint()) * C64::new(0.5, 0.0))
}

/// Full-rank random state `G G† / Tr(G G†)`.
pub fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = ginibre(n, n, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let m = m.map(|x| x / tr);
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(Operator::from_matrix(m)).expect("valid random state")
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}
