mod common;

use std::f64::consts::LN_2;

use common::{random_density, rng};
use hdqkd_core::entropy::{
    assemble_sdp, direct_entropy_oracle, gauss_radau, key_pinching_projectors, pinched_entropy_gap,
    solve_entropy_bound, Backend, SdpProblem, SolverOptions,
};
use hdqkd_core::linalg::{DensityMatrix, Ket, Operator, C64};
use hdqkd_core::model::{isotropic_time_state, Protocol};
use hdqkd_core::povm::constraints_from_state;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn opts(backend: Backend) -> SolverOptions {
    SolverOptions { backend, ..SolverOptions::default() }
}

fn protocol_problem(protocol: Protocol, rho: &DensityMatrix, m: usize) -> SdpProblem {
    assemble_sdp(&constraints_from_state(protocol, rho).unwrap(), gauss_radau(m).unwrap()).unwrap()
}

/// Orthonormal Hermitian basis of `n × n` matrices.
fn hermitian_basis(n: usize) -> Vec<Operator> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for r in 0..n {
        for c in r..n {
            if r == c {
                let mut m = DMatrix::<C64>::zeros(n, n);
                m[(r, r)] = C64::new(1.0, 0.0);
                out.push(Operator::from_matrix(m));
            } else {
                let mut re = DMatrix::<C64>::zeros(n, n);
                re[(r, c)] = C64::new(s, 0.0);
                re[(c, r)] = C64::new(s, 0.0);
                let mut im = DMatrix::<C64>::zeros(n, n);
                im[(r, c)] = C64::new(0.0, s);
                im[(c, r)] = C64::new(0.0, -s);
                out.push(Operator::from_matrix(re));
                out.push(Operator::from_matrix(im));
            }
        }
    }
    out
}

fn tomography_problem(rho: &DensityMatrix, d: usize, m: usize) -> SdpProblem {
    let constraints = hermitian_basis(d * d)
        .into_iter()
        .map(|b| {
            let f = rho.expectation(&b).unwrap();
            (b, f)
        })
        .collect();
    SdpProblem::new(d, gauss_radau(m).unwrap(), constraints).unwrap()
}

#[test]
fn two_node_rule_solves_moment_equations() {
    // With t₂ = 1 fixed, w₁ + w₂ = 1, w₁t₁ + w₂ = 1/2, w₁t₁² + w₂ = 1/3
    // give w₁(1 - t₁) = 1/2 and w₁(1 - t₁²) = 2/3, so 1 + t₁ = 4/3.
    let t1 = 2.0 / 3.0 / 0.5 - 1.0;
    let w1 = 0.5 / (1.0 - t1);
    let q = gauss_radau(2).unwrap();
    assert!((q.nodes[0] - t1).abs() < 1e-15 && (q.nodes[1] - 1.0).abs() < 1e-15);
    assert!((q.weights[0] - w1).abs() < 1e-15 && (q.weights[1] - (1.0 - w1)).abs() < 1e-15);
    let c_direct = w1 / (t1 * LN_2) + (1.0 - w1) / LN_2;
    assert!((q.entropy_constant() - c_direct).abs() < 1e-14);
    assert!((q.entropy_constant() - 2.5 / LN_2).abs() < 1e-14);
    let single = gauss_radau(1).unwrap();
    assert_eq!((single.nodes.as_slice(), single.weights.as_slice()), (&[1.0][..], &[1.0][..]));
    assert!(gauss_radau(0).is_err());
}

proptest! {
    #[test]
    fn rule_is_exact_to_degree_two_m_minus_two(m in 1usize..16) {
        let q = gauss_radau(m).unwrap();
        prop_assert_eq!(q.m(), m);
        prop_assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(q.nodes[0] > 0.0 && (q.nodes[m - 1] - 1.0).abs() < 1e-14);
        prop_assert!(q.weights.iter().all(|&w| w > 0.0));
        prop_assert!((q.weights[m - 1] - 1.0 / (m * m) as f64).abs() < 1e-12);
        for k in 0..=(2 * m - 2) as i32 {
            prop_assert!((q.integrate(|t| t.powi(k)) - 1.0 / (k as f64 + 1.0)).abs() < 1e-10, "k = {}", k);
        }
    }

    #[test]
    fn oracle_routes_agree_on_random_states(seed in any::<u64>()) {
        let rho = random_density(4, &mut rng(seed));
        let a = direct_entropy_oracle(&rho).unwrap();
        let b = pinched_entropy_gap(&rho).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&a));
    }
}

#[test]
fn ten_node_rule() {
    let q = gauss_radau(10).unwrap();
    assert!((q.weights[9] - 0.01).abs() < 1e-12);
    assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for k in 0..=18 {
        assert!((q.integrate(|t| t.powi(k)) - 1.0 / (k as f64 + 1.0)).abs() < 1e-10);
    }
}

#[test]
fn key_projectors_split_isotropic_state_evenly() {
    for d in [2, 4] {
        let p = key_pinching_projectors(d);
        assert_eq!(p.len(), d);
        let mut sum = Operator::zeros(d * d, d * d);
        for (a, pa) in p.iter().enumerate() {
            assert!(pa.mul(pa).unwrap().max_abs_diff(pa) < 1e-15);
            assert!((pa.trace().re - d as f64).abs() < 1e-15);
            for pb in &p[a + 1..] {
                assert!(pa.mul(pb).unwrap().max_abs_diff(&Operator::zeros(d * d, d * d)) < 1e-15);
            }
            sum = sum.add(pa).unwrap();
            let rho = isotropic_time_state(0.37, d).unwrap();
            let diag_sum: f64 = (0..d * d).filter(|k| k / d == a).map(|k| rho.matrix()[(k, k)].re).sum();
            assert!((rho.expectation(pa).unwrap() - 1.0 / d as f64).abs() < 1e-14);
            assert!((diag_sum - 1.0 / d as f64).abs() < 1e-14);
        }
        assert!(sum.max_abs_diff(&Operator::identity(d * d)) < 1e-15);
    }
}

#[test]
fn oracle_reference_states() {
    let product = DensityMatrix::from_ket(&Ket::basis(4, 0).unwrap()).unwrap();
    assert!(direct_entropy_oracle(&product).unwrap().abs() < 1e-12);
    let flat = DensityMatrix::maximally_mixed(4);
    assert!(direct_entropy_oracle(&flat).unwrap().abs() < 1e-12);
    let bell = isotropic_time_state(1.0, 2).unwrap();
    assert!((direct_entropy_oracle(&bell).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn tomographic_constraints_fix_sigma() {
    let rho = isotropic_time_state(0.9, 2).unwrap();
    assert_eq!(tomography_problem(&rho, 2, 2).sigma_free_dimension(), 0);
    let partial = protocol_problem(Protocol::P1, &rho, 2);
    assert!(partial.sigma_free_dimension() > 0);
}

#[test]
fn tomographic_bound_approaches_exact_entropy() {
    let states = [isotropic_time_state(0.9, 2).unwrap(), random_density(4, &mut rng(11))];
    for rho in states {
        let exact = direct_entropy_oracle(&rho).unwrap();
        let sol = solve_entropy_bound(&tomography_problem(&rho, 2, 10), &opts(Backend::Structured)).unwrap();
        assert!(sol.status.has_bound(), "{:?}", sol.status);
        assert!(sol.bound <= exact + 1e-6 && sol.bound >= exact - 0.01, "{} vs {exact}", sol.bound);
    }
}

#[test]
fn unconstrained_state_gives_no_key() {
    let p = SdpProblem::new(2, gauss_radau(4).unwrap(), Vec::new()).unwrap();
    let sol = solve_entropy_bound(&p, &opts(Backend::Structured)).unwrap();
    assert!(sol.status.has_bound());
    assert!(sol.bound <= 1e-6, "{}", sol.bound);
}

#[test]
fn bounds_stay_below_exact_entropy() {
    for protocol in [Protocol::P1, Protocol::P2] {
        for v in [0.6, 0.85, 0.95, 1.0] {
            let rho = isotropic_time_state(v, 2).unwrap();
            let sol = solve_entropy_bound(&protocol_problem(protocol, &rho, 6), &opts(Backend::Structured)).unwrap();
            assert!(sol.status.has_bound());
            assert!(sol.bound <= direct_entropy_oracle(&rho).unwrap() + 1e-6, "{protocol:?} v={v}");
            assert!(sol.bound <= sol.objective);
            assert!((sol.objective - sol.bound - sol.duality_gap).abs() < 1e-12);
        }
    }
}

#[test]
fn backends_agree_on_small_programs() {
    let cases = [
        (Protocol::P1, isotropic_time_state(0.9, 2).unwrap()),
        (Protocol::P2, isotropic_time_state(0.8, 2).unwrap()),
    ];
    for (protocol, rho) in cases {
        let p = protocol_problem(protocol, &rho, 3);
        let s = solve_entropy_bound(&p, &opts(Backend::Structured)).unwrap();
        let d = solve_entropy_bound(&p, &opts(Backend::Dense)).unwrap();
        assert!(s.status.has_bound() && d.status.has_bound());
        assert!((s.bound - d.bound).abs() < 1e-5, "{protocol:?}: {} vs {}", s.bound, d.bound);
    }
    // A complex program exercises the Hermitian path of both backends.
    let rho = random_density(4, &mut rng(5));
    let p = tomography_problem(&rho, 2, 2);
    assert!(!p.is_real());
    let s = solve_entropy_bound(&p, &opts(Backend::Structured)).unwrap();
    let d = solve_entropy_bound(&p, &opts(Backend::Dense)).unwrap();
    assert!((s.bound - d.bound).abs() < 1e-5, "{} vs {}", s.bound, d.bound);
}

#[test]
fn more_nodes_tighten_the_bound() {
    let rho = isotropic_time_state(0.9, 2).unwrap();
    let bounds: Vec<f64> = (2..=6)
        .map(|m| solve_entropy_bound(&protocol_problem(Protocol::P1, &rho, m), &opts(Backend::Structured)).unwrap().bound)
        .collect();
    assert!(bounds.windows(2).all(|w| w[1] >= w[0] - 1e-7), "{bounds:?}");
}

#[test]
fn ideal_point_bound() {
    let rho = isotropic_time_state(1.0, 2).unwrap();
    let sol = solve_entropy_bound(&protocol_problem(Protocol::P1, &rho, 10), &opts(Backend::Structured)).unwrap();
    assert!(sol.bound >= 0.98 && sol.bound <= 1.0 + 1e-6, "{}", sol.bound);
}

#[test]
fn export_is_valid_json() {
    let p = protocol_problem(Protocol::P1, &isotropic_time_state(0.9, 2).unwrap(), 2);
    let v: serde_json::Value = serde_json::from_str(&p.export_json().unwrap()).unwrap();
    assert!(v.is_object());
}
