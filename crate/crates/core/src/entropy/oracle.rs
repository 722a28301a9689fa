//! Exact conditional entropies of a known state, used to validate the
//! numerical bounds.

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, operator_entropy, partial_trace, von_neumann_entropy, DensityMatrix, Ket, Operator, C64};

fn time_dimension(rho: &DensityMatrix) -> Result<usize> {
    let n = rho.dim();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || d == 0 {
        return Err(Error::Dimension(format!("state of dimension {n} is not d x d")));
    }
    Ok(d)
}

/// Zeroes every block of `m` off-diagonal in Alice's register (the leading
/// factor of dimension `d`).
fn pinch_leading(m: &Operator, d: usize) -> Operator {
    let rest = m.rows() / d;
    let mut out = m.matrix().clone();
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            if r / rest != c / rest {
                out[(r, c)] = C64::new(0.0, 0.0);
            }
        }
    }
    Operator::from_matrix(out)
}

/// `S(A|E)` in bits for Alice's key measured in her time basis, with Eve
/// holding a purification of `ρ_AB`.
///
/// Computed directly as `S(Z E) - S(E)` on an explicit purification.
pub fn direct_entropy_oracle(rho: &DensityMatrix) -> Result<f64> {
    let d = time_dimension(rho)?;
    let n = d * d;
    let (vals, vecs) = eig_hermitian(rho.operator())?;
    let mut amps = vec![C64::new(0.0, 0.0); n * n];
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let s = lam.sqrt();
        for ab in 0..n {
            amps[ab * n + k] += vecs.matrix()[(ab, k)] * s;
        }
    }
    let psi = Ket::from_amplitudes(&amps);
    let full = psi.projector();
    let rho_ae = partial_trace(&full, &[d, d, n], &[0, 2])?;
    let rho_e = partial_trace(&full, &[d, d, n], &[2])?;
    let zae = pinch_leading(&rho_ae, d);
    Ok(operator_entropy(&zae)? - operator_entropy(&rho_e)?)
}

/// The same quantity through `S(Z_A(ρ)) - S(ρ)`.
pub fn pinched_entropy_gap(rho: &DensityMatrix) -> Result<f64> {
    let d = time_dimension(rho)?;
    let z = pinch_leading(rho.operator(), d);
    Ok(operator_entropy(&z)? - von_neumann_entropy(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::isotropic_time_state;

    #[test]
    fn maximally_entangled_has_full_key() {
        let rho = isotropic_time_state(1.0, 4).unwrap();
        assert!((direct_entropy_oracle(&rho).unwrap() - 2.0).abs() < 1e-10);
        assert!((pinched_entropy_gap(&rho).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn product_mixed_state_has_no_key() {
        let rho = DensityMatrix::maximally_mixed(4);
        assert!(direct_entropy_oracle(&rho).unwrap().abs() < 1e-10);
    }

    #[test]
    fn routes_agree_on_isotropic_states() {
        for &v in &[0.3, 0.7, 0.95] {
            let rho = isotropic_time_state(v, 2).unwrap();
            let a = direct_entropy_oracle(&rho).unwrap();
            let b = pinched_entropy_gap(&rho).unwrap();
            assert!((a - b).abs() < 1e-10, "v={v}: {a} vs {b}");
        }
    }
}
