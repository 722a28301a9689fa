//! Optical model of the time-bin entanglement source and the unbalanced
//! interferometer analyzers.
//!
//! A single party's detector space is polarization ⊗ time, polarization
//! being the most significant index (`H = 0`, `V = 1`). Bipartite kets are
//! ordered party A then party B.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, DensityMatrix, Ket, Operator, C64};

/// Which analyzer configuration is being modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Diagonal input polarization, no polarization analysis after the
    /// interferometer.
    P1,
    /// Polarization-entangled input, polarization-resolving detection.
    P2,
    /// Two-dimensional reference: P1 evaluated at `d = 2` with the frame
    /// shortened by `d_ref / 2`.
    Bbm92,
}

impl Protocol {
    /// The analyzer whose measurements define the constraints.
    pub fn measurement_protocol(self) -> Protocol {
        match self {
            Protocol::Bbm92 => Protocol::P1,
            p => p,
        }
    }

    /// Lower-case tag used in configuration files and CSV output.
    pub fn tag(self) -> &'static str {
        match self {
            Protocol::P1 => "p1",
            Protocol::P2 => "p2",
            Protocol::Bbm92 => "bbm92",
        }
    }

    /// Parses a tag produced by [`Protocol::tag`] (case-insensitive).
    pub fn from_tag(s: &str) -> Result<Protocol> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p1" => Ok(Protocol::P1),
            "p2" => Ok(Protocol::P2),
            "bbm92" => Ok(Protocol::Bbm92),
            other => Err(Error::InvalidParameter(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Channel loss, given either in decibels or as a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// Attenuation in dB (`transmission = 10^(-dB/10)`).
    Db(f64),
    /// Probability that a photon is lost.
    Probability(f64),
}

impl Loss {
    /// Probability that a photon is lost.
    pub fn probability(self) -> f64 {
        match self {
            Loss::Db(db) => 1.0 - 10f64.powf(-db / 10.0),
            Loss::Probability(p) => p,
        }
    }

    /// Attenuation in dB.
    pub fn db(self) -> f64 {
        match self {
            Loss::Db(db) => db,
            Loss::Probability(p) => -10.0 * (1.0 - p).log10(),
        }
    }
}

/// Full parameter set of one key-rate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Analyzer configuration.
    pub protocol: Protocol,
    /// Number of time bins per frame (reference dimension for BBM92).
    pub d: usize,
    /// Frame length in seconds.
    pub frame_length_s: f64,
    /// Entangled-pair generation rate in Hz.
    pub pair_rate_hz: f64,
    /// Dark-count rate per detector side in Hz.
    pub dark_rate_hz: f64,
    /// Environmental (solar) photon rate reaching the receiver, in Hz.
    pub solar_rate_hz: f64,
    /// Channel loss towards the receiver.
    pub loss: Loss,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Number of Gauss-Radau nodes.
    pub quadrature_m: usize,
}

/// Frame length used by the default scenario, in seconds.
pub const DEFAULT_FRAME_LENGTH_S: f64 = 5.4e-9;

impl ProtocolConfig {
    /// Default scenario: 5.4 ns frame, one pair per ten frames, 100 Hz dark
    /// counts, 90% detectors, 25.2 dB loss, no solar background, ten nodes.
    pub fn default_for(protocol: Protocol, d: usize) -> ProtocolConfig {
        ProtocolConfig {
            protocol,
            d,
            frame_length_s: DEFAULT_FRAME_LENGTH_S,
            pair_rate_hz: 0.1 / DEFAULT_FRAME_LENGTH_S,
            dark_rate_hz: 100.0,
            solar_rate_hz: 0.0,
            loss: Loss::Db(25.2),
            eta_d: 0.9,
            quadrature_m: 10,
        }
    }

    /// Checks every field against its admissible range.
    pub fn validate(&self) -> Result<()> {
        check_even_dimension(self.d)?;
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        let non_negative = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {x}"
                )))
            }
        };
        positive("frame_length_s", self.frame_length_s)?;
        non_negative("pair_rate_hz", self.pair_rate_hz)?;
        non_negative("dark_rate_hz", self.dark_rate_hz)?;
        non_negative("solar_rate_hz", self.solar_rate_hz)?;
        match self.loss {
            Loss::Db(db) => non_negative("loss_db", db)?,
            Loss::Probability(p) => {
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!(
                        "loss_prob must lie in [0, 1), got {p}"
                    )));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.eta_d) {
            return Err(Error::InvalidParameter(format!(
                "eta_d must lie in [0, 1], got {}",
                self.eta_d
            )));
        }
        if self.quadrature_m == 0 {
            return Err(Error::InvalidParameter("quadrature_m must be at least 1".into()));
        }
        Ok(())
    }

    /// Dimension and frame length actually used by the evaluation.
    ///
    /// The BBM92 reference runs at `d = 2` with the frame shortened by the
    /// factor `d_ref / 2`.
    pub fn effective_dimension_and_frame(&self) -> (usize, f64) {
        match self.protocol {
            Protocol::Bbm92 => (2, self.frame_length_s / (self.d as f64 / 2.0)),
            _ => (self.d, self.frame_length_s),
        }
    }
}

/// Rejects dimensions the interleaved analyzer bases cannot handle.
pub fn check_even_dimension(d: usize) -> Result<()> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "number of time bins must be even and at least 2, got {d}"
        )));
    }
    Ok(())
}

/// Sign of a neighbouring-bin superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    /// `(|i⟩ + |i-1⟩)/√2`, detector outcome 1.
    Plus,
    /// `(|i⟩ - |i-1⟩)/√2`, detector outcome 2.
    Minus,
}

impl Sign {
    /// `+1` or `-1`.
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Detector outcome index (1 for `+`, 2 for `-`).
    pub fn outcome(self) -> usize {
        match self {
            Sign::Plus => 1,
            Sign::Minus => 2,
        }
    }

    /// Both signs, outcome order.
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];
}

/// Truncated time-shift `|n⟩ → |n+1⟩` with `|d-1⟩ → 0`.
pub fn time_shift_op(d: usize) -> Operator {
    let mut m = CMat::zeros(d, d);
    for n in 0..d.saturating_sub(1) {
        m[(n + 1, n)] = c(1.0);
    }
    Operator::from_matrix(m)
}

/// Phase shift `e^{iφ} I` on a space of dimension `dim`.
pub fn phase_shift_op(phi: f64, dim: usize) -> Operator {
    Operator::from_matrix(CMat::identity(dim, dim) * C64::from_polar(1.0, phi))
}

/// Single-party interferometer on polarization ⊗ time with one extra bin.
///
/// `|H,n⟩ → |H,n⟩` and `|V,n⟩ → e^{iφ}|V,n+1⟩`. Time runs over `d + 1`
/// bins so the delay is an isometry on the physical domain `n < d`; the
/// column of `|V,d⟩` is zero.
pub fn interferometer_unitary_single(d: usize, phi: f64) -> Operator {
    let t = d + 1;
    let mut m = CMat::zeros(2 * t, 2 * t);
    for n in 0..t {
        m[(n, n)] = c(1.0);
        if n + 1 < t {
            m[(t + n + 1, t + n)] = C64::from_polar(1.0, phi);
        }
    }
    Operator::from_matrix(m)
}

/// Embeds a polarization ⊗ time ket on `d` bins into the `d + 1` bin space.
pub fn embed_single_party(k: &Ket, d: usize) -> Result<Ket> {
    if k.dim() != 2 * d {
        return Err(Error::Dimension(format!(
            "expected a ket of dimension {}, got {}",
            2 * d,
            k.dim()
        )));
    }
    let mut amps = vec![c(0.0); 2 * (d + 1)];
    for p in 0..2 {
        for n in 0..d {
            amps[p * (d + 1) + n] = k.vector()[p * d + n];
        }
    }
    Ok(Ket::from_amplitudes(&amps))
}

/// `(|i⟩ ± |i-1⟩)/√2` on `d` time bins, for `1 ≤ i ≤ d-1`.
pub fn superposition_ket(i: usize, sign: Sign, d: usize) -> Result<Ket> {
    if i == 0 || i >= d {
        return Err(Error::Dimension(format!(
            "superposition index {i} out of range 1..{}",
            d.saturating_sub(1)
        )));
    }
    let mut amps = vec![0.0; d];
    amps[i] = FRAC_1_SQRT_2;
    amps[i - 1] = sign.value() * FRAC_1_SQRT_2;
    Ok(Ket::from_real(&amps))
}

/// Polarization kets `|H⟩, |V⟩, |D⟩, |A⟩`.
pub fn polarization_ket(label: char) -> Result<Ket> {
    let s = FRAC_1_SQRT_2;
    match label {
        'H' => Ok(Ket::from_real(&[1.0, 0.0])),
        'V' => Ok(Ket::from_real(&[0.0, 1.0])),
        'D' => Ok(Ket::from_real(&[s, s])),
        'A' => Ok(Ket::from_real(&[s, -s])),
        other => Err(Error::InvalidParameter(format!("unknown polarization '{other}'"))),
    }
}

/// Pre-interferometer ket detected by output `x` at bin `i`:
/// `(|H,i⟩ + (-1)^{x-1} e^{-iφ}|V,i-1⟩)/√2` on polarization ⊗ `d` bins.
///
/// Equals `U†|D,i⟩` for `x = 1` and `U†|A,i⟩` for `x = 2`, where `U` is the
/// interferometer after a half-wave plate mapping `H → D`, `V → A`.
pub fn effective_meas_ket(x: usize, i: usize, phi: f64, d: usize) -> Result<Ket> {
    if x != 1 && x != 2 {
        return Err(Error::InvalidParameter(format!("detector output must be 1 or 2, got {x}")));
    }
    if i == 0 || i >= d {
        return Err(Error::Dimension(format!(
            "bin index {i} out of range 1..{}",
            d.saturating_sub(1)
        )));
    }
    let sign = if x == 1 { 1.0 } else { -1.0 };
    let mut amps = vec![c(0.0); 2 * d];
    amps[i] = c(FRAC_1_SQRT_2);
    amps[d + i - 1] = C64::from_polar(sign * FRAC_1_SQRT_2, -phi);
    Ok(Ket::from_amplitudes(&amps))
}

/// `(1/√d) Σ_k |k⟩|k⟩`.
pub fn max_entangled_time_ket(d: usize) -> Ket {
    let mut amps = vec![0.0; d * d];
    let a = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        amps[k * d + k] = a;
    }
    Ket::from_real(&amps)
}

/// The ideal source state of each analyzer configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    /// Full two-party ket on `(2 d)^2` dimensions, ordered
    /// `(pol_A ⊗ time_A) ⊗ (pol_B ⊗ time_B)`.
    pub full: Ket,
    /// Time-only ket on `d^2` dimensions.
    pub temporal: Ket,
}

/// Source state: `|DD⟩ ⊗ Φ_d` for P1, `(|HH⟩+|VV⟩)/√2 ⊗ Φ_d` for P2.
pub fn target_state(protocol: Protocol, d: usize) -> Result<TargetState> {
    check_even_dimension(d)?;
    let (d, protocol) = match protocol {
        Protocol::Bbm92 => (2, Protocol::P1),
        p => (d, p),
    };
    let time = max_entangled_time_ket(d);
    let pol_pairs: Vec<(f64, char, char)> = match protocol {
        Protocol::P1 => vec![(1.0, 'D', 'D')],
        _ => vec![(FRAC_1_SQRT_2, 'H', 'H'), (FRAC_1_SQRT_2, 'V', 'V')],
    };
    let mut full = Ket::zeros(4 * d * d);
    for (amp, pa, pb) in pol_pairs {
        let ka = polarization_ket(pa)?;
        let kb = polarization_ket(pb)?;
        // Σ_k |p_A, k⟩ ⊗ |p_B, k⟩ / √d
        for k in 0..d {
            let a = ka.tensor(&Ket::basis(d, k)?);
            let b = kb.tensor(&Ket::basis(d, k)?);
            full = full.add(&a.tensor(&b).scale(c(amp / (d as f64).sqrt())));
        }
    }
    Ok(TargetState { full, temporal: time })
}

/// Isotropic time state `v |Φ_d⟩⟨Φ_d| + (1 - v) I / d²`.
pub fn isotropic_time_state(v: f64, d: usize) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("visibility must lie in [0, 1], got {v}")));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2, got {d}")));
    }
    let n = d * d;
    let phi = max_entangled_time_ket(d).projector();
    let mixed = Operator::identity(n).scale((1.0 - v) / n as f64);
    DensityMatrix::new(phi.scale(v).add(&mixed)?.hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::partial_trace;

    #[test]
    fn shift_is_truncated() {
        let t = time_shift_op(4);
        let last = Ket::basis(4, 3).unwrap();
        assert!(t.apply(&last).unwrap().norm() == 0.0);
        let k1 = t.apply(&Ket::basis(4, 1).unwrap()).unwrap();
        assert_eq!(k1, Ket::basis(4, 2).unwrap());
    }

    #[test]
    fn interferometer_is_isometry_on_physical_domain() {
        for d in [2, 4, 6] {
            let u = interferometer_unitary_single(d, 0.37);
            let t = d + 1;
            for a in 0..2 * t {
                for b in 0..2 * t {
                    let physical = |x: usize| x % t < d;
                    if !(physical(a) && physical(b)) {
                        continue;
                    }
                    let ka = u.apply(&Ket::basis(2 * t, a).unwrap()).unwrap();
                    let kb = u.apply(&Ket::basis(2 * t, b).unwrap()).unwrap();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((ka.inner(&kb) - c(expect)).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn effective_ket_is_pulled_back_detector_ket() {
        for d in [2, 4, 6] {
            for &phi in &[0.0, 0.9] {
                let u = interferometer_unitary_single(d, phi).dagger();
                for i in 1..d {
                    for (x, pol) in [(1, 'D'), (2, 'A')] {
                        let det = polarization_ket(pol)
                            .unwrap()
                            .tensor(&Ket::basis(d + 1, i).unwrap());
                        let pulled = u.apply(&det).unwrap();
                        let eff = embed_single_party(&effective_meas_ket(x, i, phi, d).unwrap(), d)
                            .unwrap();
                        assert!(pulled.sub(&eff).norm() < 1e-15, "d={d} i={i} x={x}");
                    }
                }
            }
        }
    }

    #[test]
    fn diagonal_projection_gives_half_superposition() {
        // (⟨D| ⊗ I)|Ψ̃₁(i,0)⟩ = |i+⟩/√2, hence ⟨D,i+|Ψ̃₁(i,0)⟩ = 1/√2.
        let d = 4;
        let dk = polarization_ket('D').unwrap();
        for i in 1..d {
            let eff = effective_meas_ket(1, i, 0.0, d).unwrap();
            let reduced: Vec<C64> = (0..d)
                .map(|n| dk.vector()[0].conj() * eff.vector()[n] + dk.vector()[1].conj() * eff.vector()[d + n])
                .collect();
            let reduced = Ket::from_amplitudes(&reduced);
            let expect = superposition_ket(i, Sign::Plus, d).unwrap().scale(c(FRAC_1_SQRT_2));
            assert!(reduced.sub(&expect).norm() < 1e-15);
            let overlap = dk.tensor(&superposition_ket(i, Sign::Plus, d).unwrap()).inner(&eff);
            assert!((overlap - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        }
    }

    #[test]
    fn target_states_are_normalized_with_expected_schmidt_rank() {
        for d in [2, 4] {
            for (p, rank) in [(Protocol::P1, d), (Protocol::P2, 2 * d)] {
                let ts = target_state(p, d).unwrap();
                assert!((ts.full.norm() - 1.0).abs() < 1e-14);
                let rho = ts.full.projector();
                let ra = partial_trace(&rho, &[2 * d, 2 * d], &[0]).unwrap();
                let (vals, _) = crate::linalg::eig_hermitian(&ra).unwrap();
                let nonzero = vals.iter().filter(|&&x| x > 1e-12).count();
                assert_eq!(nonzero, rank);
            }
        }
    }

    #[test]
    fn isotropic_state_limits() {
        let d = 4;
        let mixed = isotropic_time_state(0.0, d).unwrap();
        assert!(mixed
            .operator()
            .max_abs_diff(DensityMatrix::maximally_mixed(d * d).operator())
            < 1e-15);
        let pure = isotropic_time_state(1.0, d).unwrap();
        let phi = max_entangled_time_ket(d).projector();
        assert!(pure.operator().max_abs_diff(&phi) < 1e-15);
        assert!(isotropic_time_state(1.1, d).is_err());
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(target_state(Protocol::P1, 3).is_err());
        let mut cfg = ProtocolConfig::default_for(Protocol::P1, 5);
        assert!(cfg.validate().is_err());
        cfg.d = 4;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn loss_conversions_round_trip() {
        let l = Loss::Db(25.2);
        assert!((Loss::Probability(l.probability()).db() - 25.2).abs() < 1e-10);
        assert!((Loss::Db(10.0).probability() - 0.9).abs() < 1e-15);
    }
}
