//! Poisson noise model linking physical rates to the isotropic visibility.
//!
//! Per frame of length `T`, pairs, dark counts and environmental photons are
//! Poisson distributed with means `C_p = λ_p T`, `C_d = λ_d T` and
//! `C_e = λ_e T`. The source sits in Alice's lab: her photon suffers no
//! channel loss and sees no environmental background. In the diagonal
//! analyzer half of the background is rejected by the polarization
//! filter, so the effective background mean is `C_e / 2`; the polarization
//! analyzer keeps all of it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::model::{Protocol, ProtocolConfig};

/// Per-frame Poisson means and channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Mean number of pairs per frame, `C_p`.
    pub pair_mean: f64,
    /// Mean number of dark counts per side per frame, `C_d`.
    pub dark_mean: f64,
    /// Mean number of environmental photons reaching Alice per frame.
    pub env_mean_a: f64,
    /// Mean number of environmental photons reaching Bob per frame, `C_e`.
    pub env_mean_b: f64,
    /// Loss probability towards Alice.
    pub loss_a: f64,
    /// Loss probability towards Bob, `L`.
    pub loss_b: f64,
    /// Detector efficiency, `η`.
    pub eta: f64,
}

impl NoiseParams {
    /// Source-in-Alice's-lab parameters: no loss or background on her side.
    pub fn source_at_alice(pair_mean: f64, dark_mean: f64, env_mean: f64, loss: f64, eta: f64) -> Self {
        NoiseParams {
            pair_mean,
            dark_mean,
            env_mean_a: 0.0,
            env_mean_b: env_mean,
            loss_a: 0.0,
            loss_b: loss,
            eta,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = [self.pair_mean, self.dark_mean, self.env_mean_a, self.env_mean_b]
            .iter()
            .all(|x| x.is_finite() && *x >= 0.0)
            && (0.0..=1.0).contains(&self.loss_a)
            && (0.0..=1.0).contains(&self.loss_b)
            && (0.0..=1.0).contains(&self.eta);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid noise parameters {self:?}")))
        }
    }

    fn check_source_at_alice(&self) -> Result<()> {
        self.check()?;
        if self.loss_a != 0.0 || self.env_mean_a != 0.0 {
            return Err(Error::InvalidParameter(
                "closed-form coincidence probabilities assume no loss or background on Alice's side"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Coincidence statistics of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSummary {
    /// Probability of exactly one click on each side in a frame.
    pub p_tt11: f64,
    /// Probability that those two clicks come from the same pair.
    pub p_good: f64,
    /// `p_good / p_tt11`.
    pub v: f64,
}

/// Per-frame means for a configuration (BBM92 uses its shortened frame).
pub fn per_frame_params(cfg: &ProtocolConfig) -> NoiseParams {
    let (_, frame) = cfg.effective_dimension_and_frame();
    NoiseParams::source_at_alice(
        cfg.pair_rate_hz * frame,
        cfg.dark_rate_hz * frame,
        cfg.solar_rate_hz * frame,
        cfg.loss.probability(),
        cfg.eta_d,
    )
}

/// Fraction of the background photons that reach the detectors.
pub fn background_acceptance(protocol: Protocol) -> f64 {
    match protocol.measurement_protocol() {
        Protocol::P2 => 1.0,
        _ => 0.5,
    }
}

/// Probability of exactly one click on each side.
pub fn p_tt11(protocol: Protocol, p: &NoiseParams) -> Result<f64> {
    p.check_source_at_alice()?;
    let (cp, cd, ce, l, eta) = (p.pair_mean, p.dark_mean, p.env_mean_b, p.loss_b, p.eta);
    let value = match protocol.measurement_protocol() {
        Protocol::P2 => {
            (-2.0 * cd - cp - ce * eta).exp()
                * (cd * cd * (1.0 + cp)
                    + cd * (ce + cp * (2.0 + ce - cd * (2.0 - l) - l)) * eta
                    + cp * (1.0 + ce - l
                        + cd * (cd - 2.0 * (1.0 + ce) - cd * l + (2.0 + ce) * l))
                        * eta
                        * eta
                    + (1.0 - cd) * cp * ce * (l - 1.0) * eta.powi(3))
        }
        _ => {
            0.5 * (-2.0 * cd - cp - 0.5 * ce * eta).exp()
                * (cp * eta * eta * (2.0 + ce - 2.0 * l - ce * (1.0 - l) * eta)
                    + cd * cd * (2.0 + 2.0 * cp * (1.0 - eta) * (1.0 - eta * (1.0 - l)))
                    + cd * eta
                        * (ce
                            + cp * (4.0 - 2.0 * l - 4.0 * eta
                                + 4.0 * l * eta
                                + ce * (1.0 - eta) * (1.0 - (1.0 - l) * eta))))
        }
    };
    Ok(value)
}

/// Probability that both clicks come from the single emitted pair and
/// nothing else clicks.
pub fn p_good(protocol: Protocol, p: &NoiseParams) -> Result<f64> {
    p.check_source_at_alice()?;
    let c = background_acceptance(protocol) * p.env_mean_b;
    Ok(p.pair_mean
        * (1.0 - p.loss_b)
        * p.eta
        * p.eta
        * (-2.0 * p.dark_mean - p.pair_mean - c * p.eta).exp())
}

/// Isotropic visibility `v = P_good / P_TT(1,1)`.
pub fn visibility(protocol: Protocol, p: &NoiseParams) -> Result<NoiseSummary> {
    let tt = p_tt11(protocol, p)?;
    let good = p_good(protocol, p)?;
    if !(tt > 0.0) {
        return Err(Error::UndefinedVisibility);
    }
    Ok(NoiseSummary { p_tt11: tt, p_good: good, v: good / tt })
}

fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut log = -mean + k as f64 * mean.ln();
    for i in 2..=k {
        log -= (i as f64).ln();
    }
    log.exp()
}

fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut coef = 1.0;
    for i in 0..k {
        coef *= (n - i) as f64 / (i + 1) as f64;
    }
    coef * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Probability that `n` photons arrive at one side given `s` emitted pairs.
fn arrivals_given_pairs(n: u64, s: u64, survive: f64, env: f64) -> f64 {
    (0..=s.min(n))
        .map(|k| binomial_pmf(s, k, survive) * poisson_pmf(env, n - k))
        .sum()
}

/// Joint probability of `n1` photons arriving at Alice and `n2` at Bob,
/// keeping only frames with at most `s_max` pairs.
///
/// Each pair photon survives its channel independently; background photons
/// add a Poisson number with the analyzer's effective mean.
pub fn joint_photon_distribution(
    protocol: Protocol,
    p: &NoiseParams,
    n1: u64,
    n2: u64,
    s_max: u64,
) -> Result<f64> {
    p.check()?;
    let acc = background_acceptance(protocol);
    let (ea, eb) = (acc * p.env_mean_a, acc * p.env_mean_b);
    Ok((0..=s_max)
        .map(|s| {
            poisson_pmf(p.pair_mean, s)
                * arrivals_given_pairs(n1, s, 1.0 - p.loss_a, ea)
                * arrivals_given_pairs(n2, s, 1.0 - p.loss_b, eb)
        })
        .sum())
}

/// Probability of exactly one click on one side when `n` photons arrive.
pub fn single_click_given_photons(p: &NoiseParams, n: u64) -> f64 {
    let q = 1.0 - p.eta;
    let none = if n == 0 { 1.0 } else { q.powi(n as i32) };
    let one = if n == 0 { 0.0 } else { n as f64 * p.eta * q.powi(n as i32 - 1) };
    poisson_pmf(p.dark_mean, 1) * none + poisson_pmf(p.dark_mean, 0) * one
}

/// Monte Carlo estimate of the coincidence statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// Number of simulated frames.
    pub frames: u64,
    /// Fraction of frames with exactly one click per side.
    pub p_tt11: f64,
    /// Binomial standard error of `p_tt11`.
    pub p_tt11_stderr: f64,
    /// Fraction of frames whose two clicks come from the same pair.
    pub p_good: f64,
    /// Binomial standard error of `p_good`.
    pub p_good_stderr: f64,
}

struct PoissonDraw(Option<Poisson<f64>>);

impl PoissonDraw {
    fn new(mean: f64) -> Result<Self> {
        if mean == 0.0 {
            return Ok(PoissonDraw(None));
        }
        Poisson::new(mean)
            .map(|d| PoissonDraw(Some(d)))
            .map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        self.0.as_ref().map_or(0, |d| d.sample(rng) as u64)
    }
}

/// Simulates `frames` frames of the generative model.
///
/// Pairs are Poisson distributed without truncation. Each pair photon
/// survives its channel and is then detected with probability `η`;
/// background photons pass the analyzer's acceptance and are detected with
/// probability `η`; dark counts are Poisson per side. A frame is a
/// coincidence when each side registers exactly one click, and good when
/// both clicks stem from the same pair. Deterministic for a given seed.
pub fn monte_carlo_estimate(
    protocol: Protocol,
    p: &NoiseParams,
    frames: u64,
    seed: u64,
) -> Result<McEstimate> {
    p.check()?;
    if frames == 0 {
        return Err(Error::InvalidParameter("need at least one frame".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = PoissonDraw::new(p.pair_mean)?;
    let darks = PoissonDraw::new(p.dark_mean)?;
    let acc = background_acceptance(protocol);
    let env_a = PoissonDraw::new(p.env_mean_a)?;
    let env_b = PoissonDraw::new(p.env_mean_b)?;
    let (mut tt, mut good) = (0u64, 0u64);
    for _ in 0..frames {
        let s = pairs.sample(&mut rng);
        // Detected pair photons per side, and the pair that produced the
        // last one seen on each side.
        let (mut na, mut nb) = (0u64, 0u64);
        let (mut pair_a, mut pair_b) = (u64::MAX, u64::MAX);
        for k in 0..s {
            if rng.random::<f64>() >= p.loss_a && rng.random::<f64>() < p.eta {
                na += 1;
                pair_a = k;
            }
            if rng.random::<f64>() >= p.loss_b && rng.random::<f64>() < p.eta {
                nb += 1;
                pair_b = k;
            }
        }
        let background = |draw: &PoissonDraw, rng: &mut ChaCha8Rng| -> u64 {
            let n = draw.sample(rng);
            (0..n)
                .filter(|_| rng.random::<f64>() < acc && rng.random::<f64>() < p.eta)
                .count() as u64
        };
        let ea = background(&env_a, &mut rng);
        let eb = background(&env_b, &mut rng);
        let da = darks.sample(&mut rng);
        let db = darks.sample(&mut rng);
        if na + ea + da == 1 && nb + eb + db == 1 {
            tt += 1;
            if na == 1 && nb == 1 && pair_a == pair_b {
                good += 1;
            }
        }
    }
    let n = frames as f64;
    let est = |k: u64| {
        let q = k as f64 / n;
        (q, (q * (1.0 - q) / n).sqrt())
    };
    let (p_tt11, p_tt11_stderr) = est(tt);
    let (p_good, p_good_stderr) = est(good);
    Ok(McEstimate { frames, p_tt11, p_tt11_stderr, p_good, p_good_stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn structural_p_tt11(protocol: Protocol, p: &NoiseParams) -> f64 {
        let mut s = 0.0;
        for n1 in 0..12 {
            for n2 in 0..12 {
                s += joint_photon_distribution(protocol, p, n1, n2, 1).unwrap()
                    * single_click_given_photons(p, n1)
                    * single_click_given_photons(p, n2);
            }
        }
        s
    }

    #[test]
    fn closed_forms_match_single_pair_model() {
        for protocol in [Protocol::P1, Protocol::P2] {
            for &(cp, cd, ce, l, eta) in &[
                (0.1, 5.4e-7, 5.4e-3, 0.997, 0.9),
                (0.3, 0.02, 0.4, 0.5, 0.7),
                (0.05, 0.1, 1.3, 0.0, 1.0),
            ] {
                let p = NoiseParams::source_at_alice(cp, cd, ce, l, eta);
                let closed = p_tt11(protocol, &p).unwrap();
                let oracle = structural_p_tt11(protocol, &p);
                assert!(
                    (closed - oracle).abs() < 1e-13 * oracle.max(1e-3),
                    "{protocol:?} {closed} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn joint_distribution_terms() {
        // No background: one arriving photon at each side needs one pair.
        let p = NoiseParams::source_at_alice(0.2, 0.0, 0.0, 0.25, 0.9);
        let val = joint_photon_distribution(Protocol::P1, &p, 1, 1, 1).unwrap();
        assert!((val - 0.2 * (-0.2f64).exp() * 0.75).abs() < 1e-15);
        // Normalisation with a generous pair cutoff.
        let p = NoiseParams::source_at_alice(0.3, 0.0, 0.4, 0.5, 0.9);
        let mut total = 0.0;
        for n1 in 0..25 {
            for n2 in 0..25 {
                total += joint_photon_distribution(Protocol::P2, &p, n1, n2, 15).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_limit_gives_unit_visibility() {
        let p = NoiseParams::source_at_alice(1e-6, 0.0, 0.0, 0.3, 0.9);
        for protocol in [Protocol::P1, Protocol::P2] {
            let s = visibility(protocol, &p).unwrap();
            assert!((s.v - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_coincidences_are_an_error() {
        let p = NoiseParams::source_at_alice(0.0, 0.0, 0.0, 0.3, 0.9);
        assert_eq!(visibility(Protocol::P1, &p), Err(Error::UndefinedVisibility));
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let p = NoiseParams::source_at_alice(0.1, 1e-3, 0.05, 0.5, 0.9);
        let a = monte_carlo_estimate(Protocol::P1, &p, 20_000, 7).unwrap();
        let b = monte_carlo_estimate(Protocol::P1, &p, 20_000, 7).unwrap();
        assert_eq!(a, b);
    }
}
