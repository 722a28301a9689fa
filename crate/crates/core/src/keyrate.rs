//! Devetak-Winter key rates.
//!
//! The raw key is Alice's time-of-arrival bin. Per coincidence the rate is
//! `S(A|E) - H(A|B)` with ideal one-way error correction, clipped at zero;
//! per second it is multiplied by `P_TT(1,1) / T`. No sifting factor is
//! applied (test rounds are assumed asymptotically rare).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::entropy::{assemble_sdp, gauss_radau, solve_entropy_bound, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::shannon_entropy;
use crate::model::{check_even_dimension, isotropic_time_state, Loss, Protocol, ProtocolConfig};
use crate::noise::{per_frame_params, visibility, NoiseParams};
use crate::povm::constraints_from_state;

/// Outcome of one key-rate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    /// Protocol evaluated.
    pub protocol: Protocol,
    /// Dimension used by the program (2 for BBM92).
    pub d: usize,
    /// Frame length used, in seconds.
    pub frame_length_s: f64,
    /// Isotropic visibility.
    pub v: f64,
    /// Symbol error rate of the raw key.
    pub qber: f64,
    /// Certified lower bound on `S(A|E)` in bits (NaN without a bound).
    pub s_ae_lb: f64,
    /// `H(A|B)` in bits.
    pub h_ab: f64,
    /// `s_ae_lb - h_ab`, not clipped.
    pub rate_unclipped: f64,
    /// `max(s_ae_lb - h_ab, 0)` in bits per coincidence.
    pub rate_per_coincidence: f64,
    /// Bits per second.
    pub rate_per_second: f64,
    /// Probability of a single click on each side per frame.
    pub p_tt11: f64,
    /// Solver outcome.
    pub status: SolveStatus,
    /// Duality gap of the entropy program.
    pub duality_gap: f64,
    /// The analyzer model makes this rate an upper bound only (P2).
    pub upper_bound_only: bool,
}

/// `H(A|B)` in bits for the time-bin outcomes of the isotropic state.
///
/// The joint distribution is `p(i, j) = v δ_ij / d + (1 - v) / d²` with
/// uniform marginals.
pub fn conditional_shannon_hab(v: f64, d: usize) -> f64 {
    let df = d as f64;
    let same = v + (1.0 - v) / df;
    let other = (1.0 - v) / df;
    let mut p = vec![other; d];
    p[0] = same;
    shannon_entropy(&p)
}

/// Probability that Alice's and Bob's time bins differ, `1 - v - (1 - v)/d`.
pub fn qber(v: f64, d: usize) -> f64 {
    1.0 - v - (1.0 - v) / d as f64
}

/// Scales every per-frame Poisson mean by `factor` (frame length change at
/// fixed rates per second).
pub fn rescale_frame(noise: &NoiseParams, factor: f64) -> NoiseParams {
    NoiseParams {
        pair_mean: noise.pair_mean * factor,
        dark_mean: noise.dark_mean * factor,
        env_mean_a: noise.env_mean_a * factor,
        env_mean_b: noise.env_mean_b * factor,
        ..*noise
    }
}

/// Key rate for a configuration, with per-frame means derived from its
/// rates and (effective) frame length.
pub fn compute_rate(cfg: &ProtocolConfig, opts: &SolverOptions) -> Result<KeyRateResult> {
    cfg.validate()?;
    compute_rate_with_noise(cfg, &per_frame_params(cfg), opts)
}

/// Key rate for a configuration with explicitly supplied per-frame means.
///
/// `cfg` supplies the protocol, dimension, frame length (for the
/// per-second rate) and quadrature order.
pub fn compute_rate_with_noise(
    cfg: &ProtocolConfig,
    noise: &NoiseParams,
    opts: &SolverOptions,
) -> Result<KeyRateResult> {
    let (d, frame) = cfg.effective_dimension_and_frame();
    check_even_dimension(d)?;
    let summary = visibility(cfg.protocol, noise)?;
    let v = summary.v.clamp(0.0, 1.0);
    let rho = isotropic_time_state(v, d)?;
    let constraints = constraints_from_state(cfg.protocol.measurement_protocol(), &rho)?;
    let problem = assemble_sdp(&constraints, gauss_radau(cfg.quadrature_m)?)?;
    let sol = solve_entropy_bound(&problem, opts)?;
    let h_ab = conditional_shannon_hab(v, d);
    let s_ae_lb = if sol.status.has_bound() { sol.bound } else { f64::NAN };
    let rate_unclipped = s_ae_lb - h_ab;
    let rate_per_coincidence = if rate_unclipped.is_nan() { f64::NAN } else { rate_unclipped.max(0.0) };
    Ok(KeyRateResult {
        protocol: cfg.protocol,
        d,
        frame_length_s: frame,
        v,
        qber: qber(v, d),
        s_ae_lb,
        h_ab,
        rate_unclipped,
        rate_per_coincidence,
        rate_per_second: rate_per_coincidence * summary.p_tt11 / frame,
        p_tt11: summary.p_tt11,
        status: sol.status,
        duality_gap: sol.duality_gap,
        upper_bound_only: cfg.protocol.measurement_protocol() == Protocol::P2,
    })
}

/// Two-dimensional reference rate: P1 at `d = 2` with the frame of `cfg`
/// shortened by `cfg.d / 2`, same rates per second.
pub fn bbm92_rate(cfg: &ProtocolConfig, opts: &SolverOptions) -> Result<KeyRateResult> {
    let reference = ProtocolConfig { protocol: Protocol::Bbm92, ..cfg.clone() };
    compute_rate(&reference, opts)
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Environmental photon rate in Hz.
    SolarRate,
    /// Channel loss in dB.
    LossDb,
}

impl SweepAxis {
    /// Lower-case tag.
    pub fn tag(self) -> &'static str {
        match self {
            SweepAxis::SolarRate => "solar_rate",
            SweepAxis::LossDb => "loss_db",
        }
    }

    /// Parses a tag.
    pub fn from_tag(s: &str) -> Result<SweepAxis> {
        match s.trim().to_ascii_lowercase().as_str() {
            "solar_rate" | "solar_rate_hz" | "solar" => Ok(SweepAxis::SolarRate),
            "loss_db" | "loss" => Ok(SweepAxis::LossDb),
            other => Err(Error::InvalidParameter(format!("unknown sweep axis '{other}'"))),
        }
    }

    /// `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &ProtocolConfig, value: f64) -> ProtocolConfig {
        let mut out = cfg.clone();
        match self {
            SweepAxis::SolarRate => out.solar_rate_hz = value,
            SweepAxis::LossDb => out.loss = Loss::Db(value),
        }
        out
    }
}

/// One sweep point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Configuration evaluated.
    pub config: ProtocolConfig,
    /// Result, or the error message of this point.
    pub result: std::result::Result<KeyRateResult, String>,
}

/// Evaluates `grid` along `axis`, using up to `jobs` threads. Rows come back
/// in grid order and a failing point does not stop the others.
pub fn sweep(
    cfg: &ProtocolConfig,
    axis: SweepAxis,
    grid: &[f64],
    opts: &SolverOptions,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("sweep grid must be strictly ascending".into()));
    }
    let configs: Vec<ProtocolConfig> = grid.iter().map(|&x| axis.apply(cfg, x)).collect();
    let slots: Vec<Mutex<Option<SweepRow>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= configs.len() {
            break;
        }
        let result = compute_rate(&configs[i], opts).map_err(|e| e.to_string());
        *slots[i].lock().expect("sweep slot poisoned") = Some(SweepRow { config: configs[i].clone(), result });
    };
    let jobs = jobs.clamp(1, configs.len());
    if jobs == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(worker);
            }
        });
    }
    Ok(slots
        .into_iter()
        .map(|m| m.into_inner().expect("sweep slot poisoned").expect("every point evaluated"))
        .collect())
}

/// Bracket `[below, above]` of the solar rate where the key rate vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarThreshold {
    /// Largest rate found with a positive key rate.
    pub below: f64,
    /// Smallest rate found with no key.
    pub above: f64,
    /// Rate evaluations performed.
    pub evaluations: usize,
}

impl SolarThreshold {
    /// Geometric midpoint of the bracket.
    pub fn estimate(&self) -> f64 {
        (self.below * self.above).sqrt()
    }
}

/// Locates the solar rate at which the unclipped rate crosses zero by
/// geometric bisection, until `above / below ≤ 1 + rel_width`.
///
/// The key rate must be positive at `lo` and non-positive at `hi`.
pub fn solar_threshold(
    cfg: &ProtocolConfig,
    opts: &SolverOptions,
    lo: f64,
    hi: f64,
    rel_width: f64,
) -> Result<SolarThreshold> {
    if !(lo > 0.0 && hi > lo && rel_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold search needs 0 < lo < hi and a positive width, got [{lo}, {hi}], {rel_width}"
        )));
    }
    let positive = |x: f64| -> Result<bool> {
        let r = compute_rate(&SweepAxis::SolarRate.apply(cfg, x), opts)?;
        if !r.status.has_bound() {
            return Err(Error::Solver(format!(
                "no entropy bound at solar rate {x} ({})",
                r.status.tag()
            )));
        }
        Ok(r.rate_unclipped > 0.0)
    };
    if !positive(lo)? {
        return Err(Error::InvalidParameter(format!("no key at the lower solar rate {lo}")));
    }
    if positive(hi)? {
        return Err(Error::InvalidParameter(format!("key still positive at the upper solar rate {hi}")));
    }
    let (mut below, mut above, mut evaluations) = (lo, hi, 2);
    while above / below > 1.0 + rel_width {
        let mid = (below * above).sqrt();
        evaluations += 1;
        if positive(mid)? {
            below = mid;
        } else {
            above = mid;
        }
    }
    Ok(SolarThreshold { below, above, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hab_limits() {
        assert!(conditional_shannon_hab(1.0, 4).abs() < 1e-15);
        assert!((conditional_shannon_hab(0.0, 4) - 2.0).abs() < 1e-12);
        assert!((conditional_shannon_hab(0.0, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qber_limits() {
        assert_eq!(qber(1.0, 4), 0.0);
        assert!((qber(0.0, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rescale_is_linear() {
        let n = NoiseParams::source_at_alice(0.1, 1e-6, 1e-4, 0.99, 0.9);
        let r = rescale_frame(&n, 0.25);
        assert!((r.pair_mean - 0.025).abs() < 1e-15);
        assert!((r.env_mean_b - 2.5e-5).abs() < 1e-18);
        assert_eq!(r.loss_b, n.loss_b);
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let cfg = ProtocolConfig::default_for(Protocol::P1, 2);
        assert!(sweep(&cfg, SweepAxis::SolarRate, &[2.0, 1.0], &SolverOptions::default(), 1).is_err());
        assert!(sweep(&cfg, SweepAxis::SolarRate, &[], &SolverOptions::default(), 1).is_err());
    }
}
